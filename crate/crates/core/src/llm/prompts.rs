use std::path::Path;

use serde::Deserialize;

use super::{LlmRequest, ResponseSchema};

/// One query's prompt: a system instruction, few-shot pairs and a user
/// message with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PromptTemplate {
    pub version: String,
    #[serde(default)]
    pub origin: String,
    pub system: String,
    #[serde(default)]
    pub few_shot: Vec<(String, String)>,
    pub user: String,
}

impl PromptTemplate {
    pub fn render(&self, schema: ResponseSchema, vars: &[(&str, &str)]) -> LlmRequest {
        let mut user = self.user.clone();
        for (k, v) in vars {
            user = user.replace(&format!("{{{{{k}}}}}"), v);
        }
        LlmRequest {
            system_instruction: self.system.clone(),
            few_shot: self.few_shot.clone(),
            user_message: user,
            response_schema: schema,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompts {
    pub placement: PromptTemplate,
    pub scale: PromptTemplate,
    pub script: PromptTemplate,
}

const PLACEMENT: &str = include_str!("../../data/prompts/placement.json");
const SCALE: &str = include_str!("../../data/prompts/scale.json");
const SCRIPT: &str = include_str!("../../data/prompts/script.json");

impl Prompts {
    pub fn builtin() -> Self {
        let parse = |s: &str| serde_json::from_str(s).expect("built-in prompt template is valid");
        Self {
            placement: parse(PLACEMENT),
            scale: parse(SCALE),
            script: parse(SCRIPT),
        }
    }

    /// Loads `placement.json`, `scale.json` and `script.json` from `dir`,
    /// falling back to the built-in template for any missing file.
    pub fn load_dir(dir: &Path) -> Result<Self, String> {
        let builtin = Self::builtin();
        let load = |name: &str, fallback: PromptTemplate| -> Result<PromptTemplate, String> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(text) => serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display())),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(fallback),
                Err(e) => Err(format!("{}: {e}", path.display())),
            }
        };
        Ok(Self {
            placement: load("placement.json", builtin.placement)?,
            scale: load("scale.json", builtin.scale)?,
            script: load("script.json", builtin.script)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_render() {
        let p = Prompts::builtin();
        let r = p
            .scale
            .render(ResponseSchema::ScaleFactor, &[("object_label", "mug"), ("object_extent", "[1, 2, 3]")]);
        assert!(r.user_message.starts_with("Object label: mug\nObject extent (m): [1, 2, 3]\n"));
        assert!(!r.user_message.contains("{{"));
        assert_eq!(p.placement.few_shot.len(), 2);
    }

    #[test]
    fn directory_overrides_one_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("scale.json"),
            r#"{"version": "2", "system": "s", "user": "size of {{object_label}}?"}"#,
        )
        .unwrap();
        let p = Prompts::load_dir(dir.path()).unwrap();
        assert_eq!(p.scale.version, "2");
        assert_eq!(p.placement, Prompts::builtin().placement);
        std::fs::write(dir.path().join("script.json"), "{").unwrap();
        assert!(Prompts::load_dir(dir.path()).is_err());
    }
}
