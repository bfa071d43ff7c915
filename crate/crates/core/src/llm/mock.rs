//! Deterministic stand-in for a model: a pure function of the request.
//!
//! A canned response keyed by request hash wins when present. Otherwise a
//! small rule table answers from the structured parts of the user message
//! (object label, descriptive USD block, extent line, JSON context block),
//! which the built-in prompt templates lay out.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use super::{BackendError, LlmBackend, LlmRequest, ResponseSchema};
use crate::usd::{format_real, parse_usda, Value};

const BUILTIN_RULES: &str = include_str!("../../data/mock_rules.json");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementRule {
    #[serde(default)]
    pub labels: Vec<String>,
    /// Fixed answer regardless of the scene.
    #[serde(default)]
    pub target: Option<String>,
    pub surface: String,
    #[serde(default)]
    pub pick: Pick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pick {
    #[default]
    First,
    Last,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleRule {
    /// Typical largest dimension in meters.
    #[serde(default)]
    pub size: Option<f64>,
    /// Fixed answer regardless of the extent.
    #[serde(default)]
    pub fixed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRules {
    pub version: String,
    pub placement: BTreeMap<String, PlacementRule>,
    pub placement_default: PlacementRule,
    pub scale: BTreeMap<String, ScaleRule>,
    pub scale_default: ScaleRule,
    /// An extent within this factor of the typical size counts as plausible.
    pub plausible_factor: f64,
    pub script: Vec<String>,
}

impl MockRules {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_RULES).expect("built-in mock rules are valid")
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    rules: MockRules,
    canned: HashMap<String, String>,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new(MockRules::builtin())
    }
}

impl MockBackend {
    pub fn new(rules: MockRules) -> Self {
        Self {
            rules,
            canned: HashMap::new(),
        }
    }

    pub fn with_canned(mut self, request_hash: impl Into<String>, response: impl Into<String>) -> Self {
        self.canned.insert(request_hash.into(), response.into());
        self
    }

    /// Adds every `<hash>.txt` file in `dir` as a canned response.
    pub fn with_responses_dir(mut self, dir: &Path) -> Result<Self, String> {
        let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths {
            if p.extension().is_some_and(|e| e == "txt") {
                let hash = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                self.canned.insert(hash, text);
            }
        }
        Ok(self)
    }

    fn answer(&self, r: &LlmRequest) -> Result<String, BackendError> {
        let msg = &r.user_message;
        match r.response_schema {
            ResponseSchema::PlacementTarget => {
                let label = labelled_line(msg, "Object label:").ok_or_else(|| missing("object label"))?;
                let rule = self.rules.placement.get(label).unwrap_or(&self.rules.placement_default);
                let target = match &rule.target {
                    Some(t) => t.clone(),
                    None => {
                        let usda = fenced(msg, "```usda\n").ok_or_else(|| missing("usda block"))?;
                        let doc = parse_usda(usda).map_err(|e| BackendError::Mock(format!("scene: {e}")))?;
                        let hits: Vec<String> = doc
                            .all_prims()
                            .into_iter()
                            .filter(|(_, p)| {
                                matches!(p.attr("label"), Some(Value::Text(l)) if rule.labels.contains(l))
                            })
                            .map(|(_, p)| p.name.clone())
                            .collect();
                        let pick = match rule.pick {
                            Pick::First => hits.first(),
                            Pick::Last => hits.last(),
                        };
                        pick.cloned().unwrap_or_default()
                    }
                };
                Ok(serde_json::json!({"target_id": target, "surface": rule.surface}).to_string())
            }
            ResponseSchema::ScaleFactor => {
                let label = labelled_line(msg, "Object label:").ok_or_else(|| missing("object label"))?;
                let extent: Vec<f64> = labelled_line(msg, "Object extent (m):")
                    .and_then(|e| serde_json::from_str(e).ok())
                    .ok_or_else(|| missing("object extent"))?;
                let rule = self.rules.scale.get(label).unwrap_or(&self.rules.scale_default);
                let scale = match (rule.fixed, rule.size) {
                    (Some(f), _) => f,
                    (None, Some(size)) => {
                        let largest = extent.iter().copied().fold(0.0, f64::max);
                        let f = self.rules.plausible_factor;
                        if largest >= size / f && largest <= size * f {
                            1.0
                        } else {
                            size / largest
                        }
                    }
                    (None, None) => 1.0,
                };
                Ok(serde_json::json!({ "scale": scale }).to_string())
            }
            ResponseSchema::InsertionScript => {
                let ctx = fenced(msg, "```json\n").ok_or_else(|| missing("json context"))?;
                let ctx: serde_json::Value =
                    serde_json::from_str(ctx).map_err(|e| BackendError::Mock(format!("context: {e}")))?;
                let text_field = |k: &str| ctx[k].as_str().map(escape).ok_or_else(|| missing(k));
                let num = |v: &serde_json::Value| v.as_f64().map(format_real).ok_or_else(|| missing("number"));
                let pos = ctx["position"].as_array().filter(|a| a.len() == 3).ok_or_else(|| missing("position"))?;
                let vars = [
                    ("{prim_path}", text_field("prim_path")?),
                    ("{object_path}", text_field("object_path")?),
                    ("{object_label}", text_field("object_label")?),
                    ("{x}", num(&pos[0])?),
                    ("{y}", num(&pos[1])?),
                    ("{z}", num(&pos[2])?),
                    ("{scale}", num(&ctx["scale"])?),
                ];
                let mut out = String::new();
                for line in &self.rules.script {
                    let mut l = line.clone();
                    for (k, v) in &vars {
                        l = l.replace(k, v);
                    }
                    out.push_str(&l);
                    out.push('\n');
                }
                Ok(out)
            }
        }
    }
}

impl LlmBackend for MockBackend {
    fn complete(&mut self, request: &LlmRequest) -> Result<String, BackendError> {
        if let Some(text) = self.canned.get(&request.hash()) {
            return Ok(text.clone());
        }
        self.answer(request)
    }

    fn name(&self) -> &str {
        "mock"
    }
}

fn missing(what: &str) -> BackendError {
    BackendError::Mock(format!("request has no {what}"))
}

fn labelled_line<'a>(msg: &'a str, prefix: &str) -> Option<&'a str> {
    msg.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

fn fenced<'a>(msg: &'a str, open: &str) -> Option<&'a str> {
    let start = msg.find(open)? + open.len();
    let len = msg[start..].find("```")?;
    Some(&msg[start..start + len])
}

fn escape(s: &str) -> String {
    let q = crate::usd::quote_string(s);
    q[1..q.len() - 1].to_string()
}
