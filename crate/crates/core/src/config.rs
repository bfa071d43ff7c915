//! Run configuration, read from a TOML file. Every key is optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub backend: BackendKind,
    /// Directory of prompt templates overriding the built-in ones.
    pub prompts_dir: Option<PathBuf>,
    /// JSON-lines file every LLM exchange is appended to.
    pub transcript: Option<PathBuf>,
    pub http: HttpConfig,
    pub mock: MockConfig,
    pub guard: GuardConfig,
    pub insertion: InsertionConfig,
    pub ransac: RansacConfig,
    pub simprep: SimprepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: "SCANSTAGE_API_KEY".into(),
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    /// Rules file replacing the built-in mock rules.
    pub rules: Option<PathBuf>,
    /// Directory of `<request-hash>.txt` canned responses, consulted first.
    pub responses_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardConfig {
    pub module: String,
    pub allowlist: Vec<String>,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            module: "usd_core".into(),
            allowlist: ["define_prim", "add_reference", "set_translate", "set_scale", "set_attribute"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsertionConfig {
    pub max_attempts: usize,
    pub margin: f64,
}

impl Default for InsertionConfig {
    fn default() -> Self {
        Self {
            max_attempts: 100,
            margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub dist_thresh: f64,
    pub iters: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            dist_thresh: 0.01,
            iters: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimprepConfig {
    pub structural_labels: Vec<String>,
    pub structural_ratio: f64,
    pub static_ratio: f64,
    pub concavity_thresh: f64,
    pub max_pieces: usize,
    pub max_depth: usize,
    pub weld_eps: f64,
}

impl Default for SimprepConfig {
    fn default() -> Self {
        Self {
            structural_labels: ["wall", "floor", "ceiling"].map(String::from).to_vec(),
            structural_ratio: 0.10,
            static_ratio: 0.30,
            concavity_thresh: 0.02,
            max_pieces: 64,
            max_depth: 8,
            weld_eps: 1e-6,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.prompts_dir,
            &mut cfg.transcript,
            &mut cfg.mock.rules,
            &mut cfg.mock.responses_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let ratio = |name: &str, r: f64| {
            if r > 0.0 && r <= 1.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be in (0, 1], got {r}")))
            }
        };
        ratio("simprep.structural_ratio", self.simprep.structural_ratio)?;
        ratio("simprep.static_ratio", self.simprep.static_ratio)?;
        if self.insertion.max_attempts == 0 {
            return Err(ConfigError::Invalid("insertion.max_attempts must be at least 1".into()));
        }
        if !(self.insertion.margin >= 0.0) || !(self.simprep.weld_eps >= 0.0) {
            return Err(ConfigError::Invalid("margins must be non-negative".into()));
        }
        if !(self.ransac.dist_thresh > 0.0) || self.ransac.iters == 0 {
            return Err(ConfigError::Invalid("ransac.dist_thresh and ransac.iters must be positive".into()));
        }
        if !(self.simprep.concavity_thresh > 0.0) || self.simprep.max_pieces == 0 {
            return Err(ConfigError::Invalid(
                "simprep.concavity_thresh and simprep.max_pieces must be positive".into(),
            ));
        }
        if self.backend == BackendKind::Http && (self.http.endpoint.is_empty() || self.http.model.is_empty()) {
            return Err(ConfigError::Invalid("http backend needs http.endpoint and http.model".into()));
        }
        Ok(())
    }
}
