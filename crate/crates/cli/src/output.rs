use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

pub const EXIT_REJECTED: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

/// A failed run: exit code plus what goes to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    pub stage: Option<String>,
    pub details: Option<serde_json::Value>,
}

impl Failure {
    pub fn error(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_ERROR,
            kind,
            message: message.into(),
            stage: None,
            details: None,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::error("input", message)
    }

    pub fn report(&self, json_errors: bool) {
        if json_errors {
            let mut v = json!({"error": self.kind, "exit_code": self.code, "message": self.message});
            if let Some(s) = &self.stage {
                v["stage"] = json!(s);
            }
            if let Some(d) = &self.details {
                v["details"] = d.clone();
            }
            eprintln!("{v}");
        } else {
            match &self.stage {
                Some(s) => eprintln!("error ({}, stage {s}): {}", self.kind, self.message),
                None => eprintln!("error ({}): {}", self.kind, self.message),
            }
        }
    }
}

/// Writes through a temporary file in the target directory, then renames,
/// so a reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::error("io", format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::input(format!("{what} `{}` does not exist", path.display())))
    }
}
