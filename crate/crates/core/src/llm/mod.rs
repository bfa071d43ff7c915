//! Conversational-model access: request type, backends (deterministic mock,
//! HTTP chat endpoint), JSON-lines transcripts, prompt templates and the
//! three structured queries the insertion pipeline makes.

mod http;
mod mock;
mod prompts;
mod query;

use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::HttpBackend;
pub use mock::{MockBackend, MockRules};
pub use prompts::{PromptTemplate, Prompts};
pub use query::{
    query_placement, query_scale, query_script, PlacementAnswer, ScaleAnswer, ScriptContext, MAX_REPROMPTS,
    SCALE_RANGE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSchema {
    PlacementTarget,
    ScaleFactor,
    InsertionScript,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub system_instruction: String,
    pub few_shot: Vec<(String, String)>,
    pub user_message: String,
    pub response_schema: ResponseSchema,
}

impl LlmRequest {
    /// Hex SHA-256 of the request's JSON form; the mock's fixture key.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("request serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("mock has no answer: {0}")]
    Mock(String),
    #[error("invalid request: {0}")]
    Request(String),
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid answer after {attempts} attempts: {reason}")]
    InvalidAnswer {
        attempts: usize,
        reason: String,
        last_answer: String,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub trait LlmBackend: Send {
    fn complete(&mut self, request: &LlmRequest) -> Result<String, BackendError>;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_hash: String,
    pub request: LlmRequest,
    /// The model text, or `null` when the backend failed.
    pub response: Option<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
}

/// A backend plus the prompts used with it and the record of every exchange.
pub struct LlmSession {
    backend: Box<dyn LlmBackend>,
    prompts: Prompts,
    transcript: Vec<TranscriptEntry>,
    sink: Option<PathBuf>,
}

impl LlmSession {
    pub fn new(backend: Box<dyn LlmBackend>, prompts: Prompts) -> Self {
        Self {
            backend,
            prompts,
            transcript: Vec::new(),
            sink: None,
        }
    }

    /// Also append every exchange to `path` as JSON lines.
    pub fn with_transcript_file(mut self, path: PathBuf) -> Self {
        self.sink = Some(path);
        self
    }

    pub fn prompts(&self) -> &Prompts {
        &self.prompts
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn complete(&mut self, request: &LlmRequest) -> Result<String, BackendError> {
        let result = self.backend.complete(request);
        let entry = TranscriptEntry {
            request_hash: request.hash(),
            request: request.clone(),
            response: result.as_ref().ok().cloned(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64()),
        };
        if let Some(path) = &self.sink {
            let line = serde_json::to_string(&entry).expect("entry serializes");
            let written = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| writeln!(f, "{line}"));
            if let Err(e) = written {
                log::warn!("cannot append transcript {}: {e}", path.display());
            }
        }
        self.transcript.push(entry);
        result
    }
}

/// Parses a JSON-lines transcript.
pub fn read_transcript(text: &str) -> Result<Vec<TranscriptEntry>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(msg: &str) -> LlmRequest {
        LlmRequest {
            system_instruction: "s".into(),
            few_shot: vec![("u".into(), "a".into())],
            user_message: msg.into(),
            response_schema: ResponseSchema::ScaleFactor,
        }
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        assert_eq!(req("x").hash(), req("x").hash());
        assert_ne!(req("x").hash(), req("y").hash());
        assert_eq!(req("x").hash().len(), 64);
    }

    struct Echo;
    impl LlmBackend for Echo {
        fn complete(&mut self, r: &LlmRequest) -> Result<String, BackendError> {
            Ok(r.user_message.clone())
        }
        fn name(&self) -> &str {
            "echo"
        }
    }

    #[test]
    fn transcript_round_trips_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let mut s = LlmSession::new(Box::new(Echo), Prompts::builtin()).with_transcript_file(path.clone());
        s.complete(&req("one")).unwrap();
        s.complete(&req("two")).unwrap();
        let back = read_transcript(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, s.transcript());
        assert_eq!(back[1].response.as_deref(), Some("two"));
        assert_eq!(back[0].request_hash, req("one").hash());
    }
}
