use std::time::Duration;

use serde_json::json;

use super::{BackendError, LlmBackend, LlmRequest};

/// Chat-completions style JSON endpoint: posts the system instruction,
/// few-shot turns and user message, reads `choices[0].message.content`.
pub struct HttpBackend {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn body(&self, r: &LlmRequest) -> serde_json::Value {
        let mut messages = vec![json!({"role": "system", "content": r.system_instruction})];
        for (u, a) in &r.few_shot {
            messages.push(json!({"role": "user", "content": u}));
            messages.push(json!({"role": "assistant", "content": a}));
        }
        messages.push(json!({"role": "user", "content": r.user_message}));
        json!({"model": self.model, "messages": messages, "temperature": 0})
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&mut self, request: &LlmRequest) -> Result<String, BackendError> {
        let mut call = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = match call.send_json(self.body(request)) {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                let body = r.into_string().unwrap_or_default();
                return Err(BackendError::Status { status, body });
            }
            Err(e) => return Err(BackendError::Transport(e.to_string())),
        };
        let v: serde_json::Value = resp
            .into_json()
            .map_err(|e| BackendError::Protocol(format!("body is not JSON: {e}")))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol("no choices[0].message.content".into()))
    }

    fn name(&self) -> &str {
        "http"
    }
}
