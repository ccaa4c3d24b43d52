use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Agent, AgentError, Reply, Request};
use crate::types::ModelId;

const BODY_EXCERPT: usize = 200;

fn default_temperature() -> f64 {
    1.0
}

fn default_max_retries() -> u32 {
    3
}

fn default_timeout_secs() -> u64 {
    300
}

fn default_backoff_ms() -> u64 {
    1000
}

/// Connection settings for a chat-completion endpoint. The key itself is
/// never stored: only the name of the variable that holds it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub model_name: String,
    /// Full URL of the completion route.
    pub base_url: String,
    pub auth_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Initial retry delay, doubled on each further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

pub struct EndpointAgent {
    name: ModelId,
    config: EndpointConfig,
    http: ureq::Agent,
}

impl EndpointAgent {
    pub fn new(name: ModelId, config: EndpointConfig) -> Self {
        let http = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        EndpointAgent { name, config, http }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// One user message in, the first choice's content out. Retries 429,
    /// 5xx and transport failures with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String, AgentError> {
        let key = std::env::var(&self.config.auth_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| {
                AgentError::Config(format!(
                    "environment variable {} holding the key for {} is not set",
                    self.config.auth_env, self.name
                ))
            })?;
        let body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        let bearer = format!("Bearer {key}");
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            let sent = self
                .http
                .post(&self.config.base_url)
                .header("Authorization", &bearer)
                .send_json(&body);
            let mut resp = match sent {
                Ok(resp) => resp,
                Err(e) => {
                    tracing::warn!(model = %self.name, attempt, error = %e, "transport failure");
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let request_id = resp
                .headers()
                .get("x-request-id")
                .and_then(|v| v.to_str().ok())
                .unwrap_or("")
                .to_string();
            let text = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| AgentError::Protocol(format!("unreadable body: {e}")));
            if (200..300).contains(&status) {
                let text = text?;
                let value: Value =
                    serde_json::from_str(&text).map_err(|e| AgentError::Protocol(format!("body is not JSON: {e}")))?;
                let content = value["choices"][0]["message"]["content"]
                    .as_str()
                    .ok_or_else(|| AgentError::Protocol("no choices[0].message.content".into()))?;
                tracing::info!(
                    model = %self.name,
                    temperature = self.config.temperature,
                    retries = attempt,
                    request_id = %request_id,
                    response_id = value["id"].as_str().unwrap_or(""),
                    "completion received"
                );
                return Ok(content.to_string());
            }
            if status == 429 || status >= 500 {
                tracing::warn!(model = %self.name, attempt, status, request_id = %request_id, "retryable status");
                last = format!("HTTP {status}");
                continue;
            }
            let body: String = text.unwrap_or_default().chars().take(BODY_EXCERPT).collect();
            return Err(AgentError::Endpoint { status, body });
        }
        Err(AgentError::Transport {
            attempts: self.config.max_retries + 1,
            message: last,
        })
    }
}

impl Agent for EndpointAgent {
    fn name(&self) -> &ModelId {
        &self.name
    }

    fn respond(&self, request: &Request) -> Result<Reply, AgentError> {
        self.complete(&request.prompt).map(Reply::text)
    }
}
