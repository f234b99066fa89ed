use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GenerationRequest, LlmBackend, LlmError, QueryMeter};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "PROMISE_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Endpoint root; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub system_prompt: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            timeout_secs: 120,
            retries: 3,
            backoff_ms: 500,
            system_prompt: None,
        }
    }
}

/// Chat-completions client.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    meter: QueryMeter,
}

enum Failure {
    /// Worth retrying.
    Transient(String),
    /// The server refused the request as posed.
    Rejected(u16, String),
}

impl HttpBackend {
    pub fn new(config: HttpConfig, cap: Option<u64>) -> Self {
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_key(config, api_key, cap)
    }

    pub fn with_key(config: HttpConfig, api_key: Option<String>, cap: Option<u64>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .new_agent();
        Self { config, api_key, agent, meter: QueryMeter::new(cap) }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn body(&self, req: &GenerationRequest, n: usize) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &self.config.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": req.prompt}));
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "n": n,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn post_once(&self, body: &Value) -> Result<Vec<String>, Failure> {
        let mut request = self.agent.post(&self.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| Failure::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("status {status}")));
        }
        if status >= 400 {
            return Err(Failure::Rejected(status, text));
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Transient(e.to_string()))?;
        let choices = value["choices"]
            .as_array()
            .ok_or_else(|| Failure::Transient("response without choices".into()))?;
        Ok(choices
            .iter()
            .filter_map(|c| c["message"]["content"].as_str().or_else(|| c["text"].as_str()))
            .map(str::to_string)
            .collect())
    }

    fn post(&self, body: &Value) -> Result<Vec<String>, Failure> {
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            match self.post_once(body) {
                Ok(texts) => return Ok(texts),
                Err(Failure::Transient(msg)) => {
                    log::warn!("generation attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
                Err(rejected) => return Err(rejected),
            }
        }
        Err(Failure::Transient(last))
    }
}

impl LlmBackend for HttpBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, LlmError> {
        self.meter.charge()?;
        let n = req.n.max(1);
        match self.post(&self.body(req, n)) {
            Ok(mut texts) => {
                texts.truncate(n);
                Ok(texts)
            }
            Err(Failure::Rejected(status, _)) if n > 1 => {
                log::info!("server refused n={n} (status {status}); sampling sequentially");
                let single = self.body(req, 1);
                let mut texts = Vec::new();
                for _ in 0..n {
                    match self.post(&single) {
                        Ok(t) => texts.extend(t.into_iter().take(1)),
                        Err(Failure::Transient(msg)) | Err(Failure::Rejected(_, msg)) => {
                            return Err(LlmError::BackendUnavailable(msg))
                        }
                    }
                }
                Ok(texts)
            }
            Err(Failure::Transient(msg)) | Err(Failure::Rejected(_, msg)) => Err(LlmError::BackendUnavailable(msg)),
        }
    }

    fn queries(&self) -> u64 {
        self.meter.used()
    }
}
