//! Remote provider speaking the widely used chat-completion HTTP shape:
//! POST a JSON body with `model`, `messages`, and sampling settings, read
//! the first choice's message content back.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{CompletionRequest, Provider, ProviderFailure};

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token, if the
    /// endpoint needs one.
    pub api_key_env: Option<String>,
    pub timeout: Duration,
}

impl HttpProviderConfig {
    pub fn new(endpoint: impl Into<String>) -> HttpProviderConfig {
        HttpProviderConfig {
            endpoint: endpoint.into(),
            api_key_env: None,
            timeout: Duration::from_secs(60),
        }
    }
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    http: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> HttpProvider {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .expect("blocking client builds with default settings");
        HttpProvider { config, http }
    }
}

#[derive(Deserialize)]
struct ChatCompletion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl Provider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderFailure> {
        let mut body = json!({
            "model": request.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }

        let mut call = self.http.post(&self.config.endpoint).json(&body);
        if let Some(env_name) = &self.config.api_key_env {
            let key = std::env::var(env_name).map_err(|_| ProviderFailure::Auth)?;
            call = call.bearer_auth(key);
        }

        let response = call.send().map_err(|e| {
            if e.is_timeout() {
                ProviderFailure::Timeout
            } else {
                ProviderFailure::Transient(e.to_string())
            }
        })?;

        let status = response.status();
        if !status.is_success() {
            return Err(match status.as_u16() {
                401 | 403 => ProviderFailure::Auth,
                429 => ProviderFailure::RateLimited,
                408 => ProviderFailure::Timeout,
                500..=599 => ProviderFailure::Transient(format!("upstream status {status}")),
                _ => ProviderFailure::Fatal(format!("upstream status {status}")),
            });
        }

        let completion: ChatCompletion = response
            .json()
            .map_err(|e| ProviderFailure::Fatal(format!("malformed completion payload: {e}")))?;
        completion
            .choices
            .into_iter()
            .next()
            .map(|choice| choice.message.content)
            .ok_or_else(|| ProviderFailure::Fatal("completion had no choices".into()))
    }
}
