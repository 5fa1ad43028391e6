//! Provider-agnostic chat-completion client.
//!
//! A [`LlmClient`] holds a registry of named providers and funnels every call
//! through one code path: validate the request, bound in-flight concurrency,
//! retry transient failures with jittered exponential backoff, and report how
//! many attempts the call took.

#[cfg(feature = "http")]
pub mod http;
pub mod mock;

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use thiserror::Error;

/// One chat-completion call. The prompt is delivered to the provider byte for
/// byte; the client never rewrites it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub provider_id: String,
    pub model_name: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct CompletionResponse {
    pub text: String,
    pub provider_latency: Duration,
    /// Total attempts made, counting the successful one.
    pub attempt_count: u32,
}

/// What a single provider call can report back. The client decides which of
/// these are worth retrying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderFailure {
    RateLimited,
    Timeout,
    Auth,
    Transient(String),
    Fatal(String),
}

impl ProviderFailure {
    fn retryable(&self) -> bool {
        matches!(
            self,
            ProviderFailure::RateLimited | ProviderFailure::Timeout | ProviderFailure::Transient(_)
        )
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("provider {provider_id} rejected the configured credentials")]
    AuthError { provider_id: String },
    #[error("provider kept throttling; gave up after {attempts} attempts")]
    RateLimitExhausted { attempts: u32 },
    #[error("provider kept timing out; gave up after {attempts} attempts")]
    TimeoutError { attempts: u32 },
    #[error("provider failure: {message}")]
    ProviderError { message: String },
    #[error("no provider registered under id {provider_id:?}")]
    UnknownProvider { provider_id: String },
    #[error("invalid request: {message}")]
    InvalidRequest { message: String },
}

/// A single upstream model endpoint. Implementations must be safe to call
/// from several threads at once.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderFailure>;
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// Retries after the first attempt, so at most `max_retries + 1` calls.
    pub max_retries: u32,
    /// Upper bound on simultaneous in-flight requests.
    pub parallelism: usize,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
}

impl Default for ClientConfig {
    fn default() -> ClientConfig {
        ClientConfig {
            max_retries: 4,
            parallelism: 4,
            backoff_base: Duration::from_millis(250),
            backoff_cap: Duration::from_secs(10),
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(slots: usize) -> Semaphore {
        Semaphore {
            free: Mutex::new(slots),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.freed.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

pub struct LlmClient {
    providers: HashMap<String, Arc<dyn Provider>>,
    config: ClientConfig,
    slots: Semaphore,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut ids: Vec<&String> = self.providers.keys().collect();
        ids.sort();
        f.debug_struct("LlmClient")
            .field("providers", &ids)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl LlmClient {
    pub fn new(config: ClientConfig) -> LlmClient {
        assert!(config.parallelism >= 1, "parallelism must be at least 1");
        LlmClient {
            providers: HashMap::new(),
            slots: Semaphore::new(config.parallelism),
            config,
        }
    }

    pub fn register(&mut self, provider_id: impl Into<String>, provider: Arc<dyn Provider>) {
        self.providers.insert(provider_id.into(), provider);
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ClientError> {
        validate(request)?;
        let provider = self.providers.get(&request.provider_id).ok_or_else(|| {
            ClientError::UnknownProvider {
                provider_id: request.provider_id.clone(),
            }
        })?;
        let _permit = self.slots.acquire();
        let max_attempts = self.config.max_retries + 1;
        for attempt in 1..=max_attempts {
            let started = Instant::now();
            let failure = match provider.complete(request) {
                Ok(text) => {
                    return Ok(CompletionResponse {
                        text,
                        provider_latency: started.elapsed(),
                        attempt_count: attempt,
                    })
                }
                Err(failure) => failure,
            };
            if !failure.retryable() || attempt == max_attempts {
                return Err(finalize(failure, request, attempt));
            }
            self.sleep_before_retry(attempt);
        }
        unreachable!("retry loop always returns");
    }

    fn sleep_before_retry(&self, finished_attempt: u32) {
        let doublings = finished_attempt.saturating_sub(1).min(16);
        let ceiling = self
            .config
            .backoff_base
            .saturating_mul(1 << doublings)
            .min(self.config.backoff_cap);
        if ceiling.is_zero() {
            return;
        }
        std::thread::sleep(ceiling.mul_f64(rand::thread_rng().gen_range(0.0..=1.0)));
    }
}

fn validate(request: &CompletionRequest) -> Result<(), ClientError> {
    let problem = if request.prompt.is_empty() {
        "prompt is empty"
    } else if !request.temperature.is_finite() || !(0.0..=2.0).contains(&request.temperature) {
        "temperature must lie in [0, 2]"
    } else if request.max_output_tokens == 0 {
        "max_output_tokens must be positive"
    } else {
        return Ok(());
    };
    Err(ClientError::InvalidRequest {
        message: problem.to_string(),
    })
}

fn finalize(failure: ProviderFailure, request: &CompletionRequest, attempts: u32) -> ClientError {
    match failure {
        ProviderFailure::Auth => ClientError::AuthError {
            provider_id: request.provider_id.clone(),
        },
        ProviderFailure::Fatal(message) => ClientError::ProviderError { message },
        ProviderFailure::RateLimited => ClientError::RateLimitExhausted { attempts },
        ProviderFailure::Timeout => ClientError::TimeoutError { attempts },
        ProviderFailure::Transient(message) => ClientError::ProviderError {
            message: format!("still failing after {attempts} attempts: {message}"),
        },
    }
}
