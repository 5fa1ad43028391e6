//! Deterministic offline provider used by tests, dry runs, and the ablation
//! harness. Responses come from a canned string, a scripted sequence loaded
//! from a JSONL file, or a seeded hash of the request.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use super::{CompletionRequest, Provider, ProviderFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptErrorKind {
    RateLimit,
    Timeout,
    Auth,
    Provider,
}

impl ScriptErrorKind {
    fn into_failure(self) -> ProviderFailure {
        match self {
            ScriptErrorKind::RateLimit => ProviderFailure::RateLimited,
            ScriptErrorKind::Timeout => ProviderFailure::Timeout,
            ScriptErrorKind::Auth => ProviderFailure::Auth,
            ScriptErrorKind::Provider => ProviderFailure::Fatal("scripted provider failure".into()),
        }
    }
}

/// One scripted turn: a response body or an injected failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    Text(String),
    Error(ScriptErrorKind),
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("could not read mock script {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("mock script {path} line {line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptLine {
    text: Option<String>,
    error: Option<ScriptErrorKind>,
}

/// Reads a script as JSON lines, each `{"text": ...}` or
/// `{"error": "rate_limit" | "timeout" | "auth" | "provider"}`.
pub fn load_script(path: &Path) -> Result<Vec<ScriptStep>, ScriptError> {
    let display = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
        path: display.clone(),
        source,
    })?;
    let mut steps = Vec::new();
    for (index, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| ScriptError::Malformed {
            path: display.clone(),
            line: index + 1,
            message,
        };
        let parsed: ScriptLine =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let step = match (parsed.text, parsed.error) {
            (Some(text), None) => ScriptStep::Text(text),
            (None, Some(kind)) => ScriptStep::Error(kind),
            _ => {
                return Err(malformed(
                    "expected exactly one of \"text\" or \"error\"".into(),
                ))
            }
        };
        steps.push(step);
    }
    Ok(steps)
}

enum Behavior {
    Canned(String),
    Script(Mutex<ScriptState>),
    Seeded,
}

struct ScriptState {
    steps: Vec<ScriptStep>,
    cursor: usize,
}

/// Instrumented test double. Counts calls, tracks peak concurrent use, and
/// remembers the last request delivered so tests can assert byte equality.
pub struct MockProvider {
    behavior: Behavior,
    delay: Option<Duration>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    call_count: AtomicUsize,
    last_request: Mutex<Option<CompletionRequest>>,
}

impl MockProvider {
    fn with_behavior(behavior: Behavior) -> MockProvider {
        MockProvider {
            behavior,
            delay: None,
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            call_count: AtomicUsize::new(0),
            last_request: Mutex::new(None),
        }
    }

    /// Always answers with the same text.
    pub fn canned(text: impl Into<String>) -> MockProvider {
        MockProvider::with_behavior(Behavior::Canned(text.into()))
    }

    /// Plays back the steps in order; calls past the end fail fatally.
    pub fn scripted(steps: Vec<ScriptStep>) -> MockProvider {
        MockProvider::with_behavior(Behavior::Script(Mutex::new(ScriptState {
            steps,
            cursor: 0,
        })))
    }

    pub fn from_script_file(path: &Path) -> Result<MockProvider, ScriptError> {
        Ok(MockProvider::scripted(load_script(path)?))
    }

    /// Answers with a deterministic digest of (model, prompt, seed).
    pub fn seeded() -> MockProvider {
        MockProvider::with_behavior(Behavior::Seeded)
    }

    /// Holds each call open for `delay`, making concurrency observable.
    pub fn with_delay(mut self, delay: Duration) -> MockProvider {
        self.delay = Some(delay);
        self
    }

    pub fn call_count(&self) -> usize {
        self.call_count.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn last_request(&self) -> Option<CompletionRequest> {
        self.last_request.lock().unwrap().clone()
    }

    pub fn last_prompt(&self) -> Option<String> {
        self.last_request().map(|request| request.prompt)
    }
}

fn seeded_text(request: &CompletionRequest) -> String {
    let mut digest: u64 = 0xcbf29ce484222325;
    let mut absorb = |bytes: &[u8]| {
        for &byte in bytes {
            digest = (digest ^ u64::from(byte)).wrapping_mul(0x100000001b3);
        }
        digest = (digest ^ 0xff).wrapping_mul(0x100000001b3);
    };
    absorb(request.model_name.as_bytes());
    absorb(request.prompt.as_bytes());
    absorb(&request.seed.unwrap_or(0).to_le_bytes());
    format!("mock:{digest:016x}")
}

impl Provider for MockProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderFailure> {
        let now_in_flight = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight
            .fetch_max(now_in_flight, Ordering::SeqCst);
        self.call_count.fetch_add(1, Ordering::SeqCst);
        *self.last_request.lock().unwrap() = Some(request.clone());

        if let Some(delay) = self.delay {
            std::thread::sleep(delay);
        }

        let result = match &self.behavior {
            Behavior::Canned(text) => Ok(text.clone()),
            Behavior::Seeded => Ok(seeded_text(request)),
            Behavior::Script(state) => {
                let mut state = state.lock().unwrap();
                let step = state.steps.get(state.cursor).cloned();
                state.cursor += 1;
                match step {
                    Some(ScriptStep::Text(text)) => Ok(text),
                    Some(ScriptStep::Error(kind)) => Err(kind.into_failure()),
                    None => Err(ProviderFailure::Fatal(format!(
                        "mock script exhausted after {} steps",
                        state.steps.len()
                    ))),
                }
            }
        };

        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(prompt: &str) -> CompletionRequest {
        CompletionRequest {
            provider_id: "mock".into(),
            model_name: "m".into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_output_tokens: 16,
            seed: None,
        }
    }

    #[test]
    fn script_plays_in_order_then_fails_fatally() {
        let provider = MockProvider::scripted(vec![
            ScriptStep::Text("first".into()),
            ScriptStep::Error(ScriptErrorKind::Timeout),
            ScriptStep::Text("third".into()),
        ]);
        assert_eq!(provider.complete(&request("a")).unwrap(), "first");
        assert_eq!(
            provider.complete(&request("b")).unwrap_err(),
            ProviderFailure::Timeout
        );
        assert_eq!(provider.complete(&request("c")).unwrap(), "third");
        match provider.complete(&request("d")).unwrap_err() {
            ProviderFailure::Fatal(message) => assert!(message.contains("exhausted")),
            other => panic!("expected Fatal, got {other:?}"),
        }
        assert_eq!(provider.call_count(), 4);
    }

    #[test]
    fn script_file_round_trips_text_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"text\": \"Topic: t, ...\"}\n",
                "\n",
                "{\"error\": \"rate_limit\"}\n",
                "{\"error\": \"auth\"}\n",
            ),
        )
        .unwrap();
        let steps = load_script(&path).unwrap();
        assert_eq!(
            steps,
            vec![
                ScriptStep::Text("Topic: t, ...".into()),
                ScriptStep::Error(ScriptErrorKind::RateLimit),
                ScriptStep::Error(ScriptErrorKind::Auth),
            ]
        );
    }

    #[test]
    fn malformed_script_lines_are_rejected_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.jsonl");
        for (body, expected_line) in [
            ("{\"text\": \"ok\"}\nnot json\n", 2),
            ("{\"text\": \"a\", \"error\": \"timeout\"}\n", 1),
            ("{}\n", 1),
            ("{\"error\": \"catastrophe\"}\n", 1),
        ] {
            std::fs::write(&path, body).unwrap();
            match load_script(&path).unwrap_err() {
                ScriptError::Malformed { line, .. } => assert_eq!(line, expected_line, "{body:?}"),
                other => panic!("expected Malformed, got {other:?}"),
            }
        }
        assert!(matches!(
            load_script(&dir.path().join("absent.jsonl")).unwrap_err(),
            ScriptError::Io { .. }
        ));
    }

    #[test]
    fn seeded_digest_depends_on_every_input_distinctly() {
        let base = seeded_text(&request("p"));
        let mut other_model = request("p");
        other_model.model_name = "n".into();
        let mut other_seed = request("p");
        other_seed.seed = Some(1);
        assert_eq!(seeded_text(&request("p")), base);
        assert_ne!(seeded_text(&other_model), base);
        assert_ne!(seeded_text(&other_seed), base);
        assert_ne!(seeded_text(&request("q")), base);
    }
}
