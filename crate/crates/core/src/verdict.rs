//! LLM baseline predictor: prompt a chat model per query and parse its
//! yes/no verdict into a clarification-need label.

use thiserror::Error;

use crate::client::{ClientError, CompletionRequest, LlmClient};
use crate::model::Prediction;
use crate::prompt::{build_predictor_prompt, PromptError};
use crate::Label;

const VERDICT_MAX_TOKENS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Answered(Label),
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictParseResult {
    pub verdict: Verdict,
    pub raw_text: String,
}

impl VerdictParseResult {
    pub fn is_unparseable(&self) -> bool {
        self.verdict == Verdict::Unparseable
    }
}

/// Reads a model response as "yes" (ambiguous) or "no" (specific). The match
/// ignores case and leading punctuation and requires a word boundary, so
/// "**Yes**, because..." counts but "Note:" does not. Anything else is
/// Unparseable.
pub fn parse_verdict(raw_text: &str) -> VerdictParseResult {
    let content = raw_text.trim_start_matches(|c: char| !c.is_alphanumeric());
    let lowered = content.to_lowercase();
    let verdict = if leading_word(&lowered, "yes") {
        Verdict::Answered(Label::Ambiguous)
    } else if leading_word(&lowered, "no") {
        Verdict::Answered(Label::Specific)
    } else {
        Verdict::Unparseable
    };
    VerdictParseResult {
        verdict,
        raw_text: raw_text.to_string(),
    }
}

fn leading_word(text: &str, word: &str) -> bool {
    match text.strip_prefix(word) {
        Some(rest) => rest.chars().next().is_none_or(|c| !c.is_alphanumeric()),
        None => false,
    }
}

#[derive(Debug, Error)]
pub enum LlmPredictError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Client(#[from] ClientError),
}

/// Asks the model whether `query` needs clarification. Temperature is pinned
/// to 0 so repeated runs are deterministic. An unparseable verdict falls back
/// to "no clarification needed"; callers count those via the parse result.
pub fn predict_llm(
    query: &str,
    demonstrations: &[(String, Label)],
    client: &LlmClient,
    provider_id: &str,
    model_name: &str,
) -> Result<(Prediction, VerdictParseResult), LlmPredictError> {
    let prompt = build_predictor_prompt(query, demonstrations)?;
    let response = client.complete(&CompletionRequest {
        provider_id: provider_id.to_string(),
        model_name: model_name.to_string(),
        prompt: prompt.text,
        temperature: 0.0,
        max_output_tokens: VERDICT_MAX_TOKENS,
        seed: None,
    })?;
    let parsed = parse_verdict(&response.text);
    let probability_ambiguous = match parsed.verdict {
        Verdict::Answered(Label::Ambiguous) => 1.0,
        Verdict::Answered(Label::Specific) | Verdict::Unparseable => 0.0,
    };
    Ok((Prediction::from_probability(probability_ambiguous), parsed))
}
