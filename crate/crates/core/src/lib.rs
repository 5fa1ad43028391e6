//! Clarification-need prediction without human labels.
//!
//! The pipeline in this crate generates counterfactual specific/ambiguous
//! query pairs with an LLM, curates them into a labeled corpus, trains a
//! hashed n-gram logistic classifier on the corpus, and evaluates that
//! classifier (or LLM zero/few-shot baselines) on ClariQ- and AmbigNQ-style
//! datasets with weighted precision/recall/F1 and per-query latency.
//!
//! Module map:
//! - [`client`]: provider-agnostic chat-completion client with retries,
//!   a concurrency bound, and a scriptable offline mock.
//! - [`prompt`]: generation and predictor prompt construction.
//! - [`parse`]: tolerant parsing of raw generation output into records.
//! - [`curate`]: filtering, labeling, and corpus persistence.
//! - [`data`]: evaluation dataset loaders and few-shot sampling.
//! - [`model`]: the lightweight classifier (featurize/train/predict) and
//!   the adapter for external predictor processes.
//! - [`verdict`]: LLM yes/no predictor baselines.
//! - [`eval`]: weighted metrics and the latency harness.
//! - [`pipeline`]: end-to-end commands driven by one config file.

pub mod batch;
pub mod client;
pub mod curate;
pub mod data;
pub mod eval;
mod label;
pub mod model;
pub mod parse;
pub mod pipeline;
pub mod prompt;
pub mod verdict;

pub use label::Label;
