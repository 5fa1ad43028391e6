//! End-to-end commands: generate a corpus, train the classifier, evaluate a
//! predictor, benchmark latency, sweep training-set scales, and run the
//! prompt-variant ablation. Each command reads one [`config::PipelineConfig`]
//! and writes its outputs plus a manifest under the configured directory.

pub mod config;
mod evaluate;
mod generate;
mod train;

pub use config::{ConfigError, Overrides, PipelineConfig};
pub use evaluate::{cmd_bench, cmd_eval, EvalOutcome};
pub use generate::{
    cmd_ablate, cmd_generate, AblateOutcome, AblateRow, GenerationManifest, GenerationOutcome,
};
pub use train::{cmd_sweep, cmd_train, SweepOutcome, SweepRow, TrainOutcome};

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::client::mock::{MockProvider, ScriptError};
use crate::client::{ClientError, LlmClient};
use crate::data::DataError;
use crate::eval::MetricsError;
use crate::model::external::ExternalError;
use crate::model::ModelError;
use crate::verdict::LlmPredictError;
use config::ProviderConfig;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    External(#[from] ExternalError),
    #[error("generation budget exhausted after {calls} calls: wanted {target} labeled items, have {achieved}")]
    BudgetExhausted {
        target: usize,
        achieved: usize,
        calls: usize,
    },
    #[error("latency benchmark failed: {0}")]
    Latency(String),
    #[error("{0}")]
    Invalid(String),
}

impl From<LlmPredictError> for PipelineError {
    fn from(error: LlmPredictError) -> PipelineError {
        match error {
            LlmPredictError::Client(e) => PipelineError::Client(e),
            LlmPredictError::Prompt(e) => PipelineError::Invalid(e.to_string()),
        }
    }
}

/// Builds the client with the configured provider registered under its id,
/// returning the model label requests should carry.
pub fn build_client(config: &PipelineConfig) -> Result<(LlmClient, String), PipelineError> {
    let provider_config = config.active_provider()?;
    let model_name = provider_config.model_name().to_string();
    let mut client = LlmClient::new(config.client.to_client_config());
    match provider_config {
        ProviderConfig::Mock { script, .. } => {
            let mock = match script {
                Some(path) => MockProvider::from_script_file(&path)?,
                None => MockProvider::seeded(),
            };
            client.register(config.provider.clone(), Arc::new(mock));
        }
        #[cfg(feature = "http")]
        ProviderConfig::Http {
            endpoint,
            api_key_env,
            timeout_secs,
            ..
        } => {
            let mut http_config = crate::client::http::HttpProviderConfig::new(endpoint);
            http_config.api_key_env = api_key_env;
            http_config.timeout = std::time::Duration::from_secs(timeout_secs);
            let provider = crate::client::http::HttpProvider::new(http_config);
            client.register(config.provider.clone(), Arc::new(provider));
        }
        #[cfg(not(feature = "http"))]
        ProviderConfig::Http { .. } => {
            return Err(PipelineError::Invalid(format!(
                "provider {:?} needs HTTP support, but this build has the http feature disabled",
                config.provider
            )));
        }
    }
    Ok((client, model_name))
}

/// Writes a value as pretty-printed JSON, creating parent directories.
pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}
