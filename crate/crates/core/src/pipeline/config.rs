//! One declarative TOML file drives every command. Each section has full
//! defaults, so the empty config is valid and runs against the seeded mock.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::ClientConfig;
use crate::curate::CurationOptions;
use crate::model::external::EndpointConfig;
use crate::model::{FeaturizerConfig, TrainConfig};
use crate::prompt::{GenerationVariant, PREDICTOR_SHOT_COUNTS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("could not parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Which entry of `providers` to talk to.
    pub provider: String,
    pub providers: BTreeMap<String, ProviderConfig>,
    pub client: ClientSettings,
    pub generation: GenerationSettings,
    pub curation: CurationOptions,
    pub train: TrainConfig,
    pub features: FeaturizerConfig,
    pub datasets: DatasetPaths,
    pub eval: EvalSettings,
    /// External predictor endpoint, required only for `eval.predictor = "external"`.
    pub external: Option<EndpointConfig>,
    pub output: OutputSettings,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            provider: "mock".into(),
            providers: BTreeMap::new(),
            client: ClientSettings::default(),
            generation: GenerationSettings::default(),
            curation: CurationOptions::default(),
            train: TrainConfig::default(),
            features: FeaturizerConfig::default(),
            datasets: DatasetPaths::default(),
            eval: EvalSettings::default(),
            external: None,
            output: OutputSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderConfig {
    /// Offline provider. With a script it plays the scripted turns; without
    /// one it answers with a deterministic digest of each request.
    Mock {
        #[serde(default)]
        script: Option<PathBuf>,
        #[serde(default = "default_mock_model")]
        model: String,
    },
    Http {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_http_timeout_secs")]
        timeout_secs: u64,
    },
}

impl ProviderConfig {
    pub fn model_name(&self) -> &str {
        match self {
            ProviderConfig::Mock { model, .. } => model,
            ProviderConfig::Http { model, .. } => model,
        }
    }
}

fn default_mock_model() -> String {
    "mock-model".into()
}

fn default_http_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientSettings {
    pub parallelism: usize,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for ClientSettings {
    fn default() -> ClientSettings {
        ClientSettings {
            parallelism: 4,
            max_retries: 4,
            backoff_base_ms: 250,
            backoff_cap_ms: 10_000,
        }
    }
}

impl ClientSettings {
    pub fn to_client_config(&self) -> ClientConfig {
        ClientConfig {
            max_retries: self.max_retries,
            parallelism: self.parallelism,
            backoff_base: Duration::from_millis(self.backoff_base_ms),
            backoff_cap: Duration::from_millis(self.backoff_cap_ms),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub variant: GenerationVariant,
    /// Unique labeled items to end up with after filtering and labeling.
    pub target_count: usize,
    /// Records requested per completion call.
    pub batch_size: usize,
    pub temperature: f64,
    /// Hard cap on completion calls per generation stream.
    pub call_budget: usize,
    pub seed: u64,
    pub max_output_tokens: u32,
}

impl Default for GenerationSettings {
    fn default() -> GenerationSettings {
        GenerationSettings {
            variant: GenerationVariant::PairSpecificFirst,
            target_count: 5_000,
            batch_size: 10,
            temperature: 1.0,
            call_budget: 1_000,
            seed: 0,
            max_output_tokens: 2_048,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Classifier,
    External,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalDataset {
    Clariq,
    Ambignq,
    Labeled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub predictor: PredictorKind,
    pub dataset: EvalDataset,
    /// Demonstration examples for the LLM predictor: 0, 2, 4, or 6.
    pub shots: usize,
    pub seed: u64,
    /// Also run the latency benchmark after scoring.
    pub latency: bool,
    pub warmup: usize,
}

impl Default for EvalSettings {
    fn default() -> EvalSettings {
        EvalSettings {
            predictor: PredictorKind::Classifier,
            dataset: EvalDataset::Clariq,
            shots: 0,
            seed: 0,
            latency: false,
            warmup: 10,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetPaths {
    /// ClariQ TSV splits, concatenated in order.
    pub clariq: Vec<PathBuf>,
    pub ambignq_dev: Option<PathBuf>,
    /// Source of few-shot demonstrations for the LLM predictor.
    pub ambignq_train: Option<PathBuf>,
    /// A persisted training-set file used as a labeled eval set.
    pub labeled: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: PathBuf,
}

impl Default for OutputSettings {
    fn default() -> OutputSettings {
        OutputSettings { dir: "out".into() }
    }
}

/// Command-line overrides applied on top of the loaded file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub provider: Option<String>,
    pub mock_script: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: PipelineConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |message: String| Err(ConfigError::Invalid(message));
        if self.client.parallelism == 0 {
            return invalid("client.parallelism must be at least 1".into());
        }
        let generation = &self.generation;
        if generation.batch_size == 0 {
            return invalid("generation.batch_size must be positive".into());
        }
        if generation.max_output_tokens == 0 {
            return invalid("generation.max_output_tokens must be positive".into());
        }
        if !generation.temperature.is_finite() || !(0.0..=2.0).contains(&generation.temperature) {
            return invalid(format!(
                "generation.temperature {} must lie in [0, 2]",
                generation.temperature
            ));
        }
        if generation.variant.is_pair() && generation.target_count % 2 == 1 {
            return invalid(format!(
                "generation.target_count {} must be even: variant {} emits label pairs",
                generation.target_count, generation.variant
            ));
        }
        if !PREDICTOR_SHOT_COUNTS.contains(&self.eval.shots) {
            return invalid(format!(
                "eval.shots {} must be one of {PREDICTOR_SHOT_COUNTS:?}",
                self.eval.shots
            ));
        }
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.features
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Sets the seed everywhere a stage reads one, plus the other flag
    /// overrides. `mock_script` turns the active provider into a scripted
    /// mock, keeping its configured model label if it already was one.
    pub fn apply_overrides(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.generation.seed = seed;
            self.train.seed = seed;
            self.eval.seed = seed;
        }
        if let Some(dir) = &overrides.out_dir {
            self.output.dir = dir.clone();
        }
        if let Some(provider) = &overrides.provider {
            self.provider = provider.clone();
        }
        if let Some(script) = &overrides.mock_script {
            let model = match self.providers.get(&self.provider) {
                Some(ProviderConfig::Mock { model, .. }) => model.clone(),
                _ => default_mock_model(),
            };
            self.providers.insert(
                self.provider.clone(),
                ProviderConfig::Mock {
                    script: Some(script.clone()),
                    model,
                },
            );
        }
    }

    /// The configured provider entry. The id "mock" works without any
    /// `[providers]` section and falls back to the seeded mock.
    pub fn active_provider(&self) -> Result<ProviderConfig, ConfigError> {
        if let Some(found) = self.providers.get(&self.provider) {
            return Ok(found.clone());
        }
        if self.provider == "mock" {
            return Ok(ProviderConfig::Mock {
                script: None,
                model: default_mock_model(),
            });
        }
        Err(ConfigError::Invalid(format!(
            "provider {:?} is not configured",
            self.provider
        )))
    }

    pub fn records_path(&self) -> PathBuf {
        self.output.dir.join("records.jsonl")
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.output.dir.join("corpus.jsonl")
    }

    pub fn model_path(&self) -> PathBuf {
        self.output.dir.join("model.json")
    }

    pub fn manifest_path(&self, command: &str) -> PathBuf {
        self.output.dir.join(format!("{command}_manifest.json"))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.output.dir.join(format!("{name}.json"))
    }
}
