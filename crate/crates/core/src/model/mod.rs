//! The built-in clarification-need classifier: hashed n-gram features with a
//! logistic output, trained by seeded minibatch gradient descent. Also hosts
//! the adapter for serving predictions from an external process.

pub mod external;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch;
use crate::curate::TrainingSet;
use crate::Label;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Sorted (index, value) pairs; absent indices are zero.
pub type SparseVector = Vec<(u32, f64)>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file {path}: {message}")]
    Version { path: PathBuf, message: String },
    #[error("training data is degenerate: {0}")]
    DegenerateData(String),
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn io_error(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn version_error(path: &Path, message: impl Into<String>) -> ModelError {
    ModelError::Version {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Feature extraction settings. Word and char n-gram ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizerConfig {
    pub word_ngram_range: (usize, usize),
    pub char_ngram_range: (usize, usize),
    /// Power of two, at least 1024.
    pub hash_dimension: u32,
    pub lowercase: bool,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            word_ngram_range: (1, 2),
            char_ngram_range: (3, 5),
            hash_dimension: 1 << 18,
            lowercase: true,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.hash_dimension;
        if d < 1024 || !d.is_power_of_two() {
            return Err(ModelError::InvalidConfig(format!(
                "hash_dimension {d} must be a power of two and at least 1024"
            )));
        }
        for (name, (lo, hi)) in [
            ("word_ngram_range", self.word_ngram_range),
            ("char_ngram_range", self.char_ngram_range),
        ] {
            if lo == 0 || lo > hi {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} ({lo}, {hi}) must satisfy 1 <= min <= max"
                )));
            }
        }
        Ok(())
    }
}

/// Gradient-descent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            batch_size: 64,
            epochs: 5,
            seed: 0,
            l2_penalty: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate < 10.0) {
            return Err(ModelError::InvalidConfig(format!(
                "learning_rate {} must be in (0, 10)",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig(
                "batch_size must be positive".into(),
            ));
        }
        if self.epochs == 0 || self.epochs > 1000 {
            return Err(ModelError::InvalidConfig(format!(
                "epochs {} must be in 1..=1000",
                self.epochs
            )));
        }
        if self.l2_penalty.is_nan() || self.l2_penalty < 0.0 {
            return Err(ModelError::InvalidConfig(format!(
                "l2_penalty {} must be non-negative",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// How a model was trained, kept alongside its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub examples: usize,
}

/// A trained logistic classifier over hashed n-gram features.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub featurizer: FeaturizerConfig,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub training_meta: TrainMeta,
}

/// A thresholded prediction. The label is ambiguous exactly when
/// `probability_ambiguous >= 0.5`: on a tie the system asks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Label,
    pub probability_ambiguous: f64,
}

impl Prediction {
    pub fn from_probability(probability_ambiguous: f64) -> Prediction {
        let label = if probability_ambiguous >= 0.5 {
            Label::Ambiguous
        } else {
            Label::Specific
        };
        Prediction {
            label,
            probability_ambiguous,
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn hash_feature(tag: u8, gram: &str) -> u64 {
    let mut h = FNV_OFFSET;
    h ^= u64::from(tag);
    h = h.wrapping_mul(FNV_PRIME);
    for byte in gram.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Extracts word and character n-grams from the whitespace-normalized query,
/// hashes each into the configured dimension with a sign bit, and
/// L2-normalizes the result. The empty query (or one whose features all
/// cancel) yields the empty vector.
pub fn featurize(query: &str, config: &FeaturizerConfig) -> SparseVector {
    let text = if config.lowercase {
        query.to_lowercase()
    } else {
        query.to_string()
    };
    let mask = u64::from(config.hash_dimension - 1);
    let mut accum: BTreeMap<u32, f64> = BTreeMap::new();
    let mut add = |tag: u8, gram: &str| {
        let h = hash_feature(tag, gram);
        let index = (h & mask) as u32;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        *accum.entry(index).or_insert(0.0) += sign;
    };

    let tokens: Vec<&str> = text.split_whitespace().collect();
    let (word_lo, word_hi) = config.word_ngram_range;
    for n in word_lo..=word_hi {
        if n == 0 || tokens.len() < n {
            continue;
        }
        for window in tokens.windows(n) {
            add(b'w', &window.join(" "));
        }
    }

    let normalized = tokens.join(" ");
    let chars: Vec<char> = normalized.chars().collect();
    let (char_lo, char_hi) = config.char_ngram_range;
    for n in char_lo..=char_hi {
        if n == 0 || chars.len() < n {
            continue;
        }
        for window in chars.windows(n) {
            let gram: String = window.iter().collect();
            add(b'c', &gram);
        }
    }

    let norm = accum.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Vec::new();
    }
    accum
        .into_iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|(i, v)| (i, v / norm))
        .collect()
}

pub fn featurize_batch(queries: &[String], config: &FeaturizerConfig) -> Vec<SparseVector> {
    batch::map_batch(queries, |q| featurize(q, config))
}

pub fn featurize_batch_seq(queries: &[String], config: &FeaturizerConfig) -> Vec<SparseVector> {
    batch::map_seq(queries, |q| featurize(q, config))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn dot(weights: &[f64], features: &SparseVector) -> f64 {
    features.iter().map(|(i, v)| weights[*i as usize] * v).sum()
}

/// Mean negative log-likelihood over the examples plus the L2 penalty
/// (bias unpenalized).
pub fn objective(
    weights: &[f64],
    bias: f64,
    features: &[SparseVector],
    labels: &[Label],
    l2_penalty: f64,
) -> f64 {
    let m = features.len() as f64;
    let mut nll = 0.0;
    for (x, y) in features.iter().zip(labels) {
        let score = bias + dot(weights, x);
        nll += match y {
            Label::Ambiguous => softplus(-score),
            Label::Specific => softplus(score),
        };
    }
    nll / m + 0.5 * l2_penalty * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Value and analytic gradient of `objective` at (weights, bias), for the
/// full example set. Returns (loss, gradient wrt weights, gradient wrt bias).
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    features: &[SparseVector],
    labels: &[Label],
    l2_penalty: f64,
) -> (f64, Vec<f64>, f64) {
    let m = features.len() as f64;
    let mut grad_w = vec![0.0f64; weights.len()];
    let mut grad_b = 0.0;
    let mut nll = 0.0;
    for (x, y) in features.iter().zip(labels) {
        let score = bias + dot(weights, x);
        let (loss_i, err) = match y {
            Label::Ambiguous => (softplus(-score), sigmoid(score) - 1.0),
            Label::Specific => (softplus(score), sigmoid(score)),
        };
        nll += loss_i;
        grad_b += err;
        for (i, v) in x {
            grad_w[*i as usize] += err * v;
        }
    }
    for g in grad_w.iter_mut() {
        *g /= m;
    }
    let mut loss = nll / m;
    if l2_penalty > 0.0 {
        let mut squared = 0.0;
        for (g, w) in grad_w.iter_mut().zip(weights) {
            *g += l2_penalty * w;
            squared += w * w;
        }
        loss += 0.5 * l2_penalty * squared;
    }
    (loss, grad_w, grad_b / m)
}

/// Trains a logistic model by minibatch gradient descent on the mean
/// negative log-likelihood plus L2 penalty. Items are shuffled every epoch
/// with a ChaCha stream seeded from `config.seed`, batches are applied in
/// order, and the whole run is deterministic for a fixed item order and
/// seed.
pub fn train(
    set: &TrainingSet,
    config: &TrainConfig,
    featurizer: &FeaturizerConfig,
) -> Result<ClassifierModel, ModelError> {
    config.validate()?;
    featurizer.validate()?;
    let counts = set.class_counts();
    if set.m() < 2 || counts[0] == 0 || counts[1] == 0 {
        return Err(ModelError::DegenerateData(format!(
            "need both labels present, have {} specific and {} ambiguous",
            counts[0], counts[1]
        )));
    }

    let queries: Vec<String> = set.items.iter().map(|i| i.query_text.clone()).collect();
    let features = featurize_batch(&queries, featurizer);
    let labels: Vec<Label> = set.items.iter().map(|i| i.label).collect();

    let mut weights = vec![0.0f64; featurizer.hash_dimension as usize];
    let mut bias = 0.0f64;
    let initial_loss = objective(&weights, bias, &features, &labels, config.l2_penalty);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut indices: Vec<usize> = (0..features.len()).collect();
    let decay = 1.0 - config.learning_rate * config.l2_penalty;
    let mut final_loss = initial_loss;
    for epoch in 1..=config.epochs {
        indices.shuffle(&mut rng);
        for batch_indices in indices.chunks(config.batch_size) {
            let mut grad: BTreeMap<u32, f64> = BTreeMap::new();
            let mut grad_b = 0.0;
            for &i in batch_indices {
                let score = bias + dot(&weights, &features[i]);
                let err = sigmoid(score) - f64::from(labels[i].as_u8());
                grad_b += err;
                for (j, v) in &features[i] {
                    *grad.entry(*j).or_insert(0.0) += err * v;
                }
            }
            let scale = config.learning_rate / batch_indices.len() as f64;
            for (j, g) in grad {
                weights[j as usize] -= scale * g;
            }
            bias -= scale * grad_b;
            if config.l2_penalty > 0.0 {
                for w in weights.iter_mut() {
                    *w *= decay;
                }
            }
        }
        final_loss = objective(&weights, bias, &features, &labels, config.l2_penalty);
        if !final_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
    }

    Ok(ClassifierModel {
        featurizer: featurizer.clone(),
        weights,
        bias,
        training_meta: TrainMeta {
            epochs: config.epochs,
            learning_rate: config.learning_rate,
            batch_size: config.batch_size,
            seed: config.seed,
            initial_loss,
            final_loss,
            examples: set.m(),
        },
    })
}

/// Scores one query. Work is linear in the query's feature count and does
/// not depend on how much data the model was trained on.
pub fn predict(model: &ClassifierModel, query: &str) -> Prediction {
    let features = featurize(query, &model.featurizer);
    let score = model.bias + dot(&model.weights, &features);
    Prediction::from_probability(sigmoid(score))
}

pub fn predict_batch(model: &ClassifierModel, queries: &[String]) -> Vec<Prediction> {
    batch::map_batch(queries, |q| predict(model, q))
}

pub fn predict_batch_seq(model: &ClassifierModel, queries: &[String]) -> Vec<Prediction> {
    batch::map_seq(queries, |q| predict(model, q))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    featurizer: FeaturizerConfig,
    bias: f64,
    training_meta: TrainMeta,
    /// Nonzero weight entries only.
    weights: Vec<(u32, f64)>,
}

/// Writes the model as a single JSON document with a schema version.
pub fn save_model(model: &ClassifierModel, path: &Path) -> Result<(), ModelError> {
    let nonzero: Vec<(u32, f64)> = model
        .weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(i, w)| (i as u32, *w))
        .collect();
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        featurizer: model.featurizer.clone(),
        bias: model.bias,
        training_meta: model.training_meta.clone(),
        weights: nonzero,
    };
    let json = serde_json::to_string(&file).expect("model serializes");
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_error(path, e))?;
        }
    }
    fs::write(path, json).map_err(|e| io_error(path, e))
}

/// Reads a model written by `save_model`. Fails whole: a malformed or
/// truncated file never yields a partially loaded model.
pub fn load_model(path: &Path) -> Result<ClassifierModel, ModelError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| version_error(path, e.to_string()))?;
    if file.schema_version != MODEL_SCHEMA_VERSION {
        return Err(version_error(
            path,
            format!(
                "unsupported schema_version {}, expected {}",
                file.schema_version, MODEL_SCHEMA_VERSION
            ),
        ));
    }
    file.featurizer
        .validate()
        .map_err(|e| version_error(path, e.to_string()))?;
    if !file.bias.is_finite() {
        return Err(version_error(path, "bias is not finite"));
    }
    let dim = file.featurizer.hash_dimension as usize;
    let mut weights = vec![0.0f64; dim];
    for (i, w) in file.weights {
        if i as usize >= dim {
            return Err(version_error(
                path,
                format!("weight index {i} outside hash dimension {dim}"),
            ));
        }
        if !w.is_finite() {
            return Err(version_error(path, format!("weight {i} is not finite")));
        }
        weights[i as usize] = w;
    }
    Ok(ClassifierModel {
        featurizer: file.featurizer,
        weights,
        bias: file.bias,
        training_meta: file.training_meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curate::{LabeledQuery, Provenance, QuerySource};
    use rand::Rng;
    use tempfile::tempdir;

    fn small_featurizer() -> FeaturizerConfig {
        FeaturizerConfig {
            hash_dimension: 1 << 12,
            ..FeaturizerConfig::default()
        }
    }

    fn make_set(items: &[(&str, u8)]) -> TrainingSet {
        TrainingSet {
            items: items
                .iter()
                .enumerate()
                .map(|(i, (q, l))| LabeledQuery {
                    query_text: q.to_string(),
                    label: Label::from_u8(*l).unwrap(),
                    source: QuerySource::Synthetic,
                    record_id: format!("r{i:06}"),
                })
                .collect(),
            provenance: Provenance::default(),
        }
    }

    fn two_cluster_set(n_per_class: usize) -> TrainingSet {
        let mut items = Vec::new();
        for i in 0..n_per_class {
            items.push((format!("crisp detail token{i} exact"), 0u8));
            items.push((format!("fuzzy broad token{i} vague"), 1u8));
        }
        let refs: Vec<(&str, u8)> = items.iter().map(|(q, l)| (q.as_str(), *l)).collect();
        make_set(&refs)
    }

    #[test]
    fn empty_query_has_zero_vector() {
        assert!(featurize("", &FeaturizerConfig::default()).is_empty());
        assert!(featurize("   ", &FeaturizerConfig::default()).is_empty());
    }

    #[test]
    fn featurize_is_deterministic() {
        let config = FeaturizerConfig::default();
        assert_eq!(featurize("abc abc", &config), featurize("abc abc", &config));
    }

    #[test]
    fn nonempty_vectors_have_unit_norm() {
        let config = FeaturizerConfig::default();
        for query in [
            "a",
            "hello world",
            "best phones 2024",
            "na\u{ef}ve r\u{e9}sum\u{e9} query",
            "when is the next solar eclipse visible from madrid",
        ] {
            let vec = featurize(query, &config);
            let norm_sq: f64 = vec.iter().map(|(_, v)| v * v).sum();
            assert!((norm_sq - 1.0).abs() < 1e-9, "{query}: {norm_sq}");
            assert!(vec.windows(2).all(|w| w[0].0 < w[1].0), "indices sorted");
        }
    }

    #[test]
    fn lowercase_flag_controls_case_folding() {
        let folded = FeaturizerConfig::default();
        assert_eq!(featurize("ABC def", &folded), featurize("abc DEF", &folded));
        let exact = FeaturizerConfig {
            lowercase: false,
            ..FeaturizerConfig::default()
        };
        assert_ne!(featurize("ABC def", &exact), featurize("abc def", &exact));
    }

    #[test]
    fn indices_stay_under_the_dimension() {
        let config = small_featurizer();
        let vec = featurize("a longer query with several words and characters", &config);
        assert!(vec.iter().all(|(i, _)| *i < config.hash_dimension));
    }

    #[test]
    fn batch_helpers_match_single_calls() {
        let config = FeaturizerConfig::default();
        let queries: Vec<String> = (0..20).map(|i| format!("query number {i}")).collect();
        let single: Vec<SparseVector> = queries.iter().map(|q| featurize(q, &config)).collect();
        assert_eq!(featurize_batch(&queries, &config), single);
        assert_eq!(featurize_batch_seq(&queries, &config), single);
    }

    #[test]
    fn two_point_set_trains_to_low_loss() {
        let set = make_set(&[("alpha", 0), ("beta", 1)]);
        let config = TrainConfig {
            learning_rate: 0.5,
            epochs: 200,
            ..TrainConfig::default()
        };
        let model = train(&set, &config, &small_featurizer()).unwrap();
        assert!(
            model.training_meta.final_loss < 0.1,
            "final loss {}",
            model.training_meta.final_loss
        );
        assert_eq!(predict(&model, "alpha").label, Label::Specific);
        assert_eq!(predict(&model, "beta").label, Label::Ambiguous);
    }

    #[test]
    fn same_seed_trains_bit_identical_models() {
        let set = two_cluster_set(30);
        let config = TrainConfig {
            epochs: 3,
            batch_size: 16,
            seed: 42,
            ..TrainConfig::default()
        };
        let a = train(&set, &config, &small_featurizer()).unwrap();
        let b = train(&set, &config, &small_featurizer()).unwrap();
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
        assert!(a
            .weights
            .iter()
            .zip(&b.weights)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.training_meta, b.training_meta);
    }

    #[test]
    fn single_label_data_is_rejected() {
        let set = make_set(&[("one", 1), ("two", 1)]);
        assert!(matches!(
            train(&set, &TrainConfig::default(), &small_featurizer()),
            Err(ModelError::DegenerateData(_))
        ));
    }

    #[test]
    fn runaway_penalty_reports_non_finite_loss() {
        let set = make_set(&[("alpha", 0), ("beta", 1)]);
        let config = TrainConfig {
            learning_rate: 1.0,
            l2_penalty: 1e300,
            epochs: 3,
            ..TrainConfig::default()
        };
        match train(&set, &config, &small_featurizer()) {
            Err(ModelError::NonFiniteLoss { epoch }) => assert_eq!(epoch, 1),
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn loss_improves_from_the_initial_value() {
        let set = two_cluster_set(20);
        let config = TrainConfig {
            learning_rate: 0.5,
            ..TrainConfig::default()
        };
        let model = train(&set, &config, &small_featurizer()).unwrap();
        let meta = &model.training_meta;
        assert!((meta.initial_loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(meta.final_loss < meta.initial_loss);
    }

    #[test]
    fn item_order_only_matters_through_the_shuffle() {
        let set = two_cluster_set(10);
        let mut reversed = set.clone();
        reversed.items.reverse();
        let config = TrainConfig {
            batch_size: 1000,
            epochs: 4,
            ..TrainConfig::default()
        };
        let a = train(&set, &config, &small_featurizer()).unwrap();
        let b = train(&reversed, &config, &small_featurizer()).unwrap();
        for query in [
            "crisp detail token3 exact",
            "fuzzy broad token7 vague",
            "novel text",
        ] {
            let pa = predict(&a, query).probability_ambiguous;
            let pb = predict(&b, query).probability_ambiguous;
            assert!((pa - pb).abs() < 1e-9, "{query}: {pa} vs {pb}");
        }
    }

    #[test]
    fn zero_model_ties_to_ask() {
        let model = ClassifierModel {
            featurizer: small_featurizer(),
            weights: vec![0.0; 1 << 12],
            bias: 0.0,
            training_meta: TrainMeta {
                epochs: 0,
                learning_rate: 0.0,
                batch_size: 0,
                seed: 0,
                initial_loss: 0.0,
                final_loss: 0.0,
                examples: 0,
            },
        };
        let p = predict(&model, "any query at all");
        assert_eq!(p.probability_ambiguous, 0.5);
        assert_eq!(p.label, Label::Ambiguous);
    }

    #[test]
    fn empty_query_scores_from_bias_alone() {
        let mut model = ClassifierModel {
            featurizer: small_featurizer(),
            weights: vec![0.25; 1 << 12],
            bias: 0.3,
            training_meta: TrainMeta {
                epochs: 0,
                learning_rate: 0.0,
                batch_size: 0,
                seed: 0,
                initial_loss: 0.0,
                final_loss: 0.0,
                examples: 0,
            },
        };
        let p = predict(&model, "");
        assert!((p.probability_ambiguous - sigmoid(0.3)).abs() < 1e-15);
        model.bias = -2.0;
        assert_eq!(predict(&model, "").label, Label::Specific);
    }

    #[test]
    fn threshold_is_monotone_and_ties_go_to_ask() {
        assert_eq!(Prediction::from_probability(0.5).label, Label::Ambiguous);
        assert_eq!(Prediction::from_probability(0.4999).label, Label::Specific);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let labels: Vec<u8> = grid
            .iter()
            .map(|p| Prediction::from_probability(*p).label.as_u8())
            .collect();
        assert!(labels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hand_computed_gradient_matches() {
        let features = vec![vec![(0u32, 1.0)]];
        let labels = vec![Label::Ambiguous];
        let weights = vec![0.0; 4];
        let (loss, grad_w, grad_b) = loss_and_gradient(&weights, 0.0, &features, &labels, 0.0);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((grad_w[0] + 0.5).abs() < 1e-12);
        assert!((grad_b + 0.5).abs() < 1e-12);
        assert_eq!(loss, objective(&weights, 0.0, &features, &labels, 0.0));
    }

    fn random_instance(
        rng: &mut impl Rng,
        dim: usize,
        examples: usize,
    ) -> (Vec<f64>, f64, Vec<SparseVector>, Vec<Label>) {
        let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let bias = rng.gen_range(-0.5..0.5);
        let features: Vec<SparseVector> = (0..examples)
            .map(|_| {
                (0..5)
                    .map(|_| (rng.gen_range(0..dim as u32), rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let labels: Vec<Label> = (0..examples)
            .map(|_| Label::from_u8(rng.gen_range(0..2)).unwrap())
            .collect();
        (weights, bias, features, labels)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut weights, bias, features, labels) = random_instance(&mut rng, 64, 10);
        let l2 = 0.01;
        let (_, grad_w, grad_b) = loss_and_gradient(&weights, bias, &features, &labels, l2);
        let eps = 1e-5;
        let rel = |a: f64, b: f64| (a - b).abs() / f64::max(1.0, f64::max(a.abs(), b.abs()));
        for j in 0..weights.len() {
            let orig = weights[j];
            weights[j] = orig + eps;
            let up = objective(&weights, bias, &features, &labels, l2);
            weights[j] = orig - eps;
            let down = objective(&weights, bias, &features, &labels, l2);
            weights[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            assert!(rel(numeric, grad_w[j]) < 1e-4, "coordinate {j}");
        }
        let up = objective(&weights, bias + eps, &features, &labels, l2);
        let down = objective(&weights, bias - eps, &features, &labels, l2);
        assert!(rel((up - down) / (2.0 * eps), grad_b) < 1e-4, "bias");
    }

    #[test]
    fn save_load_round_trip_preserves_predictions() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let set = two_cluster_set(15);
        let model = train(&set, &TrainConfig::default(), &small_featurizer()).unwrap();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let len = rng.gen_range(0..30);
            let query: String = (0..len)
                .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
                .collect();
            assert_eq!(predict(&loaded, &query), predict(&model, &query));
        }
    }

    #[test]
    fn truncated_or_mismatched_files_never_half_load() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let set = make_set(&[("alpha", 0), ("beta", 1)]);
        let model = train(&set, &TrainConfig::default(), &small_featurizer()).unwrap();
        save_model(&model, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(
            load_model(&path).unwrap_err(),
            ModelError::Version { .. }
        ));
        let bumped = text.replace("\"schema_version\":1", "\"schema_version\":9");
        fs::write(&path, bumped).unwrap();
        assert!(matches!(
            load_model(&path).unwrap_err(),
            ModelError::Version { .. }
        ));
        assert!(matches!(
            load_model(&dir.path().join("missing.json")).unwrap_err(),
            ModelError::Io { .. }
        ));
        assert!(matches!(
            save_model(&model, dir.path()).unwrap_err(),
            ModelError::Io { .. }
        ));
    }

    #[test]
    fn out_of_range_weight_index_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let json = serde_json::json!({
            "schema_version": 1,
            "featurizer": {
                "word_ngram_range": [1, 2],
                "char_ngram_range": [3, 5],
                "hash_dimension": 1024,
                "lowercase": true
            },
            "bias": 0.0,
            "training_meta": {
                "epochs": 1, "learning_rate": 0.1, "batch_size": 64,
                "seed": 0, "initial_loss": 0.7, "final_loss": 0.5, "examples": 2
            },
            "weights": [[5000, 1.5]]
        });
        fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        assert!(matches!(
            load_model(&path).unwrap_err(),
            ModelError::Version { .. }
        ));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad_dims = [
            FeaturizerConfig {
                hash_dimension: 100,
                ..FeaturizerConfig::default()
            },
            FeaturizerConfig {
                hash_dimension: 1 << 9,
                ..FeaturizerConfig::default()
            },
            FeaturizerConfig {
                word_ngram_range: (2, 1),
                ..FeaturizerConfig::default()
            },
            FeaturizerConfig {
                char_ngram_range: (0, 3),
                ..FeaturizerConfig::default()
            },
        ];
        for config in bad_dims {
            assert!(config.validate().is_err(), "{config:?}");
        }
        let bad_trains = [
            TrainConfig {
                learning_rate: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                learning_rate: 10.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                epochs: 1001,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                l2_penalty: -0.1,
                ..TrainConfig::default()
            },
        ];
        for config in bad_trains {
            assert!(config.validate().is_err(), "{config:?}");
        }
        assert!(FeaturizerConfig::default().validate().is_ok());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
