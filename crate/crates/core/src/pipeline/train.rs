//! Training commands: fit the classifier on a persisted corpus, and the
//! data-scale sweep that retrains on balanced subsets of increasing size.

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curate::{filter_records_with, label_records, TrainingSet};
use crate::data::{read_records, DataError};
use crate::eval::{weighted_metrics, MetricsReport};
use crate::model::{predict_batch, save_model, train, ClassifierModel, TrainMeta};
use crate::Label;

use super::config::PipelineConfig;
use super::{evaluate, write_json, PipelineError};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    pub model_path: PathBuf,
    pub manifest_path: PathBuf,
    pub m: usize,
    pub class_counts: [usize; 2],
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Serialize)]
struct TrainManifest {
    command: &'static str,
    corpus: PathBuf,
    model: PathBuf,
    m: usize,
    class_counts: [usize; 2],
    training_meta: TrainMeta,
    created_at: DateTime<Utc>,
    config: serde_json::Value,
}

/// Reads the records corpus, refilters and labels it, trains the classifier,
/// and saves the model next to a manifest.
pub fn cmd_train(config: &PipelineConfig) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    let records_path = config.records_path();
    let (records, _meta) = read_records(&records_path)?;
    let (kept, filter_stats) = filter_records_with(&records, &config.curation);
    let mut training = label_records(&kept);
    training.provenance.filter_stats = Some(filter_stats);
    training.provenance.seed = Some(config.train.seed);

    let model = train(&training, &config.train, &config.features)?;
    let model_path = config.model_path();
    save_model(&model, &model_path)?;

    let manifest = TrainManifest {
        command: "train",
        corpus: records_path,
        model: model_path.clone(),
        m: training.m(),
        class_counts: training.class_counts(),
        training_meta: model.training_meta.clone(),
        created_at: Utc::now(),
        config: serde_json::to_value(config).expect("config serializes"),
    };
    let manifest_path = config.manifest_path("train");
    write_json(&manifest_path, &manifest)?;

    Ok(TrainOutcome {
        m: training.m(),
        class_counts: training.class_counts(),
        initial_loss: model.training_meta.initial_loss,
        final_loss: model.training_meta.final_loss,
        model,
        model_path,
        manifest_path,
    })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scale: usize,
    pub final_loss: f64,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub eval_set: String,
    pub report_path: PathBuf,
}

#[derive(Serialize)]
struct SweepReportRow<'a> {
    scale: usize,
    final_loss: f64,
    metrics: &'a MetricsReport,
}

/// Draws a label-balanced subset of `scale` items, half per label, keeping
/// the original corpus order of the drawn items.
fn balanced_subsample(full: &TrainingSet, scale: usize, seed: u64) -> TrainingSet {
    let per_label = scale / 2;
    let class_indices = |label: Label| -> Vec<usize> {
        full.items
            .iter()
            .enumerate()
            .filter(|(_, item)| item.label == label)
            .map(|(index, _)| index)
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(scale);
    for label in [Label::Specific, Label::Ambiguous] {
        let pool = class_indices(label);
        let picks = rand::seq::index::sample(&mut rng, pool.len(), per_label);
        chosen.extend(picks.iter().map(|i| pool[i]));
    }
    chosen.sort_unstable();
    TrainingSet {
        items: chosen.iter().map(|&i| full.items[i].clone()).collect(),
        provenance: full.provenance.clone(),
    }
}

/// Retrains on balanced subsets of each requested scale and evaluates every
/// model on the configured eval dataset. Subsampling is seeded per scale, so
/// the list order of `scales` does not matter.
pub fn cmd_sweep(config: &PipelineConfig, scales: &[usize]) -> Result<SweepOutcome, PipelineError> {
    config.validate()?;
    if scales.is_empty() {
        return Err(PipelineError::Invalid("no sweep scales given".into()));
    }
    let (records, _meta) = read_records(&config.records_path())?;
    let (kept, _stats) = filter_records_with(&records, &config.curation);
    let full = label_records(&kept);
    let counts = full.class_counts();
    let balanced_capacity = 2 * counts[0].min(counts[1]);
    let eval_set = evaluate::load_eval_set(config)?;

    let mut rows = Vec::new();
    for &scale in scales {
        if scale == 0 || scale % 2 == 1 {
            return Err(PipelineError::Invalid(format!(
                "sweep scale {scale} must be a positive even count (half per label)"
            )));
        }
        if scale / 2 > counts[0].min(counts[1]) {
            return Err(DataError::InsufficientData {
                have: balanced_capacity.min(full.m()),
                need: scale,
            }
            .into());
        }
        let subset = balanced_subsample(&full, scale, config.train.seed.wrapping_add(scale as u64));
        let model = train(&subset, &config.train, &config.features)?;
        let predictions = predict_batch(&model, &eval_set.queries());
        let labels: Vec<Label> = predictions.iter().map(|p| p.label).collect();
        let metrics = weighted_metrics(&eval_set.gold(), &labels)?;
        rows.push(SweepRow {
            scale,
            final_loss: model.training_meta.final_loss,
            metrics,
        });
    }

    let report_rows: Vec<SweepReportRow> = rows
        .iter()
        .map(|row| SweepReportRow {
            scale: row.scale,
            final_loss: row.final_loss,
            metrics: &row.metrics,
        })
        .collect();
    let report_path = config.report_path("sweep_report");
    write_json(&report_path, &report_rows)?;

    Ok(SweepOutcome {
        rows,
        eval_set: eval_set.name,
        report_path,
    })
}
