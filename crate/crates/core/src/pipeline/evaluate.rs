//! Evaluation commands: score the configured predictor on a labeled dataset
//! and measure its prediction latency.

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::data::{
    load_ambignq, load_clariq, read_training_set, sample_few_shot, AmbigSplit, EvalSet,
};
use crate::eval::{bench_latency, weighted_metrics, LatencyError, LatencyReport, MetricsReport};
use crate::model::external::ExternalPredictor;
use crate::model::{load_model, predict};
use crate::verdict::predict_llm;
use crate::Label;

use super::config::{EvalDataset, PipelineConfig, PredictorKind};
use super::{build_client, write_json, PipelineError};

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub dataset: String,
    pub predictor: PredictorKind,
    pub metrics: MetricsReport,
    pub latency: Option<LatencyReport>,
    pub report_path: PathBuf,
    pub unparseable: usize,
    pub avg_tokens: f64,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    command: &'static str,
    dataset: &'a str,
    predictor: PredictorKind,
    shots: usize,
    seed: u64,
    n: usize,
    class_counts: (usize, usize),
    avg_tokens: f64,
    metrics: &'a MetricsReport,
    latency: Option<&'a LatencyReport>,
    created_at: DateTime<Utc>,
    config: serde_json::Value,
}

/// Loads whichever eval dataset the config selects, or `None` when the config
/// does not point at any file for it.
pub(crate) fn try_load_eval_set(config: &PipelineConfig) -> Result<Option<EvalSet>, PipelineError> {
    let set = match config.eval.dataset {
        EvalDataset::Clariq => {
            if config.datasets.clariq.is_empty() {
                None
            } else {
                Some(load_clariq(&config.datasets.clariq)?)
            }
        }
        EvalDataset::Ambignq => config
            .datasets
            .ambignq_dev
            .as_deref()
            .map(|path| load_ambignq(path, AmbigSplit::Validation))
            .transpose()?,
        EvalDataset::Labeled => config
            .datasets
            .labeled
            .as_deref()
            .map(|path| {
                read_training_set(path).map(|set| EvalSet::from_training_set("labeled", &set))
            })
            .transpose()?,
    };
    Ok(set)
}

pub(crate) fn load_eval_set(config: &PipelineConfig) -> Result<EvalSet, PipelineError> {
    try_load_eval_set(config)?.ok_or_else(|| {
        let hint = match config.eval.dataset {
            EvalDataset::Clariq => "eval.dataset = \"clariq\" needs datasets.clariq paths",
            EvalDataset::Ambignq => "eval.dataset = \"ambignq\" needs datasets.ambignq_dev",
            EvalDataset::Labeled => "eval.dataset = \"labeled\" needs datasets.labeled",
        };
        PipelineError::Invalid(hint.into())
    })
}

/// Few-shot demonstrations for the LLM predictor, drawn once per run.
fn load_demonstrations(config: &PipelineConfig) -> Result<Vec<(String, Label)>, PipelineError> {
    if config.eval.shots == 0 {
        return Ok(Vec::new());
    }
    let path = config.datasets.ambignq_train.as_deref().ok_or_else(|| {
        PipelineError::Invalid(
            "eval.shots > 0 needs datasets.ambignq_train for demonstrations".into(),
        )
    })?;
    let train = load_ambignq(path, AmbigSplit::Train)?;
    Ok(sample_few_shot(
        &train,
        config.eval.shots,
        config.eval.seed,
    )?)
}

/// Runs the configured predictor over every query, returning predicted labels
/// and the count of unparseable predictor outputs. LLM and external calls run
/// sequentially so scripted providers see queries in dataset order.
fn run_predictor(
    config: &PipelineConfig,
    queries: &[String],
) -> Result<(Vec<Label>, usize), PipelineError> {
    match config.eval.predictor {
        PredictorKind::Classifier => {
            let model = load_model(&config.model_path())?;
            let labels = crate::model::predict_batch(&model, queries)
                .into_iter()
                .map(|p| p.label)
                .collect();
            Ok((labels, 0))
        }
        PredictorKind::External => {
            let endpoint = config.external.as_ref().ok_or_else(|| {
                PipelineError::Invalid(
                    "eval.predictor = \"external\" needs an [external] section".into(),
                )
            })?;
            let mut predictor = ExternalPredictor::connect(endpoint)?;
            let mut labels = Vec::with_capacity(queries.len());
            for query in queries {
                labels.push(predictor.predict(query)?.label);
            }
            Ok((labels, 0))
        }
        PredictorKind::Llm => {
            let (client, model_name) = build_client(config)?;
            let demonstrations = load_demonstrations(config)?;
            let mut labels = Vec::with_capacity(queries.len());
            let mut unparseable = 0;
            for query in queries {
                let (prediction, parse) = predict_llm(
                    query,
                    &demonstrations,
                    &client,
                    &config.provider,
                    &model_name,
                )?;
                if parse.is_unparseable() {
                    unparseable += 1;
                }
                labels.push(prediction.label);
            }
            Ok((labels, unparseable))
        }
    }
}

/// Times the configured predictor over the eval queries. The warmup count is
/// clamped below the query count so small datasets still benchmark.
fn run_latency(
    config: &PipelineConfig,
    queries: &[String],
) -> Result<LatencyReport, PipelineError> {
    let warmup = config.eval.warmup.min(queries.len().saturating_sub(1));
    fn as_pipeline_error<E: std::fmt::Display>(e: LatencyError<E>) -> PipelineError {
        PipelineError::Latency(e.to_string())
    }
    match config.eval.predictor {
        PredictorKind::Classifier => {
            let model = load_model(&config.model_path())?;
            bench_latency(queries, warmup, |q| {
                Ok::<_, std::convert::Infallible>(predict(&model, q).label)
            })
            .map_err(as_pipeline_error)
        }
        PredictorKind::External => {
            let endpoint = config.external.as_ref().ok_or_else(|| {
                PipelineError::Invalid(
                    "eval.predictor = \"external\" needs an [external] section".into(),
                )
            })?;
            let mut predictor = ExternalPredictor::connect(endpoint)?;
            bench_latency(queries, warmup, |q| predictor.predict(q)).map_err(as_pipeline_error)
        }
        PredictorKind::Llm => {
            let (client, model_name) = build_client(config)?;
            let demonstrations = load_demonstrations(config)?;
            bench_latency(queries, warmup, |q| {
                predict_llm(q, &demonstrations, &client, &config.provider, &model_name)
            })
            .map_err(as_pipeline_error)
        }
    }
}

/// Scores the configured predictor on the configured dataset, optionally
/// benchmarks its latency, and writes a report file.
pub fn cmd_eval(config: &PipelineConfig) -> Result<EvalOutcome, PipelineError> {
    config.validate()?;
    let eval_set = load_eval_set(config)?;
    let queries = eval_set.queries();
    let (labels, unparseable) = run_predictor(config, &queries)?;
    let mut metrics = weighted_metrics(&eval_set.gold(), &labels)?;
    metrics.unparseable_count = unparseable;
    let latency = if config.eval.latency {
        Some(run_latency(config, &queries)?)
    } else {
        None
    };

    let avg_tokens = eval_set.avg_tokens();
    let report = EvalReport {
        command: "eval",
        dataset: &eval_set.name,
        predictor: config.eval.predictor,
        shots: config.eval.shots,
        seed: config.eval.seed,
        n: eval_set.items.len(),
        class_counts: eval_set.counts,
        avg_tokens,
        metrics: &metrics,
        latency: latency.as_ref(),
        created_at: Utc::now(),
        config: serde_json::to_value(config).expect("config serializes"),
    };
    let report_path = config.report_path("eval_report");
    write_json(&report_path, &report)?;

    Ok(EvalOutcome {
        dataset: eval_set.name,
        predictor: config.eval.predictor,
        metrics,
        latency,
        report_path,
        unparseable,
        avg_tokens,
    })
}

#[derive(Serialize)]
struct BenchReport<'a> {
    command: &'static str,
    dataset: &'a str,
    predictor: PredictorKind,
    latency: &'a LatencyReport,
    created_at: DateTime<Utc>,
    config: serde_json::Value,
}

/// Benchmarks prediction latency on the configured dataset without scoring.
pub fn cmd_bench(config: &PipelineConfig) -> Result<(LatencyReport, PathBuf), PipelineError> {
    config.validate()?;
    let eval_set = load_eval_set(config)?;
    let latency = run_latency(config, &eval_set.queries())?;
    let report = BenchReport {
        command: "bench",
        dataset: &eval_set.name,
        predictor: config.eval.predictor,
        latency: &latency,
        created_at: Utc::now(),
        config: serde_json::to_value(config).expect("config serializes"),
    };
    let report_path = config.report_path("latency_report");
    write_json(&report_path, &report)?;
    Ok((latency, report_path))
}
