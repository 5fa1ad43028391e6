//! Corpus generation: loop completion calls through parse and curation until
//! enough unique labeled items exist, then persist the corpus, the labeled
//! training set, and a run manifest. Also the four-setting prompt ablation.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::client::{CompletionRequest, LlmClient};
use crate::curate::{filter_records_with, label_records, FilterStats, LabelStats, TrainingSet};
use crate::data::{write_records, write_training_set};
use crate::eval::{weighted_metrics, MetricsReport};
use crate::model::{save_model, train};
use crate::parse::{parse_generation_output, ParseReport, SyntheticRecord};
use crate::prompt::{build_generation_prompt, GenerationVariant, QueryKind};

use super::config::PipelineConfig;
use super::{build_client, evaluate, write_json, PipelineError};

/// Everything a generation run records about itself.
#[derive(Debug, Clone, Serialize)]
pub struct GenerationManifest {
    pub command: String,
    pub provider_id: String,
    pub model_name: String,
    pub variants: Vec<GenerationVariant>,
    pub batch_size: usize,
    pub temperature: f64,
    pub base_seed: u64,
    pub call_budget: usize,
    pub call_count: usize,
    pub target_items: usize,
    pub achieved_items: usize,
    pub class_counts: [usize; 2],
    pub records_written: usize,
    pub parse: ParseReport,
    pub filter: FilterStats,
    pub labels: LabelStats,
    pub created_at: DateTime<Utc>,
    /// Echo of the effective run configuration.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub records: Vec<SyntheticRecord>,
    pub training: TrainingSet,
    pub manifest: GenerationManifest,
    pub records_path: PathBuf,
    pub corpus_path: PathBuf,
    pub manifest_path: PathBuf,
}

struct StreamOutcome {
    raw_records: Vec<SyntheticRecord>,
    parse_report: ParseReport,
    calls: usize,
}

/// Calls the provider until this stream alone yields `stream_target` labeled
/// items after curation, or the call budget runs out. Each call's request
/// seed is `seed_base` plus the call index.
fn generate_stream(
    client: &LlmClient,
    config: &PipelineConfig,
    model_name: &str,
    variant: GenerationVariant,
    stream_target: usize,
    seed_base: u64,
) -> Result<StreamOutcome, PipelineError> {
    let settings = &config.generation;
    let prompt = build_generation_prompt(variant, settings.batch_size);
    let mut raw_records: Vec<SyntheticRecord> = Vec::new();
    let mut parse_report = ParseReport::default();
    let mut calls = 0usize;
    loop {
        let (kept, _) = filter_records_with(&raw_records, &config.curation);
        let achieved = label_records(&kept).m();
        if achieved >= stream_target {
            return Ok(StreamOutcome {
                raw_records,
                parse_report,
                calls,
            });
        }
        if calls >= settings.call_budget {
            return Err(PipelineError::BudgetExhausted {
                target: stream_target,
                achieved,
                calls,
            });
        }
        let response = client.complete(&CompletionRequest {
            provider_id: config.provider.clone(),
            model_name: model_name.to_string(),
            prompt: prompt.text.clone(),
            temperature: settings.temperature,
            max_output_tokens: settings.max_output_tokens,
            seed: Some(seed_base.wrapping_add(calls as u64)),
        })?;
        calls += 1;
        let (records, report) = parse_generation_output(&response.text, variant, model_name);
        parse_report.merge(&report);
        raw_records.extend(records);
    }
}

struct FinalizedCorpus {
    records: Vec<SyntheticRecord>,
    training: TrainingSet,
    filter_stats: FilterStats,
}

/// Filters the raw records, then truncates to the shortest prefix whose
/// labeling reaches `target` items. Label-pair conflicts can make the item
/// count non-monotonic in the prefix length, so the prefix is found by
/// scanning forward from the first possible cut; a clean corpus lands on the
/// target exactly.
fn finalize_corpus(
    raw: &[SyntheticRecord],
    config: &PipelineConfig,
    target: usize,
) -> FinalizedCorpus {
    let (kept, filter_stats) = filter_records_with(raw, &config.curation);
    let mut scan_from = kept.len();
    if target == 0 {
        scan_from = 0;
    } else {
        let mut emitted = 0usize;
        for (index, record) in kept.iter().enumerate() {
            emitted += usize::from(record.specific_query.is_some())
                + usize::from(record.ambiguous_query.is_some());
            if emitted >= target {
                scan_from = index + 1;
                break;
            }
        }
    }
    let mut cut = kept.len();
    for candidate in scan_from..=kept.len() {
        if label_records(&kept[..candidate]).m() >= target {
            cut = candidate;
            break;
        }
    }
    let records = kept[..cut].to_vec();
    let mut training = label_records(&records);
    training.provenance.filter_stats = Some(filter_stats);
    FinalizedCorpus {
        records,
        training,
        filter_stats,
    }
}

#[allow(clippy::too_many_arguments)]
fn write_corpus_outputs(
    config: &PipelineConfig,
    command: &str,
    variants: Vec<GenerationVariant>,
    raw: &[SyntheticRecord],
    parse_report: ParseReport,
    calls: usize,
    target: usize,
    out_dir: &Path,
    model_name: &str,
    seed: u64,
) -> Result<GenerationOutcome, PipelineError> {
    let finalized = finalize_corpus(raw, config, target);
    let mut training = finalized.training;
    training.provenance.seed = Some(seed);

    let manifest = GenerationManifest {
        command: command.to_string(),
        provider_id: config.provider.clone(),
        model_name: model_name.to_string(),
        variants,
        batch_size: config.generation.batch_size,
        temperature: config.generation.temperature,
        base_seed: seed,
        call_budget: config.generation.call_budget,
        call_count: calls,
        target_items: target,
        achieved_items: training.m(),
        class_counts: training.class_counts(),
        records_written: finalized.records.len(),
        parse: parse_report,
        filter: finalized.filter_stats,
        labels: training.provenance.label_stats,
        created_at: Utc::now(),
        config: serde_json::to_value(config).expect("config serializes"),
    };

    let generation_config = serde_json::json!({
        "variants": manifest.variants,
        "model_name": model_name,
        "batch_size": config.generation.batch_size,
        "temperature": config.generation.temperature,
        "seed": seed,
    });
    let records_path = out_dir.join("records.jsonl");
    let corpus_path = out_dir.join("corpus.jsonl");
    let manifest_path = out_dir.join("generate_manifest.json");
    write_records(&finalized.records, generation_config, &records_path)?;
    write_training_set(&training, &corpus_path)?;
    write_json(&manifest_path, &manifest)?;

    Ok(GenerationOutcome {
        records: finalized.records,
        training,
        manifest,
        records_path,
        corpus_path,
        manifest_path,
    })
}

/// Generates a corpus for the configured variant. Stops once the filtered,
/// labeled corpus holds `generation.target_count` unique items; fails with
/// the shortfall when the call budget runs out first.
pub fn cmd_generate(config: &PipelineConfig) -> Result<GenerationOutcome, PipelineError> {
    config.validate()?;
    let (client, model_name) = build_client(config)?;
    let settings = &config.generation;
    let stream = generate_stream(
        &client,
        config,
        &model_name,
        settings.variant,
        settings.target_count,
        settings.seed,
    )?;
    write_corpus_outputs(
        config,
        "generate",
        vec![settings.variant],
        &stream.raw_records,
        stream.parse_report,
        stream.calls,
        settings.target_count,
        &config.output.dir,
        &model_name,
        settings.seed,
    )
}

/// One ablation setting: a corpus built from one or two generation streams.
#[derive(Debug, Clone, Copy)]
pub struct AblateSetting {
    pub name: &'static str,
    pub variants: &'static [GenerationVariant],
}

pub const ABLATE_SETTINGS: [AblateSetting; 4] = [
    AblateSetting {
        name: "pair-specific-first",
        variants: &[GenerationVariant::PairSpecificFirst],
    },
    AblateSetting {
        name: "pair-ambiguous-first",
        variants: &[GenerationVariant::PairAmbiguousFirst],
    },
    AblateSetting {
        name: "chain-only",
        variants: &[
            GenerationVariant::Chain(QueryKind::Specific),
            GenerationVariant::Chain(QueryKind::Ambiguous),
        ],
    },
    AblateSetting {
        name: "direct-only",
        variants: &[
            GenerationVariant::Direct(QueryKind::Specific),
            GenerationVariant::Direct(QueryKind::Ambiguous),
        ],
    },
];

#[derive(Debug, Clone)]
pub struct AblateRow {
    pub setting: String,
    pub outcome: GenerationOutcome,
    /// Present when an eval dataset is configured: metrics of a classifier
    /// trained on this setting's corpus.
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone)]
pub struct AblateOutcome {
    pub rows: Vec<AblateRow>,
    pub report_path: PathBuf,
}

#[derive(Serialize)]
struct AblateReportRow {
    setting: String,
    variants: Vec<GenerationVariant>,
    records: usize,
    items: usize,
    class_counts: [usize; 2],
    call_count: usize,
    weighted_f1: Option<f64>,
    dir: PathBuf,
}

/// Builds one corpus per prompt setting, sharing a single provider (and
/// script cursor) across all of them, then trains and evaluates a classifier
/// per corpus when an eval dataset is configured. Two-stream settings split
/// the item target evenly: each stream is truncated to its half before the
/// streams are merged and curated together.
pub fn cmd_ablate(config: &PipelineConfig) -> Result<AblateOutcome, PipelineError> {
    config.validate()?;
    let target = config.generation.target_count;
    if target % 2 == 1 {
        return Err(PipelineError::Invalid(format!(
            "ablation needs an even generation.target_count, got {target}"
        )));
    }
    let (client, model_name) = build_client(config)?;
    let eval_set = evaluate::try_load_eval_set(config)?;

    let mut rows = Vec::new();
    for (setting_index, setting) in ABLATE_SETTINGS.iter().enumerate() {
        let seed_base = config
            .generation
            .seed
            .wrapping_add((setting_index as u64) << 32);
        let stream_target = target / setting.variants.len();
        let mut raw_records = Vec::new();
        let mut parse_report = ParseReport::default();
        let mut calls = 0usize;
        for (stream_index, &variant) in setting.variants.iter().enumerate() {
            let stream = generate_stream(
                &client,
                config,
                &model_name,
                variant,
                stream_target,
                seed_base.wrapping_add((stream_index as u64) << 16),
            )?;
            raw_records.extend(finalize_corpus(&stream.raw_records, config, stream_target).records);
            parse_report.merge(&stream.parse_report);
            calls += stream.calls;
        }

        let out_dir = config.output.dir.join("ablate").join(setting.name);
        let outcome = write_corpus_outputs(
            config,
            "ablate",
            setting.variants.to_vec(),
            &raw_records,
            parse_report,
            calls,
            target,
            &out_dir,
            &model_name,
            seed_base,
        )?;

        let metrics = match &eval_set {
            Some(eval_set) => {
                let model = train(&outcome.training, &config.train, &config.features)?;
                save_model(&model, &out_dir.join("model.json"))?;
                let predictions = crate::model::predict_batch(&model, &eval_set.queries());
                let labels: Vec<_> = predictions.iter().map(|p| p.label).collect();
                Some(weighted_metrics(&eval_set.gold(), &labels)?)
            }
            None => None,
        };

        rows.push(AblateRow {
            setting: setting.name.to_string(),
            outcome,
            metrics,
        });
    }

    let report_rows: Vec<AblateReportRow> = rows
        .iter()
        .map(|row| AblateReportRow {
            setting: row.setting.clone(),
            variants: row.outcome.manifest.variants.clone(),
            records: row.outcome.records.len(),
            items: row.outcome.training.m(),
            class_counts: row.outcome.training.class_counts(),
            call_count: row.outcome.manifest.call_count,
            weighted_f1: row.metrics.as_ref().map(|m| m.weighted_f1),
            dir: row
                .outcome
                .records_path
                .parent()
                .expect("corpus dir")
                .to_path_buf(),
        })
        .collect();
    let report_path = config.output.dir.join("ablate").join("report.json");
    write_json(&report_path, &report_rows)?;

    Ok(AblateOutcome { rows, report_path })
}
