//! Corpus persistence and evaluation-data ingestion: line-delimited JSON
//! corpus files, ClariQ and AmbigNQ loaders with their label mappings, and
//! seeded few-shot demonstration sampling.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::curate::{LabeledQuery, QuerySource, TrainingSet};
use crate::parse::SyntheticRecord;
use crate::Label;

pub const CORPUS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}:{line}: clarification_need value '{value}' outside 1-4")]
    Label {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("few-shot count {got} is not supported; use 2, 4, or 6")]
    InvalidShotCount { got: usize },
    #[error("need {need} items to sample from but only have {have}")]
    InsufficientData { have: usize, need: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), DataError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Metadata header of a records corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsMeta {
    pub schema_version: u32,
    pub generation_config: Value,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    record_id: String,
    #[serde(flatten)]
    record: SyntheticRecord,
}

fn check_schema_version(path: &Path, version: u32) -> Result<(), DataError> {
    if version != CORPUS_SCHEMA_VERSION {
        return Err(format_err(
            path,
            1,
            format!("unsupported schema_version {version}, expected {CORPUS_SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

/// Writes a records corpus: a metadata line, then one record per line with
/// its positional identifier.
pub fn write_records(
    records: &[SyntheticRecord],
    generation_config: Value,
    path: &Path,
) -> Result<(), DataError> {
    let meta = RecordsMeta {
        schema_version: CORPUS_SCHEMA_VERSION,
        generation_config,
    };
    let mut out = serde_json::to_string(&meta).expect("meta serializes");
    out.push('\n');
    for (index, record) in records.iter().enumerate() {
        let line = RecordLine {
            record_id: crate::curate::record_id_for_index(index),
            record: record.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("record serializes"));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Reads a records corpus written by `write_records`.
pub fn read_records(path: &Path) -> Result<(Vec<SyntheticRecord>, RecordsMeta), DataError> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let (_, meta_line) = lines
        .next()
        .ok_or_else(|| format_err(path, 1, "missing metadata line"))?;
    let meta: RecordsMeta = serde_json::from_str(meta_line)
        .map_err(|e| format_err(path, 1, format!("bad metadata line: {e}")))?;
    check_schema_version(path, meta.schema_version)?;
    let mut records = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(line)
            .map_err(|e| format_err(path, index + 1, format!("bad record line: {e}")))?;
        records.push(parsed.record);
    }
    Ok((records, meta))
}

#[derive(Serialize, Deserialize)]
struct TrainingMeta {
    schema_version: u32,
    m: usize,
    provenance: crate::curate::Provenance,
}

/// Writes a labeled training set: a metadata line carrying the provenance
/// and item count, then one labeled query per line.
pub fn write_training_set(set: &TrainingSet, path: &Path) -> Result<(), DataError> {
    let meta = TrainingMeta {
        schema_version: CORPUS_SCHEMA_VERSION,
        m: set.m(),
        provenance: set.provenance.clone(),
    };
    let mut out = serde_json::to_string(&meta).expect("meta serializes");
    out.push('\n');
    for item in &set.items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Reads a training set written by `write_training_set`; the reverse of it.
pub fn read_training_set(path: &Path) -> Result<TrainingSet, DataError> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let (_, meta_line) = lines
        .next()
        .ok_or_else(|| format_err(path, 1, "missing metadata line"))?;
    let meta: TrainingMeta = serde_json::from_str(meta_line)
        .map_err(|e| format_err(path, 1, format!("bad metadata line: {e}")))?;
    check_schema_version(path, meta.schema_version)?;
    let mut items = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let item: LabeledQuery = serde_json::from_str(line)
            .map_err(|e| format_err(path, index + 1, format!("bad item line: {e}")))?;
        items.push(item);
    }
    if items.len() != meta.m {
        return Err(format_err(
            path,
            1,
            format!(
                "metadata declares m={} but file has {} items",
                meta.m,
                items.len()
            ),
        ));
    }
    Ok(TrainingSet {
        items,
        provenance: meta.provenance,
    })
}

/// A labeled evaluation set with its class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub items: Vec<LabeledQuery>,
    pub name: String,
    /// (ambiguous, unambiguous) item counts.
    pub counts: (usize, usize),
}

impl EvalSet {
    pub fn new(name: impl Into<String>, items: Vec<LabeledQuery>) -> EvalSet {
        let ambiguous = items.iter().filter(|i| i.label == Label::Ambiguous).count();
        let unambiguous = items.len() - ambiguous;
        EvalSet {
            items,
            name: name.into(),
            counts: (ambiguous, unambiguous),
        }
    }

    pub fn from_training_set(name: impl Into<String>, set: &TrainingSet) -> EvalSet {
        EvalSet::new(name, set.items.clone())
    }

    pub fn gold(&self) -> Vec<Label> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn queries(&self) -> Vec<String> {
        self.items.iter().map(|i| i.query_text.clone()).collect()
    }

    /// Mean whitespace-token count per query, for display only.
    pub fn avg_tokens(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        let total: usize = self
            .items
            .iter()
            .map(|i| i.query_text.split_whitespace().count())
            .sum();
        total as f64 / self.items.len() as f64
    }
}

/// Loads and concatenates ClariQ tab-separated splits. Clarification-need
/// annotations collapse to binary: 1 means answer directly (label 0), 2-4
/// mean ask (label 1). Repeated rows for the same request (one per facet)
/// are collapsed so each annotated request appears once.
pub fn load_clariq<P: AsRef<Path>>(paths: &[P]) -> Result<EvalSet, DataError> {
    let mut items: Vec<LabeledQuery> = Vec::new();
    let mut seen: HashSet<(String, Label)> = HashSet::new();
    for path in paths {
        let path = path.as_ref();
        let text = read_file(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| format_err(path, 1, "empty file"))?;
        let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
        let request_col = columns
            .iter()
            .position(|c| *c == "initial_request")
            .ok_or_else(|| DataError::Schema {
                path: path.to_path_buf(),
                message: "missing column initial_request".into(),
            })?;
        let need_col = columns
            .iter()
            .position(|c| *c == "clarification_need")
            .ok_or_else(|| DataError::Schema {
                path: path.to_path_buf(),
                message: "missing column clarification_need".into(),
            })?;
        for (index, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let max_col = request_col.max(need_col);
            if fields.len() <= max_col {
                return Err(format_err(
                    path,
                    index + 1,
                    format!(
                        "row has {} columns, need at least {}",
                        fields.len(),
                        max_col + 1
                    ),
                ));
            }
            let request = fields[request_col].trim();
            if request.is_empty() {
                continue;
            }
            let raw_need = fields[need_col].trim();
            let label = match raw_need {
                "1" => Label::Specific,
                "2" | "3" | "4" => Label::Ambiguous,
                other => {
                    return Err(DataError::Label {
                        path: path.to_path_buf(),
                        line: index + 1,
                        value: other.to_string(),
                    })
                }
            };
            if seen.insert((request.to_string(), label)) {
                items.push(LabeledQuery {
                    query_text: request.to_string(),
                    label,
                    source: QuerySource::Clariq,
                    record_id: format!("clariq-{:04}", items.len()),
                });
            }
        }
    }
    Ok(EvalSet::new("clariq", items))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbigSplit {
    Validation,
    Train,
}

impl AmbigSplit {
    fn name(self) -> &'static str {
        match self {
            AmbigSplit::Validation => "ambignq-validation",
            AmbigSplit::Train => "ambignq-train",
        }
    }
}

#[derive(Deserialize)]
struct AmbigEntry {
    #[serde(default)]
    id: Option<String>,
    question: String,
    annotations: Vec<AmbigAnnotation>,
}

#[derive(Deserialize)]
#[serde(tag = "type")]
enum AmbigAnnotation {
    #[serde(rename = "singleAnswer")]
    SingleAnswer {},
    #[serde(rename = "multipleQAs")]
    MultipleQAs {
        #[serde(rename = "qaPairs")]
        qa_pairs: Vec<Value>,
    },
}

impl AmbigAnnotation {
    fn qa_pair_count(&self) -> usize {
        match self {
            AmbigAnnotation::SingleAnswer {} => 1,
            AmbigAnnotation::MultipleQAs { qa_pairs } => qa_pairs.len(),
        }
    }
}

/// Loads one AmbigNQ split from its JSON file. A question linked to more
/// than one question-answer pair across its annotations is labeled
/// ambiguous (1); exactly one pair means unambiguous (0).
pub fn load_ambignq(path: &Path, split: AmbigSplit) -> Result<EvalSet, DataError> {
    let text = read_file(path)?;
    let entries: Vec<AmbigEntry> = serde_json::from_str(&text).map_err(|e| DataError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let items = entries
        .into_iter()
        .enumerate()
        .map(|(index, entry)| {
            let pairs: usize = entry
                .annotations
                .iter()
                .map(AmbigAnnotation::qa_pair_count)
                .sum();
            LabeledQuery {
                query_text: entry.question,
                label: if pairs > 1 {
                    Label::Ambiguous
                } else {
                    Label::Specific
                },
                source: QuerySource::Ambignq,
                record_id: entry.id.unwrap_or_else(|| format!("ambignq-{index:05}")),
            }
        })
        .collect();
    Ok(EvalSet::new(split.name(), items))
}

/// Samples `k` demonstration examples without replacement, deterministically
/// for a given seed.
pub fn sample_few_shot(
    train: &EvalSet,
    k: usize,
    seed: u64,
) -> Result<Vec<(String, Label)>, DataError> {
    if !matches!(k, 2 | 4 | 6) {
        return Err(DataError::InvalidShotCount { got: k });
    }
    if train.items.len() < k {
        return Err(DataError::InsufficientData {
            have: train.items.len(),
            need: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, train.items.len(), k);
    Ok(picks
        .iter()
        .map(|i| (train.items[i].query_text.clone(), train.items[i].label))
        .collect())
}
