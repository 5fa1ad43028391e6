//! Corpus curation: cleans query text, drops empties and duplicates, and
//! turns records into the labeled training set.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::parse::SyntheticRecord;
use crate::prompt::GenerationVariant;
use crate::Label;

/// Where a labeled query came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuerySource {
    Synthetic,
    Clariq,
    Ambignq,
}

/// One training or evaluation item: a query with its clarification-need
/// label (0 answers directly, 1 asks a clarifying question).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledQuery {
    #[serde(rename = "query")]
    pub query_text: String,
    pub label: Label,
    pub source: QuerySource,
    pub record_id: String,
}

/// Counts for one filtering pass; `input` always equals `kept` plus the two
/// drop counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input: usize,
    pub kept: usize,
    pub dropped_empty: usize,
    pub dropped_duplicate: usize,
}

/// Counts for the labeling pass over filtered records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStats {
    pub emitted: usize,
    pub kept: usize,
    /// Items dropped because the same text appeared under both labels.
    pub dropped_conflict: usize,
    /// Same-label repeats dropped, first occurrence kept.
    pub dropped_duplicate: usize,
}

/// Metadata describing how a training set was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_names: Vec<String>,
    pub variants: Vec<GenerationVariant>,
    pub seed: Option<u64>,
    pub filter_stats: Option<FilterStats>,
    pub label_stats: LabelStats,
}

/// The labeled corpus a classifier trains on. No two items share the same
/// case-folded query text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub items: Vec<LabeledQuery>,
    pub provenance: Provenance,
}

impl TrainingSet {
    /// Number of labeled items.
    pub fn m(&self) -> usize {
        self.items.len()
    }

    /// Item counts indexed by label value.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for item in &self.items {
            counts[item.label.as_u8() as usize] += 1;
        }
        counts
    }
}

/// Knobs for `filter_records_with`; the default allows letters, digits,
/// whitespace, and `. , ? ' -` in query text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationOptions {
    /// Additional characters to allow through the query-text whitelist.
    #[serde(default)]
    pub extra_allowed_chars: String,
}

/// Strips disallowed characters and collapses runs of whitespace. Letters
/// and digits in any script pass the whitelist.
pub fn clean_text(raw: &str, extra_allowed: &[char]) -> String {
    let filtered: String = raw
        .chars()
        .filter(|c| {
            c.is_alphabetic()
                || c.is_numeric()
                || c.is_whitespace()
                || matches!(c, '.' | ',' | '?' | '\'' | '-')
                || extra_allowed.contains(c)
        })
        .collect();
    filtered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `filter_records_with` under default options.
pub fn filter_records(records: &[SyntheticRecord]) -> (Vec<SyntheticRecord>, FilterStats) {
    filter_records_with(records, &CurationOptions::default())
}

/// Cleans both query fields of every record, drops records whose required
/// fields became empty, then drops case-folded duplicates of the
/// (specific_query, ambiguous_query) pair, keeping the first occurrence.
/// Running it twice is a no-op on the second pass.
pub fn filter_records_with(
    records: &[SyntheticRecord],
    options: &CurationOptions,
) -> (Vec<SyntheticRecord>, FilterStats) {
    let extra: Vec<char> = options.extra_allowed_chars.chars().collect();
    let mut stats = FilterStats {
        input: records.len(),
        ..FilterStats::default()
    };
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    for record in records {
        let mut record = record.clone();
        record.specific_query = record
            .specific_query
            .as_deref()
            .map(|q| clean_text(q, &extra));
        record.ambiguous_query = record
            .ambiguous_query
            .as_deref()
            .map(|q| clean_text(q, &extra));
        if !record.is_well_formed() {
            stats.dropped_empty += 1;
            continue;
        }
        let key = (
            record.specific_query.as_deref().map(str::to_lowercase),
            record.ambiguous_query.as_deref().map(str::to_lowercase),
        );
        if !seen.insert(key) {
            stats.dropped_duplicate += 1;
            continue;
        }
        kept.push(record);
    }
    stats.kept = kept.len();
    (kept, stats)
}

/// Identifier assigned to the record at `index` of a persisted corpus.
pub fn record_id_for_index(index: usize) -> String {
    format!("r{index:06}")
}

/// Emits one labeled item per query field: label 0 from specific queries,
/// label 1 from ambiguous ones. Texts appearing under both labels are
/// dropped from both sides; same-label repeats keep the first occurrence.
pub fn label_records(records: &[SyntheticRecord]) -> TrainingSet {
    let mut emitted: Vec<LabeledQuery> = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let record_id = record_id_for_index(index);
        if let Some(q) = &record.specific_query {
            emitted.push(LabeledQuery {
                query_text: q.clone(),
                label: Label::Specific,
                source: QuerySource::Synthetic,
                record_id: record_id.clone(),
            });
        }
        if let Some(q) = &record.ambiguous_query {
            emitted.push(LabeledQuery {
                query_text: q.clone(),
                label: Label::Ambiguous,
                source: QuerySource::Synthetic,
                record_id,
            });
        }
    }

    let mut labels_seen: HashMap<String, [bool; 2]> = HashMap::new();
    for item in &emitted {
        let entry = labels_seen
            .entry(item.query_text.to_lowercase())
            .or_insert([false; 2]);
        entry[item.label.as_u8() as usize] = true;
    }

    let mut stats = LabelStats {
        emitted: emitted.len(),
        ..LabelStats::default()
    };
    let mut taken = HashSet::new();
    let mut items = Vec::new();
    for item in emitted {
        let key = item.query_text.to_lowercase();
        if labels_seen[&key] == [true, true] {
            stats.dropped_conflict += 1;
            continue;
        }
        if !taken.insert(key) {
            stats.dropped_duplicate += 1;
            continue;
        }
        items.push(item);
    }
    stats.kept = items.len();

    let mut model_names = Vec::new();
    let mut variants = Vec::new();
    for record in records {
        if !model_names.contains(&record.model_name) {
            model_names.push(record.model_name.clone());
        }
        if !variants.contains(&record.variant) {
            variants.push(record.variant);
        }
    }

    TrainingSet {
        items,
        provenance: Provenance {
            model_names,
            variants,
            seed: None,
            filter_stats: None,
            label_stats: stats,
        },
    }
}
