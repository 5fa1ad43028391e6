//! Parsing of raw LLM generation output into structured records, tolerant of
//! the formatting drift real models produce.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::prompt::{GenerationVariant, QueryKind};

/// One generated item: the topic and information need it grew from (when the
/// variant produces them) and the query or counterfactual query pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub topic: Option<String>,
    pub information_need: Option<String>,
    pub specific_query: Option<String>,
    pub ambiguous_query: Option<String>,
    pub variant: GenerationVariant,
    pub model_name: String,
    pub created_at: DateTime<Utc>,
}

impl SyntheticRecord {
    /// Checks the per-variant field contract: fields the variant produces are
    /// present and non-blank, fields it does not produce are absent.
    pub fn is_well_formed(&self) -> bool {
        let present = |s: &Option<String>| s.as_deref().is_some_and(|v| !v.trim().is_empty());
        let v = self.variant;
        let need_ok = if v.has_need_steps() {
            present(&self.topic) && present(&self.information_need)
        } else {
            self.topic.is_none() && self.information_need.is_none()
        };
        let specific_ok = if v.generates_specific() {
            present(&self.specific_query)
        } else {
            self.specific_query.is_none()
        };
        let ambiguous_ok = if v.generates_ambiguous() {
            present(&self.ambiguous_query)
        } else {
            self.ambiguous_query.is_none()
        };
        need_ok && specific_ok && ambiguous_ok
    }
}

/// Why a candidate block was dropped instead of parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    MissingField,
}

/// Bookkeeping for one parse pass: every candidate block is either parsed or
/// dropped with a reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub records_parsed: usize,
    pub records_dropped: usize,
    pub drop_reasons: BTreeMap<DropReason, usize>,
}

impl ParseReport {
    pub fn merge(&mut self, other: &ParseReport) {
        self.records_parsed += other.records_parsed;
        self.records_dropped += other.records_dropped;
        for (reason, count) in &other.drop_reasons {
            *self.drop_reasons.entry(*reason).or_insert(0) += count;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Topic,
    Need,
    Specific,
    Ambiguous,
}

impl Field {
    fn label(self) -> &'static str {
        match self {
            Field::Topic => "Topic",
            Field::Need => "User information need",
            Field::Specific => "Specific query",
            Field::Ambiguous => "Ambiguous query",
        }
    }
}

/// Fields a variant's output carries, in the order its format line lists
/// them. The first entry is the marker that opens a new block.
fn fields_for(variant: GenerationVariant) -> &'static [Field] {
    use Field::*;
    match variant {
        GenerationVariant::PairSpecificFirst => &[Topic, Need, Specific, Ambiguous],
        GenerationVariant::PairAmbiguousFirst => &[Topic, Need, Ambiguous, Specific],
        GenerationVariant::Chain(QueryKind::Specific) => &[Topic, Need, Specific],
        GenerationVariant::Chain(QueryKind::Ambiguous) => &[Topic, Need, Ambiguous],
        GenerationVariant::Direct(QueryKind::Specific) => &[Specific],
        GenerationVariant::Direct(QueryKind::Ambiguous) => &[Ambiguous],
    }
}

fn label_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)(?:^|[\n,;])[ \t]*(?:(?:\d{1,3}[.)]|[-*•])[ \t]*)*(topic|user information need|specific query|ambiguous query)[ \t]*\d{0,3}[ \t]*:",
        )
        .expect("label pattern compiles")
    })
}

fn strip_pair(s: &str) -> &str {
    const PAIRS: [(char, char); 6] = [
        ('"', '"'),
        ('\'', '\''),
        ('\u{201c}', '\u{201d}'),
        ('\u{2018}', '\u{2019}'),
        ('`', '`'),
        ('*', '*'),
    ];
    for (open, close) in PAIRS {
        let edges = open.len_utf8() + close.len_utf8();
        if s.len() >= edges && s.starts_with(open) && s.ends_with(close) {
            return &s[open.len_utf8()..s.len() - close.len_utf8()];
        }
    }
    s
}

fn clean_value(raw: &str) -> String {
    let mut value = raw.trim().trim_end_matches([',', ';']).trim_end();
    loop {
        let stripped = strip_pair(value).trim();
        if stripped.len() == value.len() {
            break;
        }
        value = stripped;
    }
    value.to_string()
}

/// Extracts records from raw generation output. Text is split into candidate
/// blocks at each occurrence of the variant's leading field label; within a
/// block the labeled fields are matched case-insensitively in any order and
/// any line layout, first occurrence winning. Blocks missing a required field
/// (or where one is blank after trimming) are dropped, never repaired.
pub fn parse_generation_output(
    text: &str,
    variant: GenerationVariant,
    model_name: &str,
) -> (Vec<SyntheticRecord>, ParseReport) {
    let text = text.replace("\r\n", "\n");
    let fields = fields_for(variant);
    let lead = fields[0];

    let matches: Vec<(Field, usize, usize)> = label_regex()
        .captures_iter(&text)
        .map(|caps| {
            let full = caps.get(0).expect("match");
            let field = match caps.get(1).expect("label").as_str().to_lowercase().as_str() {
                "topic" => Field::Topic,
                "user information need" => Field::Need,
                "specific query" => Field::Specific,
                _ => Field::Ambiguous,
            };
            (field, full.start(), full.end())
        })
        .collect();

    let mut blocks: Vec<Vec<(Field, String)>> = Vec::new();
    for (i, &(field, _, value_start)) in matches.iter().enumerate() {
        let value_end = matches.get(i + 1).map_or(text.len(), |next| next.1);
        let value = clean_value(&text[value_start..value_end]);
        if field == lead {
            blocks.push(vec![(field, value)]);
        } else if let Some(block) = blocks.last_mut() {
            if fields.contains(&field) && !block.iter().any(|(f, _)| *f == field) {
                block.push((field, value));
            }
        }
    }

    let created_at = Utc::now();
    let mut records = Vec::new();
    let mut report = ParseReport::default();
    for block in blocks {
        let get = |f: Field| {
            block
                .iter()
                .find(|(bf, _)| *bf == f)
                .map(|(_, v)| v.clone())
        };
        let complete = fields
            .iter()
            .all(|f| get(*f).is_some_and(|v| !v.is_empty()));
        if complete {
            records.push(SyntheticRecord {
                topic: get(Field::Topic),
                information_need: get(Field::Need),
                specific_query: get(Field::Specific),
                ambiguous_query: get(Field::Ambiguous),
                variant,
                model_name: model_name.to_string(),
                created_at,
            });
            report.records_parsed += 1;
        } else {
            report.records_dropped += 1;
            *report
                .drop_reasons
                .entry(DropReason::MissingField)
                .or_insert(0) += 1;
        }
    }
    (records, report)
}

/// Serializes a record back into the output format its variant's prompt asks
/// for: labeled fields on one line, comma separated, in the variant's order.
pub fn render_record(record: &SyntheticRecord) -> String {
    let mut parts = Vec::new();
    for field in fields_for(record.variant) {
        let value = match field {
            Field::Topic => record.topic.as_deref(),
            Field::Need => record.information_need.as_deref(),
            Field::Specific => record.specific_query.as_deref(),
            Field::Ambiguous => record.ambiguous_query.as_deref(),
        };
        if let Some(v) = value {
            parts.push(format!("{}: {}", field.label(), v));
        }
    }
    parts.join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PAIR: GenerationVariant = GenerationVariant::PairSpecificFirst;

    fn sample_record(variant: GenerationVariant, tag: &str) -> SyntheticRecord {
        let need_steps = variant.has_need_steps();
        SyntheticRecord {
            topic: need_steps.then(|| format!("topic {tag}")),
            information_need: need_steps.then(|| format!("need about {tag}")),
            specific_query: variant
                .generates_specific()
                .then(|| format!("specific {tag} in June 2024")),
            ambiguous_query: variant
                .generates_ambiguous()
                .then(|| format!("vague {tag}")),
            variant,
            model_name: "mock-model".to_string(),
            created_at: Utc::now(),
        }
    }

    #[test]
    fn parses_single_comma_separated_block() {
        let text = "Topic: travel, User information need: find cheap flights to Rome in June, \
                    Specific query: cheap flights to Rome June 2024, Ambiguous query: flights";
        let (records, report) = parse_generation_output(text, PAIR, "m");
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.topic.as_deref(), Some("travel"));
        assert_eq!(
            r.information_need.as_deref(),
            Some("find cheap flights to Rome in June")
        );
        assert_eq!(
            r.specific_query.as_deref(),
            Some("cheap flights to Rome June 2024")
        );
        assert_eq!(r.ambiguous_query.as_deref(), Some("flights"));
        assert_eq!(r.model_name, "m");
        assert!(r.is_well_formed());
        assert_eq!(report.records_parsed, 1);
        assert_eq!(report.records_dropped, 0);
    }

    #[test]
    fn empty_input_yields_empty_report() {
        let (records, report) = parse_generation_output("", PAIR, "m");
        assert!(records.is_empty());
        assert_eq!(report, ParseReport::default());
    }

    #[test]
    fn block_missing_required_field_is_dropped_with_reason() {
        let text = "Topic: a, User information need: b, Specific query: c, Ambiguous query: d\n\
                    Topic: e, User information need: f, Specific query: g";
        let (records, report) = parse_generation_output(text, PAIR, "m");
        assert_eq!(records.len(), 1);
        assert_eq!(report.records_parsed, 1);
        assert_eq!(report.records_dropped, 1);
        assert_eq!(report.drop_reasons[&DropReason::MissingField], 1);
    }

    #[test]
    fn blank_field_counts_as_missing() {
        let text = "Topic: a, User information need: , Specific query: c, Ambiguous query: d";
        let (records, report) = parse_generation_output(text, PAIR, "m");
        assert!(records.is_empty());
        assert_eq!(report.records_dropped, 1);
    }

    #[test]
    fn multiline_layout_with_numbering_and_bullets() {
        let text = "Here are the results:\n\
                    1. Topic: astronomy\n\
                    - User information need: when the next lunar eclipse happens\n\
                    * Specific query: next lunar eclipse date 2025\n\
                    2) Ambiguous query: eclipse\n\
                    \n\
                    2. TOPIC 2: cooking\n\
                    USER INFORMATION NEED 2: bake sourdough at home\n\
                    Specific Query 2: sourdough starter recipe for beginners\n\
                    Ambiguous Query 2: bread";
        let (records, report) = parse_generation_output(text, PAIR, "m");
        assert_eq!(report.records_parsed, 2);
        assert_eq!(records[0].topic.as_deref(), Some("astronomy"));
        assert_eq!(records[0].ambiguous_query.as_deref(), Some("eclipse"));
        assert_eq!(records[1].topic.as_deref(), Some("cooking"));
        assert_eq!(
            records[1].specific_query.as_deref(),
            Some("sourdough starter recipe for beginners")
        );
    }

    #[test]
    fn quotes_and_emphasis_are_stripped_from_values() {
        let text = "Topic: \"travel\", User information need: 'planning', \
                    Specific query: “cheap flights”, Ambiguous query: **flights**";
        let (records, _) = parse_generation_output(text, PAIR, "m");
        assert_eq!(records[0].topic.as_deref(), Some("travel"));
        assert_eq!(records[0].information_need.as_deref(), Some("planning"));
        assert_eq!(records[0].specific_query.as_deref(), Some("cheap flights"));
        assert_eq!(records[0].ambiguous_query.as_deref(), Some("flights"));
    }

    #[test]
    fn field_order_deviations_are_accepted() {
        let text = "Topic: t, Ambiguous query: vague, User information need: n, Specific query: s";
        let (records, report) = parse_generation_output(text, PAIR, "m");
        assert_eq!(report.records_parsed, 1);
        assert_eq!(records[0].specific_query.as_deref(), Some("s"));
        assert_eq!(records[0].ambiguous_query.as_deref(), Some("vague"));
    }

    #[test]
    fn first_occurrence_of_a_field_wins_within_a_block() {
        let text = "Topic: t, User information need: n, Specific query: first, \
                    Specific query: second, Ambiguous query: a";
        let (records, _) = parse_generation_output(text, PAIR, "m");
        assert_eq!(records[0].specific_query.as_deref(), Some("first"));
    }

    #[test]
    fn direct_variant_splits_on_query_label() {
        let variant = GenerationVariant::Direct(QueryKind::Specific);
        let text = "Sure, here you go:\n\
                    Specific query: best laptops under 800 dollars 2024\n\
                    Specific query: weather in Oslo tomorrow morning";
        let (records, report) = parse_generation_output(text, variant, "m");
        assert_eq!(report.records_parsed, 2);
        assert!(records.iter().all(|r| r.topic.is_none()));
        assert!(records.iter().all(|r| r.is_well_formed()));
        assert_eq!(
            records[1].specific_query.as_deref(),
            Some("weather in Oslo tomorrow morning")
        );
    }

    #[test]
    fn irrelevant_labels_terminate_values_without_contaminating() {
        let variant = GenerationVariant::Chain(QueryKind::Specific);
        let text = "Topic: t, User information need: n, Specific query: s, Ambiguous query: stray";
        let (records, _) = parse_generation_output(text, variant, "m");
        assert_eq!(records[0].specific_query.as_deref(), Some("s"));
        assert_eq!(records[0].ambiguous_query, None);
        assert!(records[0].is_well_formed());
    }

    #[test]
    fn rendered_records_parse_back_for_every_variant() {
        for variant in GenerationVariant::ALL {
            let original = sample_record(variant, "alpha");
            let text = render_record(&original);
            let (records, report) = parse_generation_output(&text, variant, "mock-model");
            assert_eq!(report.records_parsed, 1, "{variant}: {text}");
            let mut parsed = records.into_iter().next().unwrap();
            parsed.created_at = original.created_at;
            assert_eq!(parsed, original, "{variant}");
        }
    }

    #[test]
    fn random_records_round_trip_in_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let charset: Vec<char> = ('a'..='z')
            .chain('0'..='9')
            .chain([' ', '.', '?'])
            .collect();
        for variant in GenerationVariant::ALL {
            let originals: Vec<SyntheticRecord> = (0..50)
                .map(|i| {
                    let mut word = |len: usize| -> String {
                        let body: String = (0..len)
                            .map(|_| charset[rng.gen_range(0..charset.len())])
                            .collect();
                        format!("x{}", body.trim())
                    };
                    let need_steps = variant.has_need_steps();
                    SyntheticRecord {
                        topic: need_steps.then(|| word(8)),
                        information_need: need_steps.then(|| word(20)),
                        specific_query: variant
                            .generates_specific()
                            .then(|| format!("{} s{i}", word(14))),
                        ambiguous_query: variant
                            .generates_ambiguous()
                            .then(|| format!("{} a{i}", word(6))),
                        variant,
                        model_name: "m".to_string(),
                        created_at: Utc::now(),
                    }
                })
                .collect();
            let text = originals
                .iter()
                .map(render_record)
                .collect::<Vec<_>>()
                .join("\n");
            let (records, report) = parse_generation_output(&text, variant, "m");
            assert_eq!(report.records_parsed, originals.len());
            for (mut parsed, original) in records.into_iter().zip(originals) {
                parsed.created_at = original.created_at;
                assert_eq!(parsed, original);
            }
        }
    }

    #[test]
    fn extracted_values_are_substrings_of_the_input() {
        let text = "1. Topic: deep sea creatures\n\
                    User information need: identify bioluminescent fish species\n\
                    Specific query: \"anglerfish habitat depth range\"\n\
                    Ambiguous query: fish";
        let (records, _) = parse_generation_output(text, PAIR, "m");
        let r = &records[0];
        for value in [
            r.topic.as_deref(),
            r.information_need.as_deref(),
            r.specific_query.as_deref(),
            r.ambiguous_query.as_deref(),
        ] {
            assert!(text.contains(value.unwrap()));
        }
    }

    #[test]
    fn appending_a_well_formed_block_adds_exactly_one_record() {
        let bases = [
            "",
            "garbage preamble",
            "Topic: incomplete, User information need: n",
            "Topic: a, User information need: b, Specific query: c, Ambiguous query: d",
        ];
        let block = "Topic: t2, User information need: n2, Specific query: s2, Ambiguous query: a2";
        for base in bases {
            let (_, before) = parse_generation_output(base, PAIR, "m");
            let appended = format!("{base}\n{block}");
            let (_, after) = parse_generation_output(&appended, PAIR, "m");
            assert_eq!(after.records_parsed, before.records_parsed + 1, "{base:?}");
        }
    }

    #[test]
    fn garbage_never_panics_and_reports_stay_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let alphabet: Vec<char> = "Topic:,User information need:SpecificAmbiguous query \n\"'*123."
            .chars()
            .collect();
        for _ in 0..300 {
            let len = rng.gen_range(0..200);
            let text: String = (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect();
            for variant in GenerationVariant::ALL {
                let (records, report) = parse_generation_output(&text, variant, "m");
                assert_eq!(records.len(), report.records_parsed);
                assert_eq!(
                    report.records_dropped,
                    report.drop_reasons.values().sum::<usize>()
                );
                assert!(records.iter().all(|r| r.is_well_formed()));
            }
        }
    }

    #[test]
    fn reports_merge_by_summing() {
        let (_, mut a) = parse_generation_output(
            "Topic: a, User information need: b, Specific query: c, Ambiguous query: d",
            PAIR,
            "m",
        );
        let (_, b) = parse_generation_output("Topic: x, User information need: y", PAIR, "m");
        a.merge(&b);
        assert_eq!(a.records_parsed, 1);
        assert_eq!(a.records_dropped, 1);
        assert_eq!(a.drop_reasons[&DropReason::MissingField], 1);
    }
}
