//! Prompt construction from versioned template assets: six generation
//! variants for synthetic query batches, plus the yes/no ambiguity-predictor
//! prompt with optional demonstrations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::Label;

const PAIR_SPECIFIC_FIRST: &str = include_str!("../assets/prompts/pair_specific_first.txt");
const PAIR_AMBIGUOUS_FIRST: &str = include_str!("../assets/prompts/pair_ambiguous_first.txt");
const CHAIN_SPECIFIC: &str = include_str!("../assets/prompts/chain_specific.txt");
const CHAIN_AMBIGUOUS: &str = include_str!("../assets/prompts/chain_ambiguous.txt");
const DIRECT_SPECIFIC: &str = include_str!("../assets/prompts/direct_specific.txt");
const DIRECT_AMBIGUOUS: &str = include_str!("../assets/prompts/direct_ambiguous.txt");
const PREDICTOR: &str = include_str!("../assets/prompts/predictor.txt");

/// Which query type a single-target variant produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    Specific,
    Ambiguous,
}

/// Prompting strategy for one generation run.
///
/// Pair variants derive a specific and an ambiguous query from the same topic
/// and information need, differing only in which query type is requested
/// first. Chain variants keep the topic and information-need steps but target
/// a single query type. Direct variants ask for queries with no intermediate
/// steps at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenerationVariant {
    PairSpecificFirst,
    PairAmbiguousFirst,
    Chain(QueryKind),
    Direct(QueryKind),
}

impl GenerationVariant {
    pub const ALL: [Self; 6] = [
        Self::PairSpecificFirst,
        Self::PairAmbiguousFirst,
        Self::Chain(QueryKind::Specific),
        Self::Chain(QueryKind::Ambiguous),
        Self::Direct(QueryKind::Specific),
        Self::Direct(QueryKind::Ambiguous),
    ];

    /// Canonical name used on the command line and in corpus metadata.
    pub fn name(self) -> &'static str {
        match self {
            Self::PairSpecificFirst => "pair-specific-first",
            Self::PairAmbiguousFirst => "pair-ambiguous-first",
            Self::Chain(QueryKind::Specific) => "chain-specific",
            Self::Chain(QueryKind::Ambiguous) => "chain-ambiguous",
            Self::Direct(QueryKind::Specific) => "direct-specific",
            Self::Direct(QueryKind::Ambiguous) => "direct-ambiguous",
        }
    }

    /// True when the variant yields both queries of a counterfactual pair.
    pub fn is_pair(self) -> bool {
        matches!(self, Self::PairSpecificFirst | Self::PairAmbiguousFirst)
    }

    pub fn generates_specific(self) -> bool {
        self.is_pair()
            || matches!(
                self,
                Self::Chain(QueryKind::Specific) | Self::Direct(QueryKind::Specific)
            )
    }

    pub fn generates_ambiguous(self) -> bool {
        self.is_pair()
            || matches!(
                self,
                Self::Chain(QueryKind::Ambiguous) | Self::Direct(QueryKind::Ambiguous)
            )
    }

    /// True when the prompt walks through topic and information-need steps.
    pub fn has_need_steps(self) -> bool {
        !matches!(self, Self::Direct(_))
    }

    fn template(self) -> &'static str {
        match self {
            Self::PairSpecificFirst => PAIR_SPECIFIC_FIRST,
            Self::PairAmbiguousFirst => PAIR_AMBIGUOUS_FIRST,
            Self::Chain(QueryKind::Specific) => CHAIN_SPECIFIC,
            Self::Chain(QueryKind::Ambiguous) => CHAIN_AMBIGUOUS,
            Self::Direct(QueryKind::Specific) => DIRECT_SPECIFIC,
            Self::Direct(QueryKind::Ambiguous) => DIRECT_AMBIGUOUS,
        }
    }
}

impl fmt::Display for GenerationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown generation variant '{0}'; expected one of pair-specific-first, pair-ambiguous-first, chain-specific, chain-ambiguous, direct-specific, direct-ambiguous")]
pub struct VariantParseError(pub String);

impl FromStr for GenerationVariant {
    type Err = VariantParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|v| v.name() == s)
            .copied()
            .ok_or_else(|| VariantParseError(s.to_string()))
    }
}

impl Serialize for GenerationVariant {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for GenerationVariant {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What a built prompt is for, recorded alongside the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptPurpose {
    Generation(GenerationVariant),
    Predictor { shots: usize },
}

/// A fully rendered prompt ready to send to a provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub text: String,
    pub purpose: PromptPurpose,
    /// Records requested per call; always 1 for predictor prompts.
    pub batch_size: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("demonstration count {got} is not supported; use 0, 2, 4, or 6")]
    InvalidShotCount { got: usize },
}

/// Demonstration counts the few-shot predictor prompt accepts.
pub const PREDICTOR_SHOT_COUNTS: [usize; 4] = [0, 2, 4, 6];

/// Renders the batch-generation prompt for `variant`, requesting
/// `batch_size` records. Panics if `batch_size` is zero.
pub fn build_generation_prompt(variant: GenerationVariant, batch_size: usize) -> PromptText {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let text = variant
        .template()
        .trim_end_matches('\n')
        .replace("{count}", &batch_size.to_string());
    PromptText {
        text,
        purpose: PromptPurpose::Generation(variant),
        batch_size,
    }
}

fn answer_word(label: Label) -> &'static str {
    match label {
        Label::Specific => "no",
        Label::Ambiguous => "yes",
    }
}

/// Renders the yes/no ambiguity-prediction prompt for `query`. Each
/// demonstration is rendered as the same instruction over its own query
/// followed by the gold answer, all placed before the target block.
pub fn build_predictor_prompt(
    query: &str,
    demonstrations: &[(String, Label)],
) -> Result<PromptText, PromptError> {
    if !PREDICTOR_SHOT_COUNTS.contains(&demonstrations.len()) {
        return Err(PromptError::InvalidShotCount {
            got: demonstrations.len(),
        });
    }
    let template = PREDICTOR.trim_end_matches('\n');
    let mut text = String::new();
    for (demo_query, label) in demonstrations {
        text.push_str(&template.replace("{query}", demo_query));
        text.push('\n');
        text.push_str(answer_word(*label));
        text.push_str("\n\n");
    }
    text.push_str(&template.replace("{query}", query));
    Ok(PromptText {
        text,
        purpose: PromptPurpose::Predictor {
            shots: demonstrations.len(),
        },
        batch_size: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPECTED_PAIR_PROMPT: &str = "Instruction: Follow the instruction step by step. 1. Come up with 10 topics. 2. Based on the topics, generate 10 corresponding user information needs. 3. Based on the user information needs, generate 10 corresponding specific queries. 4. Based on the user information needs, generate 10 corresponding ambiguous queries.\nThe output format should be Topic: {topic}, User information need: {user information need}, Specific query: {specific query}, Ambiguous query: {ambiguous query}.";

    const EXPECTED_PREDICTOR_PROMPT: &str = "Instruction: Given the user query:best city to visit, predict if the query is vague or not. Please only return yes or no.";

    #[test]
    fn pair_specific_first_at_ten_matches_reference_text() {
        let prompt = build_generation_prompt(GenerationVariant::PairSpecificFirst, 10);
        assert_eq!(prompt.text, EXPECTED_PAIR_PROMPT);
        assert_eq!(prompt.batch_size, 10);
    }

    #[test]
    fn ambiguous_first_swaps_query_steps_and_format_slots() {
        let prompt = build_generation_prompt(GenerationVariant::PairAmbiguousFirst, 10);
        assert!(prompt.text.contains(
            "3. Based on the user information needs, generate 10 corresponding ambiguous queries. \
             4. Based on the user information needs, generate 10 corresponding specific queries."
        ));
        assert!(prompt
            .text
            .ends_with("Ambiguous query: {ambiguous query}, Specific query: {specific query}."));
        let specific_first = build_generation_prompt(GenerationVariant::PairSpecificFirst, 10);
        let swapped = specific_first
            .text
            .replace("specific", "\u{0}")
            .replace("ambiguous", "specific")
            .replace("Ambiguous", "\u{1}")
            .replace("Specific", "Ambiguous")
            .replace('\u{0}', "ambiguous")
            .replace('\u{1}', "Specific");
        assert_eq!(prompt.text, swapped);
    }

    #[test]
    fn chain_variants_keep_need_steps_for_one_query_type() {
        let prompt = build_generation_prompt(GenerationVariant::Chain(QueryKind::Specific), 10);
        assert!(prompt.text.contains("1. Come up with 10 topics."));
        assert!(prompt.text.contains("2. Based on the topics"));
        assert!(prompt
            .text
            .contains("3. Based on the user information needs"));
        assert!(!prompt.text.contains("4."));
        assert!(!prompt.text.to_lowercase().contains("ambiguous"));
    }

    #[test]
    fn direct_variant_skips_topic_and_need_steps() {
        let prompt = build_generation_prompt(GenerationVariant::Direct(QueryKind::Specific), 5);
        let lower = prompt.text.to_lowercase();
        assert!(!lower.contains("topic"));
        assert!(!lower.contains("information need"));
        assert!(prompt.text.contains("Generate 5 specific queries"));
    }

    #[test]
    fn prompt_mentions_exactly_the_query_kinds_it_generates() {
        for variant in GenerationVariant::ALL {
            let lower = build_generation_prompt(variant, 10).text.to_lowercase();
            assert_eq!(
                lower.contains("specific"),
                variant.generates_specific(),
                "{variant}"
            );
            assert_eq!(
                lower.contains("ambiguous"),
                variant.generates_ambiguous(),
                "{variant}"
            );
        }
    }

    #[test]
    fn batch_size_replaces_every_count_slot() {
        for variant in GenerationVariant::ALL {
            let at_ten = build_generation_prompt(variant, 10).text;
            let at_seven = build_generation_prompt(variant, 7).text;
            assert_eq!(at_seven, at_ten.replace("10", "7"), "{variant}");
            assert!(!at_seven.contains("{count}"));
        }
    }

    #[test]
    fn builders_are_deterministic() {
        for variant in GenerationVariant::ALL {
            assert_eq!(
                build_generation_prompt(variant, 10),
                build_generation_prompt(variant, 10)
            );
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for variant in GenerationVariant::ALL {
            let parsed: GenerationVariant = variant.name().parse().unwrap();
            assert_eq!(parsed, variant);
            let json = serde_json::to_string(&variant).unwrap();
            assert_eq!(json, format!("\"{}\"", variant.name()));
            let back: GenerationVariant = serde_json::from_str(&json).unwrap();
            assert_eq!(back, variant);
        }
        assert!("pairwise".parse::<GenerationVariant>().is_err());
    }

    #[test]
    fn zero_shot_predictor_prompt_matches_reference_text() {
        let prompt = build_predictor_prompt("best city to visit", &[]).unwrap();
        assert_eq!(prompt.text, EXPECTED_PREDICTOR_PROMPT);
        assert_eq!(prompt.batch_size, 1);
    }

    #[test]
    fn demonstrations_render_in_order_before_target() {
        let demos = vec![
            ("a".to_string(), Label::Ambiguous),
            ("b".to_string(), Label::Specific),
        ];
        let prompt = build_predictor_prompt("q0", &demos).unwrap();
        let pos = |needle: &str| prompt.text.find(needle).unwrap();
        assert!(pos("user query:a,") < pos("\nyes\n"));
        assert!(pos("\nyes\n") < pos("user query:b,"));
        assert!(pos("user query:b,") < pos("\nno\n"));
        assert!(pos("\nno\n") < pos("user query:q0,"));
        assert_eq!(prompt.text.matches("Instruction:").count(), 3);
        assert!(prompt.text.ends_with("Please only return yes or no."));
    }

    #[test]
    fn shot_counts_outside_supported_set_are_rejected() {
        let demo = ("a".to_string(), Label::Ambiguous);
        for bad in [1usize, 3, 5, 8] {
            let demos = vec![demo.clone(); bad];
            assert_eq!(
                build_predictor_prompt("q", &demos).unwrap_err(),
                PromptError::InvalidShotCount { got: bad }
            );
        }
        for ok in PREDICTOR_SHOT_COUNTS {
            let demos = vec![demo.clone(); ok];
            let prompt = build_predictor_prompt("q", &demos).unwrap();
            assert_eq!(prompt.text.matches("Instruction:").count(), ok + 1);
        }
    }
}
