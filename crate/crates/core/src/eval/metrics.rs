//! Support-weighted precision, recall, and F1 for binary clarification-need
//! predictions.

use serde::Serialize;
use thiserror::Error;

use crate::Label;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("cannot score an empty label set")]
    EmptyInput,
}

/// Per-class precision, recall, F1, and gold support.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Confusion counts with the ambiguous class (label 1) as positive.
#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

/// Full evaluation report for one predictor on one dataset.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricsReport {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Indexed by class label: `[0]` is specific, `[1]` is ambiguous.
    pub per_class: [ClassMetrics; 2],
    pub confusion: Confusion,
    pub n: usize,
    /// Predictions that fell back to the default label because the predictor
    /// output could not be interpreted. Scored like any other prediction.
    pub unparseable_count: usize,
}

impl MetricsReport {
    /// Renders a fixed-width text table with percentages at two decimals.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>10} {:>10} {:>10} {:>10}\n",
            "class", "precision", "recall", "f1", "support"
        ));
        let names = ["specific", "ambiguous"];
        for (name, m) in names.iter().zip(self.per_class.iter()) {
            out.push_str(&format!(
                "{:<10} {:>9.2}% {:>9.2}% {:>9.2}% {:>10}\n",
                name,
                m.precision * 100.0,
                m.recall * 100.0,
                m.f1 * 100.0,
                m.support
            ));
        }
        out.push_str(&format!(
            "{:<10} {:>9.2}% {:>9.2}% {:>9.2}% {:>10}\n",
            "weighted",
            self.weighted_precision * 100.0,
            self.weighted_recall * 100.0,
            self.weighted_f1 * 100.0,
            self.n
        ));
        if self.unparseable_count > 0 {
            out.push_str(&format!(
                "unparseable predictor outputs: {}\n",
                self.unparseable_count
            ));
        }
        out
    }
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Computes per-class and support-weighted precision/recall/F1.
///
/// Zero denominators score 0 rather than NaN: a class never predicted has
/// precision 0, a class absent from gold has recall 0. Weighted values are
/// the per-class metrics averaged by gold support, so the weighted F1 is not
/// the harmonic mean of weighted precision and recall.
pub fn weighted_metrics(gold: &[Label], pred: &[Label]) -> Result<MetricsReport, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::EmptyInput);
    }

    let mut counts = [[0usize; 2]; 2];
    for (g, p) in gold.iter().zip(pred.iter()) {
        counts[g.as_u8() as usize][p.as_u8() as usize] += 1;
    }

    let confusion = Confusion {
        true_pos: counts[1][1],
        false_pos: counts[0][1],
        false_neg: counts[1][0],
        true_neg: counts[0][0],
    };

    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0,
    }; 2];
    for c in 0..2 {
        let tp = counts[c][c] as f64;
        let pred_c = (counts[0][c] + counts[1][c]) as f64;
        let gold_c = (counts[c][0] + counts[c][1]) as f64;
        let precision = safe_div(tp, pred_c);
        let recall = safe_div(tp, gold_c);
        let f1 = safe_div(2.0 * precision * recall, precision + recall);
        per_class[c] = ClassMetrics {
            precision,
            recall,
            f1,
            support: gold_c as usize,
        };
    }

    let n = gold.len() as f64;
    let weight = |f: fn(&ClassMetrics) -> f64| -> f64 {
        per_class
            .iter()
            .map(|m| f(m) * m.support as f64)
            .sum::<f64>()
            / n
    };

    Ok(MetricsReport {
        weighted_precision: weight(|m| m.precision),
        weighted_recall: weight(|m| m.recall),
        weighted_f1: weight(|m| m.f1),
        per_class,
        confusion,
        n: gold.len(),
        unparseable_count: 0,
    })
}
