//! Benchmark metrics: detection, intent, risk and action suggestion.

use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::BoundingBox;
use crate::labels::IntentLabel;
use crate::matching::{build_cost_matrix, greedy_assign, hungarian_assign, AssignmentResult};
use crate::{Error, Result};

pub const DEFAULT_OD_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvalInput {
    pub ground_truth: Vec<BoundingBox>,
    pub predictions: Vec<BoundingBox>,
    pub iou_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdOutcome {
    pub accuracy: f64,
    pub matched: usize,
    pub n_gt: usize,
    /// Set when there was no ground truth; accuracy is then reported as 1.
    pub empty_ground_truth: bool,
    /// `(gt_index, prediction_index)` pairs.
    pub pairs: Vec<(usize, usize)>,
}

/// One-to-one matching of predictions to ground truth at IoU >= threshold.
pub fn od_match(input: &DetectionEvalInput) -> OdOutcome {
    let n_gt = input.ground_truth.len();
    if n_gt == 0 {
        return OdOutcome {
            accuracy: 1.0,
            matched: 0,
            n_gt,
            empty_ground_truth: true,
            pairs: Vec::new(),
        };
    }
    let cost = build_cost_matrix(&input.ground_truth, &input.predictions);
    // IoU >= t  <=>  1 - IoU <= 1 - t; nudge the strict gate by one ulp-ish step.
    let max_cost = next_up(1.0 - input.iou_threshold);
    let result: AssignmentResult =
        hungarian_assign(&cost, max_cost).unwrap_or_else(|_| greedy_assign(&cost, max_cost));
    OdOutcome {
        accuracy: result.pairs.len() as f64 / n_gt as f64,
        matched: result.pairs.len(),
        n_gt,
        empty_ground_truth: false,
        pairs: result.pairs,
    }
}

fn next_up(x: f64) -> f64 {
    x + 1e-12
}

/// Fraction of ground-truth boxes localised by a distinct prediction.
pub fn od_accuracy(input: &DetectionEvalInput) -> f64 {
    od_match(input).accuracy
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntentAccuracy {
    pub lateral: f64,
    pub vertical: f64,
    pub combined: f64,
}

/// Per-axis and joint accuracy over `(predicted, truth)` pairs. A missing
/// prediction counts as wrong on both axes.
pub fn intent_accuracy(pairs: &[(Option<IntentLabel>, IntentLabel)]) -> Result<IntentAccuracy> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric("intent accuracy"));
    }
    let mut lat = 0usize;
    let mut ver = 0usize;
    let mut both = 0usize;
    for (pred, truth) in pairs {
        let Some(pred) = pred else { continue };
        let l = pred.lateral == truth.lateral;
        let v = pred.vertical == truth.vertical;
        lat += usize::from(l);
        ver += usize::from(v);
        both += usize::from(l && v);
    }
    let n = pairs.len() as f64;
    Ok(IntentAccuracy {
        lateral: lat as f64 / n,
        vertical: ver as f64 / n,
        combined: both as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

/// `0.5 * (TP / (TP + FN) + TN / (TN + FP))`.
pub fn balanced_accuracy(c: &ConfusionCounts) -> Result<f64> {
    if c.tp + c.fn_ == 0 {
        return Err(Error::UndefinedMetric("balanced accuracy (no positives)"));
    }
    if c.tn + c.fp == 0 {
        return Err(Error::UndefinedMetric("balanced accuracy (no negatives)"));
    }
    let tpr = c.tp as f64 / (c.tp + c.fn_) as f64;
    let tnr = c.tn as f64 / (c.tn + c.fp) as f64;
    Ok(0.5 * (tpr + tnr))
}

/// Positive-class F1, `2TP / (2TP + FP + FN)`.
pub fn f1_score(c: &ConfusionCounts) -> Result<f64> {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        return Err(Error::UndefinedMetric("f1"));
    }
    Ok((2 * c.tp) as f64 / denom as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskMetrics {
    pub balanced_accuracy: Result<f64>,
    pub f1: Result<f64>,
}

/// Both risk metrics; each component fails independently.
pub fn risk_metrics(counts: &ConfusionCounts) -> RiskMetrics {
    RiskMetrics {
        balanced_accuracy: balanced_accuracy(counts),
        f1: f1_score(counts),
    }
}

/// Per-pair similarity of a candidate action to its reference, in `[0, 1]`.
pub trait SimilarityScorer {
    fn score(&self, candidate: &str, reference: &str) -> f64;
}

/// Token-level F1 after lowercasing and stripping punctuation.
///
/// Tokens are matched as multisets. Two empty strings score 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenF1;

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

impl SimilarityScorer for TokenF1 {
    fn score(&self, candidate: &str, reference: &str) -> f64 {
        let cand = tokenize(candidate);
        let refs = tokenize(reference);
        if cand.is_empty() && refs.is_empty() {
            return 1.0;
        }
        if cand.is_empty() || refs.is_empty() {
            return 0.0;
        }
        let mut remaining: Vec<&str> = refs.iter().map(String::as_str).collect();
        let mut overlap = 0usize;
        for token in &cand {
            if let Some(pos) = remaining.iter().position(|r| r == token) {
                remaining.swap_remove(pos);
                overlap += 1;
            }
        }
        if overlap == 0 {
            return 0.0;
        }
        let precision = overlap as f64 / cand.len() as f64;
        let recall = overlap as f64 / refs.len() as f64;
        2.0 * precision * recall / (precision + recall)
    }
}

/// Mean per-pair similarity.
pub fn action_similarity<S: SimilarityScorer + ?Sized>(
    pairs: &[(&str, &str)],
    scorer: &S,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric("action similarity"));
    }
    let total: f64 = pairs.iter().map(|(c, r)| scorer.score(c, r).clamp(0.0, 1.0)).sum();
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{LateralIntent as L, VerticalIntent as V};
    use alloc::vec;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn od_examples() {
        let boxes = vec![bb(0.0, 0.0, 10.0, 10.0), bb(20.0, 0.0, 30.0, 10.0), bb(40.0, 0.0, 50.0, 10.0)];
        let same = DetectionEvalInput {
            ground_truth: boxes.clone(),
            predictions: boxes.clone(),
            iou_threshold: 0.5,
        };
        assert_eq!(od_accuracy(&same), 1.0);

        let one = DetectionEvalInput {
            ground_truth: boxes[..2].to_vec(),
            predictions: vec![bb(0.0, 0.0, 10.0, 8.0)],
            iou_threshold: 0.5,
        };
        assert_eq!(od_accuracy(&one), 0.5);

        let none = DetectionEvalInput {
            ground_truth: boxes,
            predictions: vec![],
            iou_threshold: 0.5,
        };
        assert_eq!(od_accuracy(&none), 0.0);

        let empty = od_match(&DetectionEvalInput {
            ground_truth: vec![],
            predictions: vec![bb(0.0, 0.0, 1.0, 1.0)],
            iou_threshold: 0.5,
        });
        assert_eq!(empty.accuracy, 1.0);
        assert!(empty.empty_ground_truth);
    }

    #[test]
    fn od_threshold_is_inclusive() {
        // IoU exactly 0.5
        let input = DetectionEvalInput {
            ground_truth: vec![bb(0.0, 0.0, 10.0, 10.0)],
            predictions: vec![bb(0.0, 0.0, 10.0, 5.0)],
            iou_threshold: 0.5,
        };
        assert_eq!(od_accuracy(&input), 1.0);
    }

    #[test]
    fn intent_examples() {
        let a = IntentLabel::new(L::GoesToTheLeft, V::Stationary);
        let b = IntentLabel::new(L::GoesToTheLeft, V::MovesAwayFromEgoVehicle);
        let c = IntentLabel::new(L::GoesToTheRight, V::MovesTowardsEgoVehicle);
        let all = intent_accuracy(&[(Some(a), a), (Some(c), c)]).unwrap();
        assert_eq!((all.lateral, all.vertical, all.combined), (1.0, 1.0, 1.0));
        let lat_only = intent_accuracy(&[(Some(a), b), (Some(b), a)]).unwrap();
        assert_eq!((lat_only.lateral, lat_only.vertical, lat_only.combined), (1.0, 0.0, 0.0));
        // 3 lateral-correct, 2 vertical-correct, 2 both
        let mixed = intent_accuracy(&[(Some(a), a), (Some(c), c), (Some(a), b), (Some(c), a)]).unwrap();
        assert_eq!((mixed.lateral, mixed.vertical, mixed.combined), (0.75, 0.5, 0.5));
        let missing = intent_accuracy(&[(None, a), (Some(a), a)]).unwrap();
        assert_eq!(missing.combined, 0.5);
        assert_eq!(intent_accuracy(&[]), Err(Error::UndefinedMetric("intent accuracy")));
    }

    #[test]
    fn risk_examples() {
        let c = ConfusionCounts { tp: 90, fn_: 10, tn: 5, fp: 5 };
        let m = risk_metrics(&c);
        assert_eq!(m.balanced_accuracy, Ok(0.7));
        // 2TP / (2TP + FP + FN) = 180 / 195
        assert_eq!(m.f1, Ok(12.0 / 13.0));

        let perfect = ConfusionCounts { tp: 4, fn_: 0, tn: 3, fp: 0 };
        assert_eq!(balanced_accuracy(&perfect), Ok(1.0));
        assert_eq!(f1_score(&perfect), Ok(1.0));

        // always "Yes" on 97 positive / 3 negative
        let constant = ConfusionCounts { tp: 97, fn_: 0, tn: 0, fp: 3 };
        assert_eq!(balanced_accuracy(&constant), Ok(0.5));
        assert!(f1_score(&constant).unwrap() > 0.98);

        let no_neg = ConfusionCounts { tp: 3, ..Default::default() };
        assert!(balanced_accuracy(&no_neg).is_err());
        assert!(f1_score(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn token_f1_examples() {
        let s = TokenF1;
        assert_eq!(s.score("Slow down.", "slow down"), 1.0);
        assert_eq!(s.score("slow down", "speed up"), 0.0);
        assert_eq!(s.score("slow down", "slow up"), 0.5);
        assert_eq!(s.score("stop", "go"), 0.0);
        assert_eq!(
            action_similarity(&[("a b", "a b"), ("x", "y")], &s),
            Ok(0.5)
        );
        assert!(action_similarity::<TokenF1>(&[], &s).is_err());
    }
}
