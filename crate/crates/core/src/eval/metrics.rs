use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mil::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs(predictions: &[Label], truths: &[Label]) -> Result<Confusion> {
        if predictions.len() != truths.len() {
            return Err(Error::Dimension {
                expected: truths.len(),
                actual: predictions.len(),
            });
        }
        let mut c = Confusion::default();
        for (&p, &t) in predictions.iter().zip(truths) {
            match (p, t) {
                (Label::Positive, Label::Positive) => c.tp += 1,
                (Label::Positive, Label::Negative) => c.fp += 1,
                (Label::Negative, Label::Negative) => c.tn += 1,
                (Label::Negative, Label::Positive) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Percentages derived from a confusion matrix. Ratios with a zero denominator are reported as 0
/// and named in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(flatten)]
    pub counts: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub specificity: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Metrics {
        let mut undefined = Vec::new();
        let mut ratio = |name: &str, num: usize, den: usize| {
            if den == 0 {
                undefined.push(name.to_string());
                0.0
            } else {
                100.0 * num as f64 / den as f64
            }
        };
        let accuracy = ratio("accuracy", c.tp + c.tn, c.total());
        let precision = ratio("precision", c.tp, c.tp + c.fp);
        let recall = ratio("recall", c.tp, c.tp + c.fn_);
        let specificity = ratio("specificity", c.tn, c.tn + c.fp);
        let f_score = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            undefined.push("f_score".into());
            0.0
        };
        Metrics {
            counts: c,
            accuracy,
            precision,
            recall,
            f_score,
            specificity,
            undefined,
        }
    }
}

pub fn metrics(predictions: &[Label], truths: &[Label]) -> Result<Metrics> {
    Ok(Metrics::from_confusion(Confusion::from_pairs(predictions, truths)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn all_correct() {
        let m = metrics(&[P, N, P, N], &[P, N, P, N]).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f_score, m.specificity] {
            assert_eq!(v, 100.0);
        }
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn hand_arithmetic() {
        let c = Confusion { tp: 2, fp: 1, tn: 3, fn_: 2 };
        let m = Metrics::from_confusion(c);
        assert!((m.accuracy - 62.5).abs() < 0.01);
        assert!((m.precision - 66.67).abs() < 0.01);
        assert!((m.recall - 50.0).abs() < 0.01);
        assert!((m.specificity - 75.0).abs() < 0.01);
        assert!((m.f_score - 57.14).abs() < 0.01);
    }

    #[test]
    fn no_positive_predictions_flag_precision() {
        let m = metrics(&[N, N, N], &[P, N, N]).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.undefined.contains(&"precision".to_string()));
        assert_eq!(m.counts.total(), 3);
    }

    #[test]
    fn length_mismatch() {
        assert!(metrics(&[P], &[P, N]).is_err());
    }

    #[test]
    fn json_uses_fn_key() {
        let m = Metrics::from_confusion(Confusion { tp: 1, fp: 0, tn: 1, fn_: 0 });
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["fn"], 0);
        assert_eq!(v["tp"], 1);
    }
}
