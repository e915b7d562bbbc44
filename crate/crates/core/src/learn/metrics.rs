use std::fmt;

use serde::{Deserialize, Serialize};

/// Binary confusion counts with fake (label 1) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (0, _) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub n_test: u64,
    /// No positive predictions, so precision was set to 0.
    pub precision_undefined: bool,
    /// No positive samples, so recall was set to 0.
    pub recall_undefined: bool,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let c = confusion;
        let n = c.total();
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        EvalReport {
            accuracy: ratio(c.tp + c.tn, n),
            precision,
            recall,
            f1,
            confusion,
            n_test: n,
            precision_undefined: c.tp + c.fp == 0,
            recall_undefined: c.tp + c.fn_ == 0,
        }
    }

    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Self {
        EvalReport::from_confusion(Confusion::from_predictions(truth, predicted))
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.confusion;
        writeln!(f, "accuracy   {:.4}", self.accuracy)?;
        let flag = |undefined: bool| if undefined { " (undefined, reported as 0)" } else { "" };
        writeln!(f, "precision  {:.4}{}", self.precision, flag(self.precision_undefined))?;
        writeln!(f, "recall     {:.4}{}", self.recall, flag(self.recall_undefined))?;
        writeln!(f, "f1         {:.4}", self.f1)?;
        writeln!(f, "n_test     {}", self.n_test)?;
        writeln!(f, "               pred real  pred fake")?;
        writeln!(f, "  true real    {:>9}  {:>9}", c.tn, c.fp)?;
        write!(f, "  true fake    {:>9}  {:>9}", c.fn_, c.tp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let r = EvalReport::from_predictions(&[0, 1, 1, 0], &[0, 1, 1, 0]);
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn all_real_predictor() {
        let truth: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let r = EvalReport::from_predictions(&truth, &[0; 10]);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.recall, 0.0);
        assert!(r.precision_undefined && !r.recall_undefined);
    }

    #[test]
    fn confusion_arithmetic() {
        let r = EvalReport::from_confusion(Confusion {
            tp: 40,
            tn: 45,
            fp: 5,
            fn_: 10,
        });
        assert_eq!(r.accuracy, 0.85);
        assert_eq!(r.n_test, 100);
        assert_eq!(r.precision, 40.0 / 45.0);
        assert_eq!(r.recall, 0.8);
    }
}
