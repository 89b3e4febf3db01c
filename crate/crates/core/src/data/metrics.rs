use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::mean;

/// One-vs-rest counts for the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `2TP / (2TP + FP + FN)`, or 0 when the denominator vanishes.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// Scores for one evaluation split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub n: usize,
    pub unclassified: usize,
}

/// `None` marks an Unclassified prediction: it is always wrong and counts as a
/// negative prediction.
pub fn compute_metrics(predictions: &[Option<usize>], labels: &[usize], positive_class: usize) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    let mut cm = Confusion::default();
    let mut correct = 0;
    let mut unclassified = 0;
    for (&p, &y) in predictions.iter().zip(labels) {
        if p == Some(y) {
            correct += 1;
        }
        if p.is_none() {
            unclassified += 1;
        }
        let predicted_pos = p == Some(positive_class);
        let actual_pos = y == positive_class;
        match (predicted_pos, actual_pos) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    let n = labels.len();
    Ok(Metrics {
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        f1: cm.f1(),
        confusion: cm,
        n,
        unclassified,
    })
}

/// Per-fold metrics with their arithmetic means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub folds: Vec<Metrics>,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
    /// Confusion counts summed over folds.
    pub confusion: Confusion,
}

impl MetricsReport {
    pub fn from_folds(folds: Vec<Metrics>) -> Self {
        let acc: Vec<f64> = folds.iter().map(|m| m.accuracy).collect();
        let f1: Vec<f64> = folds.iter().map(|m| m.f1).collect();
        let mut confusion = Confusion::default();
        for m in &folds {
            confusion.tp += m.confusion.tp;
            confusion.fp += m.confusion.fp;
            confusion.fn_ += m.confusion.fn_;
            confusion.tn += m.confusion.tn;
        }
        Self {
            mean_accuracy: mean(&acc),
            mean_f1: mean(&f1),
            confusion,
            folds,
        }
    }
}
