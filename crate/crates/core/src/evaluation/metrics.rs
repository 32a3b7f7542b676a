use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// `FP / (FP + TN)`, 0 when there are no negatives.
    pub far: f64,
    /// `FN / (TP + FN)`, 0 when there are no positives.
    pub mdr: f64,
    pub f1: f64,
}

pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::Metric(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, 0) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fn_ += 1,
            _ => return Err(Error::Metric(format!("non-binary label pair ({p}, {t})"))),
        }
    }
    Ok(c)
}

impl From<ConfusionCounts> for ClassificationMetrics {
    fn from(c: ConfusionCounts) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let f1_den = 2 * c.tp + c.fp + c.fn_;
        ClassificationMetrics {
            accuracy: ratio(c.tp + c.tn, c.total()),
            far: ratio(c.fp, c.fp + c.tn),
            mdr: ratio(c.fn_, c.tp + c.fn_),
            // nothing attacked and nothing flagged counts as a perfect score
            f1: if f1_den == 0 { 1.0 } else { ratio(2 * c.tp, f1_den) },
        }
    }
}

pub fn classification_metrics(pred: &[u8], truth: &[u8]) -> Result<ClassificationMetrics> {
    Ok(confusion(pred, truth)?.into())
}

/// `‖x_true − x̂‖₂ / ‖x_true‖₂`.
pub fn normalized_error(x_hat: &[f64], x_true: &[f64]) -> Result<f64> {
    if x_hat.len() != x_true.len() {
        return Err(Error::Metric(format!(
            "estimate has {} entries, truth has {}",
            x_hat.len(),
            x_true.len()
        )));
    }
    let denom = x_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::Metric("normalized error undefined for a zero attack".into()));
    }
    let num = x_hat
        .iter()
        .zip(x_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Metric("cannot summarise an empty sample".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Summary {
            mean,
            std: var.sqrt(),
        })
    }
}
