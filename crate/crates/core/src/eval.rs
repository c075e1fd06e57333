use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[truth][prediction]` counts.
    pub confusion: Vec<Vec<usize>>,
}

/// Accuracy and confusion counts over at least `classes` classes (more if a
/// label exceeds that range).
pub fn evaluate(predictions: &[usize], truth: &[usize], classes: usize) -> Result<Evaluation> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: truth.len() });
    }
    let size = predictions.iter().chain(truth).map(|&l| l + 1).max().unwrap_or(0).max(classes);
    let mut confusion = vec![vec![0usize; size]; size];
    let mut correct = 0usize;
    for (&p, &t) in predictions.iter().zip(truth) {
        confusion[t][p] += 1;
        if p == t {
            correct += 1;
        }
    }
    let accuracy = if truth.is_empty() { 0.0 } else { correct as f64 / truth.len() as f64 };
    Ok(Evaluation { accuracy, confusion })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
