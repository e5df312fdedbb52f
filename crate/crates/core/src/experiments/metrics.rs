use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Classification scores derived from a confusion matrix.
///
/// Precision, recall and F1 are 0 when their denominator is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Unweighted mean of the per-class F1 values.
    pub macro_f1: f64,
    pub per_class: Vec<ClassScores>,
    /// `confusion[true_class][predicted_class]`
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_predictions(labels: &[usize], predictions: &[usize], n_classes: usize) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::dim(
                "metrics",
                format!("{} labels but {} predictions", labels.len(), predictions.len()),
            ));
        }
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&t, &p) in labels.iter().zip(predictions) {
            for c in [t, p] {
                if c >= n_classes {
                    return Err(Error::Label { label: c, classes: n_classes });
                }
            }
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::dim("metrics", "confusion matrix must be square and nonempty"));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Protocol("cannot score an empty test set".into()));
        }
        let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
        let per_class: Vec<ClassScores> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let support: usize = confusion[c].iter().sum();
                let predicted: usize = confusion.iter().map(|r| r[c]).sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = ratio(2 * tp, support + predicted);
                ClassScores { precision, recall, f1, support }
            })
            .collect();
        let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
        Ok(Metrics {
            accuracy: ratio(trace, total),
            macro_f1,
            per_class,
            confusion,
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// True when every scalar equals its recomputation from `confusion`.
    pub fn is_consistent(&self) -> bool {
        Self::from_confusion(self.confusion.clone()).is_ok_and(|m| m == *self)
    }
}

/// Mean and sample standard deviation of one statistic over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// 0 for a single run.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Protocol("cannot aggregate zero runs".into()));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Ok(Stat { mean, std, n })
    }

    pub fn is_singleton(&self) -> bool {
        self.n == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: Stat,
    pub macro_f1: Stat,
}

pub fn aggregate_runs(runs: &[Metrics]) -> Result<Aggregate> {
    let acc: Vec<f64> = runs.iter().map(|m| m.accuracy).collect();
    let f1: Vec<f64> = runs.iter().map(|m| m.macro_f1).collect();
    Ok(Aggregate {
        accuracy: Stat::from_values(&acc)?,
        macro_f1: Stat::from_values(&f1)?,
    })
}
