use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion matrix (rows = true class) with recall-based summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Vec<Vec<u64>>,
    /// `None` for classes with no true samples.
    pub per_class_recall: Vec<Option<f64>>,
    /// Mean recall over classes that occur in the truth.
    pub unweighted_accuracy: f64,
    /// Fraction of correctly classified utterances.
    pub weighted_accuracy: f64,
}

impl Metrics {
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Metrics {
        let mut correct = 0;
        let mut total = 0;
        let per_class_recall: Vec<Option<f64>> = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: u64 = row.iter().sum();
                correct += row[c];
                total += n;
                (n > 0).then(|| row[c] as f64 / n as f64)
            })
            .collect();
        let present: Vec<f64> = per_class_recall.iter().flatten().copied().collect();
        let unweighted_accuracy = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        let weighted_accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        Metrics {
            confusion,
            per_class_recall,
            unweighted_accuracy,
            weighted_accuracy,
        }
    }

    pub fn from_predictions(predicted: &[usize], truth: &[usize], classes: usize) -> Result<Metrics> {
        if predicted.len() != truth.len() {
            return Err(Error::Config(format!(
                "{} predictions for {} labels",
                predicted.len(),
                truth.len()
            )));
        }
        let mut confusion = vec![vec![0u64; classes]; classes];
        for (&p, &y) in predicted.iter().zip(truth) {
            if p >= classes || y >= classes {
                return Err(Error::Config(format!("class index outside 0..{classes}: ({y}, {p})")));
            }
            confusion[y][p] += 1;
        }
        Ok(Metrics::from_confusion(confusion))
    }

    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}
