use serde::{Deserialize, Serialize};

use crate::sim::Label;
use crate::{Error, Result};

/// Three-class accuracy and confusion matrix; rows are true classes and
/// columns predicted classes, both in normal, anomalous, defect order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub confusion: [[usize; 3]; 3],
    pub total: usize,
}

impl Metrics {
    /// Share of each true class that was predicted correctly.
    pub fn recall(&self) -> [f64; 3] {
        std::array::from_fn(|i| {
            let row: usize = self.confusion[i].iter().sum();
            if row == 0 {
                0.0
            } else {
                self.confusion[i][i] as f64 / row as f64
            }
        })
    }
}

pub fn evaluate(predicted: &[Label], truth: &[Label]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} verdicts for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty test set"));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (i, (p, t)) in predicted.iter().zip(truth).enumerate() {
        let (Some(pi), Some(ti)) = (p.class_index(), t.class_index()) else {
            return Err(Error::invalid(format!("sample {i}: label 'unknown' cannot be evaluated")));
        };
        confusion[ti][pi] += 1;
    }
    let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
    Ok(Metrics {
        accuracy: correct as f64 / truth.len() as f64,
        confusion,
        total: truth.len(),
    })
}
