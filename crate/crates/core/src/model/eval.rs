use rayon::prelude::*;

use super::forward::predict;
use super::{LabeledImage, ModelConfig, ModelError, ModelParams, Result};

/// Test-set summary. `confusion[true][predicted]` counts samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    /// Per class; 0 when the class is never predicted.
    pub precision: Vec<f64>,
    /// Per class; 0 when the class has no samples.
    pub recall: Vec<f64>,
    pub total: usize,
}

impl EvalReport {
    pub fn from_predictions(num_classes: usize, pairs: &[(usize, usize)]) -> Self {
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for &(truth, pred) in pairs {
            confusion[truth][pred] += 1;
        }
        let total = pairs.len();
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = (0..num_classes)
            .map(|c| ratio(confusion[c][c], (0..num_classes).map(|t| confusion[t][c]).sum()))
            .collect();
        let recall = (0..num_classes)
            .map(|c| ratio(confusion[c][c], confusion[c].iter().sum()))
            .collect();
        Self {
            accuracy: ratio(correct, total),
            confusion,
            precision,
            recall,
            total,
        }
    }
}

pub fn evaluate(params: &ModelParams, config: &ModelConfig, samples: &[LabeledImage]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if let Some(s) = samples.iter().find(|s| s.label >= config.num_classes) {
        return Err(ModelError::LabelOutOfRange {
            label: s.label,
            classes: config.num_classes,
        });
    }
    let pairs = samples
        .par_iter()
        .map(|s| Ok((s.label, predict(params, config, &s.image)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_predictions(config.num_classes, &pairs))
}
