//! Regression datasets and the coefficient of determination.

use super::NnError;

/// Paired input/target rows for supervised regression.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self, NnError> {
        if inputs.len() != targets.len() {
            return Err(NnError::InvalidDataset(format!(
                "{} input rows vs {} target rows",
                inputs.len(),
                targets.len()
            )));
        }
        if inputs.is_empty() {
            return Err(NnError::InvalidDataset("dataset is empty".into()));
        }
        let in_dim = inputs[0].len();
        let out_dim = targets[0].len();
        if in_dim == 0 || out_dim == 0 {
            return Err(NnError::InvalidDataset("zero-width rows".into()));
        }
        for (i, (x, y)) in inputs.iter().zip(&targets).enumerate() {
            if x.len() != in_dim || y.len() != out_dim {
                return Err(NnError::InvalidDataset(format!("row {i} has inconsistent width")));
            }
            if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
                return Err(NnError::InvalidDataset(format!("row {i} has non-finite entries")));
            }
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn target_dim(&self) -> usize {
        self.targets[0].len()
    }

    pub fn input(&self, row: usize) -> &[f64] {
        &self.inputs[row]
    }

    pub fn target(&self, row: usize) -> &[f64] {
        &self.targets[row]
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// New dataset holding the given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            inputs: rows.iter().map(|&r| self.inputs[r].clone()).collect(),
            targets: rows.iter().map(|&r| self.targets[r].clone()).collect(),
        }
    }
}

/// Per-output and mean coefficient of determination.
#[derive(Debug, Clone, PartialEq)]
pub struct R2Score {
    pub per_output: Vec<f64>,
    pub mean: f64,
}

/// `1 - SS_res/SS_tot` per output column, averaged across outputs. A
/// zero-variance target column scores 0 rather than dividing by zero.
pub fn r2_score(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<R2Score, NnError> {
    if predictions.len() != targets.len() {
        return Err(NnError::InvalidDataset("prediction/target row mismatch".into()));
    }
    if predictions.len() < 2 {
        return Err(NnError::DatasetTooSmall { rows: predictions.len(), min: 2 });
    }
    let out_dim = targets[0].len();
    let n = targets.len() as f64;

    let mut per_output = Vec::with_capacity(out_dim);
    for col in 0..out_dim {
        let mean = targets.iter().map(|row| row[col]).sum::<f64>() / n;
        let ss_tot: f64 = targets.iter().map(|row| (row[col] - mean).powi(2)).sum();
        let ss_res: f64 = predictions
            .iter()
            .zip(targets)
            .map(|(p, t)| (t[col] - p[col]).powi(2))
            .sum();
        per_output.push(if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 });
    }
    let mean = per_output.iter().sum::<f64>() / out_dim as f64;
    Ok(R2Score { per_output, mean })
}
