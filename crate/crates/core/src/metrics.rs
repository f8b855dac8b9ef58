use crate::error::{Error, Result};

/// `100 * sum (pred - truth)^2 / sum truth^2`, in percent.
pub fn relative_mse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation grid".into()));
    }
    let denom: f64 = truth.iter().map(|u| u * u).sum();
    if denom == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let num: f64 = predictions
        .iter()
        .zip(truth)
        .map(|(p, u)| (p - u) * (p - u))
        .sum();
    Ok(100.0 * num / denom)
}
