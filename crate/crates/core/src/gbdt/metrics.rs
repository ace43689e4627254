use crate::Scalar;

use super::GbdtError;

fn check<T: Scalar>(pred: &[T], actual: &[T]) -> Result<(), GbdtError> {
    if pred.len() != actual.len() {
        return Err(GbdtError::Invalid(format!(
            "{} predictions for {} actual values",
            pred.len(),
            actual.len()
        )));
    }
    if actual.len() < 2 {
        return Err(GbdtError::Invalid("scoring needs at least two rows".into()));
    }
    Ok(())
}

/// Coefficient of determination `1 − SS_res / SS_tot`, accumulated in f64.
pub fn r2_score<T: Scalar>(pred: &[T], actual: &[T]) -> Result<f64, GbdtError> {
    check(pred, actual)?;
    let n = actual.len() as f64;
    let mean = actual.iter().map(|a| a.to_f64_lossy()).sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a.to_f64_lossy() - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(GbdtError::ConstantActual);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p.to_f64_lossy() - a.to_f64_lossy()).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse<T: Scalar>(pred: &[T], actual: &[T]) -> Result<f64, GbdtError> {
    check(pred, actual)?;
    let sse: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p.to_f64_lossy() - a.to_f64_lossy()).powi(2))
        .sum();
    Ok((sse / actual.len() as f64).sqrt())
}
