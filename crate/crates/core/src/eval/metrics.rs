use super::EvalError;

fn check(y: &[f64], yhat: &[f64]) -> Result<(), EvalError> {
    if y.len() != yhat.len() {
        return Err(EvalError::LengthMismatch(y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn squared_errors(y: &[f64], yhat: &[f64]) -> Vec<f64> {
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).collect()
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    Ok((squared_errors(y, yhat).iter().sum::<f64>() / y.len() as f64).sqrt())
}

/// Per-sample sMAPE contributions `200 |y − ŷ| / (|y| + |ŷ|)`, 0 when both are 0.
pub fn smape_terms(y: &[f64], yhat: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(yhat)
        .map(|(a, b)| {
            let den = a.abs() + b.abs();
            if den == 0.0 {
                0.0
            } else {
                (200.0 * (a - b).abs() / den).min(200.0)
            }
        })
        .collect()
}

/// Symmetric mean absolute percentage error in percent, within `[0, 200]`.
pub fn smape(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    Ok(smape_terms(y, yhat).iter().sum::<f64>() / y.len() as f64)
}
