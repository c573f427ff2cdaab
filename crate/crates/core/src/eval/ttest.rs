use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricBasis {
    /// Per-sample squared errors.
    Rmse,
    /// Per-sample sMAPE terms.
    Smape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub model_a: String,
    pub model_b: String,
    pub basis: MetricBasis,
    pub t: f64,
    pub df: usize,
    /// Two-sided.
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub std_a: f64,
    pub std_b: f64,
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Paired t-test on `a − b`.
pub fn paired_t_test(
    model_a: &str,
    model_b: &str,
    basis: MetricBasis,
    a: &[f64],
    b: &[f64],
) -> Result<PairedTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(EvalError::Empty);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (md, sd) = mean_std(&d);
    if sd == 0.0 || !sd.is_finite() {
        return Err(EvalError::ZeroVariance);
    }
    let n = d.len();
    let t = md / (sd / (n as f64).sqrt());
    let df = n - 1;
    let (mean_a, std_a) = mean_std(a);
    let (mean_b, std_b) = mean_std(b);
    Ok(PairedTest {
        model_a: model_a.to_string(),
        model_b: model_b.to_string(),
        basis,
        t,
        df,
        p: student_t_two_sided(t, df as f64),
        mean_a,
        mean_b,
        std_a,
        std_b,
    })
}
