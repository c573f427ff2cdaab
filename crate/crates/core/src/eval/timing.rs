use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::models::{batch_of, ModelState};
use crate::pipeline::WindowPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub median_ms: f64,
    pub iqr_ms: f64,
    pub samples_ms: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl LatencyStats {
    pub fn from_samples(samples_ms: Vec<f64>) -> Option<Self> {
        if samples_ms.is_empty() {
            return None;
        }
        let mut s = samples_ms.clone();
        s.sort_by(f64::total_cmp);
        Some(Self {
            median_ms: quantile(&s, 0.5),
            iqr_ms: quantile(&s, 0.75) - quantile(&s, 0.25),
            samples_ms,
        })
    }
}

/// Wall-clock time of single-pair forward passes after one warm-up pass.
pub fn time_inference(model: &ModelState, pair: &WindowPair, repeats: usize) -> Result<Option<LatencyStats>, EvalError> {
    let (x, _) = batch_of(&[pair])?;
    model.forward(&x)?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t0 = Instant::now();
        let y = model.forward(&x)?;
        samples.push(t0.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(y);
    }
    Ok(LatencyStats::from_samples(samples))
}
