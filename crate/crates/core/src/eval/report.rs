use serde::{Deserialize, Serialize};

use super::{rmse, smape, smape_terms, squared_errors, EvalError, LatencyStats};
use crate::models::ModelState;
use crate::pipeline::{ScalerParams, WindowPair};
use crate::train::predict;

/// Unscaled forecasts and truth, `[pairs × horizon × outputs]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecasts {
    pub names: Vec<String>,
    pub horizon: usize,
    pub pred: Vec<f64>,
    pub truth: Vec<f64>,
    /// First target hour of each pair, counted from the start of the series.
    pub first_hour: Vec<usize>,
}

impl Forecasts {
    pub fn outputs(&self) -> usize {
        self.names.len()
    }

    pub fn pairs(&self) -> usize {
        self.first_hour.len()
    }

    fn column(v: &[f64], j: usize, o: usize) -> Vec<f64> {
        v.iter().skip(j).step_by(o).copied().collect()
    }

    pub fn pred_column(&self, j: usize) -> Vec<f64> {
        Self::column(&self.pred, j, self.outputs())
    }

    pub fn truth_column(&self, j: usize) -> Vec<f64> {
        Self::column(&self.truth, j, self.outputs())
    }

    /// Paired per-sample values for significance testing.
    pub fn squared_errors(&self) -> Vec<f64> {
        squared_errors(&self.truth, &self.pred)
    }

    pub fn smape_terms(&self) -> Vec<f64> {
        smape_terms(&self.truth, &self.pred)
    }
}

fn truth_of(pairs: &[WindowPair]) -> Vec<f64> {
    pairs.iter().flat_map(|p| p.target.iter().copied()).collect()
}

fn first_hours(pairs: &[WindowPair], offset: usize) -> Vec<usize> {
    pairs.iter().map(|p| p.abs_start + offset).collect()
}

fn invert_all(values: &mut [f64], scaler: &ScalerParams) {
    for row in values.chunks_mut(scaler.features.len()) {
        scaler.invert_row(row);
    }
}

/// Runs the model over `pairs` in order and maps predictions and truth back
/// to measurement units with the target scaler.
pub fn forecast(model: &ModelState, pairs: &[WindowPair], target_scaler: &ScalerParams) -> Result<Forecasts, EvalError> {
    if let Some(h) = &model.scaler_hash {
        if *h != target_scaler.fingerprint() {
            return Err(EvalError::ScalerMismatch);
        }
    }
    if target_scaler.features.len() != model.spec.outputs {
        return Err(EvalError::ScalerMismatch);
    }
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut pred = predict(model, pairs)?.into_data();
    let mut truth = truth_of(pairs);
    invert_all(&mut pred, target_scaler);
    invert_all(&mut truth, target_scaler);
    let offset = model.spec.input_len - model.spec.horizon + 1;
    Ok(Forecasts {
        names: target_scaler.names(),
        horizon: model.spec.horizon,
        pred,
        truth,
        first_hour: first_hours(pairs, offset),
    })
}

/// The previous hour at the source station as the forecast for the target
/// station: target step `s` takes source input row `input_len − horizon + s`.
pub fn persistence_forecast(
    pairs: &[WindowPair],
    input_scaler: &ScalerParams,
    target_scaler: &ScalerParams,
) -> Result<Forecasts, EvalError> {
    let first = pairs.first().ok_or(EvalError::Empty)?;
    let names = target_scaler.names();
    let input_names = input_scaler.names();
    let cols: Vec<usize> = names
        .iter()
        .map(|n| input_names.iter().position(|m| m == n).ok_or(EvalError::ScalerMismatch))
        .collect::<Result<_, _>>()?;
    let (l, h) = (first.input_len(), first.horizon());
    let o = names.len();
    let mut pred = Vec::with_capacity(pairs.len() * h * o);
    for p in pairs {
        for s in 0..h {
            let row = p.input_row(l - h + s);
            for &c in &cols {
                pred.push(input_scaler.features[c].invert(row[c]));
            }
        }
    }
    let mut truth = truth_of(pairs);
    invert_all(&mut truth, target_scaler);
    Ok(Forecasts {
        names,
        horizon: h,
        pred,
        truth,
        first_hour: first_hours(pairs, l - h + 1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub names: Vec<String>,
    /// Per output, in µg/m³.
    pub rmse: Vec<f64>,
    /// Pooled over all outputs.
    pub rmse_total: f64,
    pub smape: Vec<f64>,
    /// Pooled over all outputs.
    pub smape_total: f64,
    /// Mean of the per-output values.
    pub smape_mean: f64,
    pub n_samples: usize,
    pub param_count: usize,
    pub latency: Option<LatencyStats>,
}

pub fn metrics(model: &str, f: &Forecasts, param_count: usize) -> Result<MetricsReport, EvalError> {
    let o = f.outputs();
    let mut r = Vec::with_capacity(o);
    let mut s = Vec::with_capacity(o);
    for j in 0..o {
        let (y, yhat) = (f.truth_column(j), f.pred_column(j));
        r.push(rmse(&y, &yhat)?);
        s.push(smape(&y, &yhat)?);
    }
    Ok(MetricsReport {
        model: model.to_string(),
        names: f.names.clone(),
        rmse_total: rmse(&f.truth, &f.pred)?,
        smape_total: smape(&f.truth, &f.pred)?,
        smape_mean: s.iter().sum::<f64>() / o as f64,
        rmse: r,
        smape: s,
        n_samples: f.truth.len(),
        param_count,
        latency: None,
    })
}

/// Deterministic held-out evaluation in measurement units.
pub fn evaluate(model: &ModelState, pairs: &[WindowPair], target_scaler: &ScalerParams) -> Result<(MetricsReport, Forecasts), EvalError> {
    let f = forecast(model, pairs, target_scaler)?;
    let m = metrics(model.family().name(), &f, model.param_count())?;
    Ok((m, f))
}
