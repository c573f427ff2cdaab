use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Chunk, PipelineError};

/// Absolute Pearson correlation coefficient of two equally long samples.
pub fn pearson_abs(x: &[f64], y: &[f64]) -> Result<f64, PipelineError> {
    if x.len() != y.len() {
        return Err(PipelineError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(PipelineError::TooFewSamples(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(PipelineError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).abs().min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// Targets first, then surviving covariates in candidate order.
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
    /// Row/column names of `r_matrix`.
    pub names: Vec<String>,
    pub r_matrix: Vec<Vec<f64>>,
    pub r_th: f64,
}

impl FeatureSelection {
    /// Correlation matrix as CSV with a leading name column.
    pub fn write_matrix_csv<W: Write>(&self, out: W) -> Result<(), PipelineError> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for (name, row) in self.names.iter().zip(&self.r_matrix) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn concat_source(chunks: &[Chunk], name: &str) -> Result<Vec<f64>, PipelineError> {
    let mut out = Vec::new();
    for c in chunks {
        out.extend_from_slice(c.source.values(name)?);
    }
    Ok(out)
}

/// Keeps every target plus each candidate whose strongest |r| against any
/// target reaches `r_th`. Correlations are computed on the source station
/// over the concatenated training chunks.
pub fn select_features(
    train: &[Chunk],
    targets: &[String],
    candidates: &[String],
    r_th: f64,
) -> Result<FeatureSelection, PipelineError> {
    if train.is_empty() {
        return Err(PipelineError::EmptyTrainingSet);
    }
    let names: Vec<String> = targets.iter().chain(candidates).cloned().collect();
    let series = names
        .iter()
        .map(|n| concat_source(train, n))
        .collect::<Result<Vec<_>, _>>()?;
    let d = names.len();
    let mut r = vec![vec![1.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let v = pearson_abs(&series[i], &series[j])?;
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    let mut kept = targets.to_vec();
    let mut dropped = Vec::new();
    for (ci, cand) in candidates.iter().enumerate() {
        let row = targets.len() + ci;
        let best = (0..targets.len()).map(|t| r[row][t]).fold(0.0, f64::max);
        if best >= r_th {
            kept.push(cand.clone());
        } else {
            dropped.push(cand.clone());
        }
    }
    Ok(FeatureSelection {
        kept,
        dropped,
        names,
        r_matrix: r,
        r_th,
    })
}
