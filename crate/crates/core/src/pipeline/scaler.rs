use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Chunk, PipelineError};
use crate::ingest::SeriesTable;

/// Which station of a chunk a scaler is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Station {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }

    /// Constant features map to 0.5.
    pub fn apply(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn invert(&self, x: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            x * (self.max - self.min) + self.min
        }
    }
}

/// Min-max ranges fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub station: Station,
    pub features: Vec<FeatureRange>,
}

impl ScalerParams {
    pub fn fit(
        train: &[Chunk],
        names: &[String],
        station: Station,
    ) -> Result<Self, PipelineError> {
        if train.is_empty() {
            return Err(PipelineError::EmptyTrainingSet);
        }
        let mut features = Vec::with_capacity(names.len());
        for name in names {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for c in train {
                let table = match station {
                    Station::Source => &c.source,
                    Station::Target => &c.target,
                };
                for &v in table.values(name)? {
                    if v.is_nan() {
                        return Err(PipelineError::MissingValues(name.clone()));
                    }
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let range = FeatureRange {
                name: name.clone(),
                min: lo,
                max: hi,
            };
            if range.is_constant() {
                log::warn!("feature {name} is constant on the training split; it scales to 0.5");
            }
            features.push(range);
        }
        Ok(Self { station, features })
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureRange> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn constant_features(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| f.is_constant())
            .map(|f| f.name.as_str())
            .collect()
    }

    /// Scales a row laid out in this scaler's feature order.
    pub fn apply_row(&self, row: &mut [f64]) {
        for (x, f) in row.iter_mut().zip(&self.features) {
            *x = f.apply(*x);
        }
    }

    pub fn invert_row(&self, row: &mut [f64]) {
        for (x, f) in row.iter_mut().zip(&self.features) {
            *x = f.invert(*x);
        }
    }

    /// Selected and scaled copy of `table`, columns in scaler order.
    pub fn apply_table(&self, table: &SeriesTable) -> Result<SeriesTable, PipelineError> {
        let mut out = table.select(&self.names())?;
        for (col, f) in out.columns.iter_mut().zip(&self.features) {
            col.values.iter_mut().for_each(|v| *v = f.apply(*v));
            col.unit = "scaled".into();
        }
        Ok(out)
    }

    /// Hex SHA-256 of the exact parameter bits; identifies the scaler in
    /// model containers.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}", self.station).as_bytes());
        for f in &self.features {
            h.update(f.name.as_bytes());
            h.update([0u8]);
            h.update(f.min.to_le_bytes());
            h.update(f.max.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Scales both stations of every chunk: source columns become the selected
/// input features, target columns the pollutants.
pub fn scale_chunks(
    chunks: &[Chunk],
    input: &ScalerParams,
    target: &ScalerParams,
) -> Result<Vec<Chunk>, PipelineError> {
    chunks
        .iter()
        .map(|c| {
            Ok(Chunk {
                source: input.apply_table(&c.source)?,
                target: target.apply_table(&c.target)?,
                ..c.clone()
            })
        })
        .collect()
}
