use serde::{Deserialize, Serialize};

use super::SearchError;

/// Finite value sets for each tuned hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub layers: Vec<usize>,
    pub width: Vec<usize>,
    /// Learning rate, or the shared learning rate of hierarchical models
    /// (branches then use `layers ×` this value).
    pub lr: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// One configuration of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub layers: usize,
    pub width: usize,
    pub lr: f64,
    pub lambda: f64,
}

impl GridPoint {
    /// Stable textual identity, independent of enumeration order.
    pub fn key(&self) -> String {
        format!("k={};w={};lr={:e};lambda={:e}", self.layers, self.width, self.lr, self.lambda)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            layers: vec![4, 7],
            width: vec![48, 64],
            lr: vec![1e-3, 1e-4],
            lambda: vec![0.0, 1e-5],
        }
    }
}

impl GridSpec {
    pub fn size(&self) -> usize {
        self.layers.len() * self.width.len() * self.lr.len() * self.lambda.len()
    }

    /// Cartesian product in nested-loop order `layers → width → lr → lambda`.
    pub fn enumerate(&self) -> Result<Vec<GridPoint>, SearchError> {
        for (name, len) in [
            ("layers", self.layers.len()),
            ("width", self.width.len()),
            ("lr", self.lr.len()),
            ("lambda", self.lambda.len()),
        ] {
            if len == 0 {
                return Err(SearchError::EmptyAxis(name));
            }
        }
        let mut out = Vec::with_capacity(self.size());
        for &layers in &self.layers {
            for &width in &self.width {
                for &lr in &self.lr {
                    for &lambda in &self.lambda {
                        out.push(GridPoint { layers, width, lr, lambda });
                    }
                }
            }
        }
        Ok(out)
    }
}
