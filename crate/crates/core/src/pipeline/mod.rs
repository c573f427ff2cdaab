//! Chronological splitting, correlation filtering, min-max scaling and
//! window-pair generation.

mod features;
mod pairs;
mod scaler;
mod split;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use features::{pearson_abs, select_features, FeatureSelection};
pub use pairs::{
    generate_pairs, reference_pair_count, PairSetStats, WindowGeometry, WindowPair,
};
pub use scaler::{scale_chunks, FeatureRange, ScalerParams, Station};
pub use split::{split, Balance, Chunk, ChunkAssignment, Role, SplitData, SplitSpec};

use crate::ingest::{IngestError, SeriesTable, POLLUTANTS};

pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("assignments `{0}` and `{1}` overlap")]
    OverlappingAssignment(String, String),
    #[error("chunk `{label}` rows {start}..{} exceed the {available} available hours", start + len)]
    ChunkOutOfRange {
        label: String,
        start: usize,
        len: usize,
        available: usize,
    },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("input has zero variance")]
    ConstantInput,
    #[error("training split is empty")]
    EmptyTrainingSet,
    #[error("column `{0}` still has missing values; interpolate first")]
    MissingValues(String),
    #[error("invalid window geometry {0:?}")]
    InvalidGeometry(WindowGeometry),
    #[error("sidecar format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub r_th: f64,
    pub input_len: usize,
    pub horizon: usize,
    pub stride: usize,
    /// Pollutant names, kept unconditionally and forecast at the target station.
    pub targets: Vec<String>,
    /// Covariates subject to the correlation filter.
    pub candidates: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            r_th: 0.15,
            input_len: 72,
            horizon: 24,
            stride: 24,
            targets: POLLUTANTS.iter().map(|s| s.to_string()).collect(),
            candidates: ["AP", "DPT", "MWD", "MWS", "SD", "T"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl PipelineConfig {
    pub fn geometry(&self) -> WindowGeometry {
        WindowGeometry {
            input_len: self.input_len,
            horizon: self.horizon,
            stride: self.stride,
        }
    }
}

/// Everything needed to rebuild model inputs from raw station data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSidecar {
    pub format_version: u32,
    pub config_hash: String,
    pub geometry: WindowGeometry,
    pub selection: FeatureSelection,
    pub input_scaler: ScalerParams,
    pub target_scaler: ScalerParams,
}

impl PipelineSidecar {
    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string(self).map_err(|e| PipelineError::Sidecar(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = toml::from_str(text).map_err(|e| PipelineError::Sidecar(e.to_string()))?;
        if probe.format_version != SIDECAR_VERSION {
            return Err(PipelineError::VersionMismatch {
                found: probe.format_version,
                expected: SIDECAR_VERSION,
            });
        }
        toml::from_str(text).map_err(|e| PipelineError::Sidecar(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Window pairs of one role with their accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub role: Role,
    pub pairs: Vec<WindowPair>,
    pub stats: PairSetStats,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub sidecar: PipelineSidecar,
    pub split: SplitData,
    pub train: PairSet,
    pub validation: PairSet,
    pub test: PairSet,
}

/// Split → select → scale → pair, with everything fitted on the training
/// chunks. Input tables must already be gap-free.
pub fn prepare(
    source: &SeriesTable,
    target: &SeriesTable,
    spec: &SplitSpec,
    cfg: &PipelineConfig,
    config_hash: &str,
) -> Result<Prepared, PipelineError> {
    let data = split(source, target, spec)?;
    let selection = select_features(&data.train, &cfg.targets, &cfg.candidates, cfg.r_th)?;
    let input_scaler = ScalerParams::fit(&data.train, &selection.kept, Station::Source)?;
    let target_scaler = ScalerParams::fit(&data.train, &cfg.targets, Station::Target)?;
    let geometry = cfg.geometry();
    let make = |role: Role| -> Result<PairSet, PipelineError> {
        let scaled = scale_chunks(data.role(role), &input_scaler, &target_scaler)?;
        let (pairs, stats) = generate_pairs(&scaled, geometry)?;
        Ok(PairSet { role, pairs, stats })
    };
    let train = make(Role::Train)?;
    let validation = make(Role::Validation)?;
    let test = make(Role::Test)?;
    Ok(Prepared {
        sidecar: PipelineSidecar {
            format_version: SIDECAR_VERSION,
            config_hash: config_hash.to_string(),
            geometry,
            selection,
            input_scaler,
            target_scaler,
        },
        split: data,
        train,
        validation,
        test,
    })
}
