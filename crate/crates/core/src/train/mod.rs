//! Loss, optimisation, scheduling and the training loops.

mod adam;
mod batch;
mod fit;
mod loss;
mod schedule;

pub use adam::{adam_step, Adam, BETA1, BETA2, EPSILON};
pub use batch::make_batches;
pub use fit::{predict, train, train_hierarchical, train_monolithic, validation_mse};
pub use loss::{add_l2_grad, l2_norm_sq, mse_l2};
pub use schedule::{early_stop, Plateau, ReduceOnPlateau};

use std::fmt;
use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{Family, ModelError};
use crate::neuro::NeuroError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("{0}")]
    WrongFamily(String),
    #[error("{0} set is empty")]
    EmptyData(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Neuro(#[from] NeuroError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_min_improvement() -> f64 {
    1e-5
}
fn default_factor() -> f64 {
    0.1
}
fn default_batch() -> usize {
    16
}
fn default_max_epochs() -> usize {
    500
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Learning rate of monolithic models, or of the shared layer.
    pub lr: f64,
    /// Branch learning rate. `None` ties it to `layers × lr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_branch: Option<f64>,
    pub lambda: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub patience: usize,
    #[serde(default = "default_min_improvement")]
    pub min_improvement: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_factor")]
    pub plateau_factor: f64,
    /// Defaults to half of `patience`, rounded up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_patience: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shuffle: bool,
}

impl TrainConfig {
    /// Settings selected for each family by the reference tuning runs.
    pub fn reference(family: Family) -> Self {
        let (lr, lambda, patience) = match family {
            Family::Mlp => (1e-5, 1e-5, 6),
            Family::Hmlp => (1e-4, 1e-5, 6),
            Family::Lstm => (1e-3, 1e-6, 15),
            Family::Hlstm => (1e-4, 0.0, 15),
            Family::Gru => (1e-3, 1e-5, 15),
            Family::Hgru => (1e-3, 1e-7, 15),
        };
        Self {
            lr,
            lr_branch: None,
            lambda,
            batch_size: 16,
            patience,
            min_improvement: 1e-5,
            max_epochs: default_max_epochs(),
            plateau_factor: 0.1,
            plateau_patience: None,
            seed: 0,
            shuffle: true,
        }
    }

    pub fn branch_lr(&self, layers: usize) -> f64 {
        self.lr_branch.unwrap_or(layers as f64 * self.lr)
    }

    pub fn plateau_patience(&self) -> usize {
        self.plateau_patience.unwrap_or(self.patience.div_ceil(2)).max(1)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(self.lr >= 0.0) || self.lr_branch.is_some_and(|l| !(l >= 0.0)) {
            return bad("learning rates must be non-negative");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            return bad("plateau_factor must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Full,
    Shared,
    Branch,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Full => "full",
            Phase::Shared => "shared",
            Phase::Branch => "branch",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

/// One pass over the training batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based; both phases of a hierarchical round share the number.
    pub epoch: usize,
    pub phase: Phase,
    /// Mean batch loss including the penalty term.
    pub train_loss: f64,
    /// Validation MSE after the phase.
    pub val_loss: f64,
    /// Learning rate of each component in effect during the phase.
    pub lrs: Vec<f64>,
    /// Component value digests before and after the phase.
    pub digests_before: Vec<u64>,
    pub digests_after: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub components: Vec<String>,
    pub records: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    /// Epoch whose parameters were kept; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub wall_time: Duration,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components
            && self.records == other.records
            && self.stop_reason == other.stop_reason
            && self.best_epoch == other.best_epoch
            && self.best_val_loss.to_bits() == other.best_val_loss.to_bits()
    }
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.records.last().map_or(0, |r| r.epoch)
    }

    /// Validation loss at the end of each epoch (round for hierarchical models).
    pub fn val_history(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            let last_of_epoch = self.records.get(i + 1).is_none_or(|n| n.epoch != r.epoch);
            if last_of_epoch {
                out.push(r.val_loss);
            }
        }
        out
    }

    /// Writes `epoch,phase,train_loss,val_loss,lr_<component>...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["epoch".to_string(), "phase".into(), "train_loss".into(), "val_loss".into()];
        header.extend(self.components.iter().map(|c| format!("lr_{c}")));
        w.write_record(&header).map_err(csv_io)?;
        for r in &self.records {
            let mut row = vec![r.epoch.to_string(), r.phase.to_string(), r.train_loss.to_string(), r.val_loss.to_string()];
            row.extend(r.lrs.iter().map(|l| l.to_string()));
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> TrainError {
    TrainError::Io(std::io::Error::other(e))
}
