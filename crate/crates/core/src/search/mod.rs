//! Grid search with cross-validation.

mod folds;
mod grid;
mod run;

pub use folds::{kfold_splits, sliding_window_splits, CvScheme, Fold};
pub use grid::{GridPoint, GridSpec};
pub use run::{cell_seed, grid_search, ConfigResult, SearchOptions, SearchResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("{pairs} pairs are too few; need at least {needed}")]
    TooFewPairs { pairs: usize, needed: usize },
    #[error("invalid cross-validation scheme: {0}")]
    InvalidScheme(String),
    #[error("journal was written for a different search (hash {found}, expected {expected})")]
    JournalMismatch { found: String, expected: String },
    #[error("corrupt journal line {line}: {reason}")]
    CorruptJournal { line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
