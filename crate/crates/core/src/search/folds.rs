use serde::{Deserialize, Serialize};

use super::SearchError;

/// Pair indices used for training and validation in one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CvScheme {
    Kfold { k_folds: usize },
    SlidingWindow { k_folds: usize, train_frac: f64, val_frac: f64 },
    /// One fold: pairs before `validation_start` train, the rest validate.
    Holdout { validation_start: usize },
}

impl CvScheme {
    /// k-fold for fully connected families, sliding window for recurrent ones.
    pub fn for_family(recurrent: bool, k_folds: usize) -> Self {
        if recurrent {
            Self::SlidingWindow {
                k_folds,
                train_frac: 0.7,
                val_frac: 0.1,
            }
        } else {
            Self::Kfold { k_folds }
        }
    }

    pub fn k_folds(&self) -> usize {
        match self {
            Self::Kfold { k_folds } | Self::SlidingWindow { k_folds, .. } => *k_folds,
            Self::Holdout { .. } => 1,
        }
    }

    pub fn folds(&self, n_pairs: usize) -> Result<Vec<Fold>, SearchError> {
        match *self {
            Self::Kfold { k_folds } => kfold_splits(n_pairs, k_folds),
            Self::SlidingWindow {
                k_folds,
                train_frac,
                val_frac,
            } => sliding_window_splits(n_pairs, k_folds, train_frac, val_frac),
            Self::Holdout { validation_start } => {
                if validation_start == 0 || validation_start >= n_pairs {
                    return Err(SearchError::TooFewPairs {
                        pairs: n_pairs,
                        needed: validation_start.max(1) + 1,
                    });
                }
                Ok(vec![Fold {
                    train: (0..validation_start).collect(),
                    validation: (validation_start..n_pairs).collect(),
                }])
            }
        }
    }
}

/// Contiguous, balanced validation blocks; the first `n mod k` blocks hold
/// one extra pair. Everything outside a block trains that fold.
pub fn kfold_splits(n_pairs: usize, k_folds: usize) -> Result<Vec<Fold>, SearchError> {
    if k_folds == 0 || n_pairs < k_folds {
        return Err(SearchError::TooFewPairs {
            pairs: n_pairs,
            needed: k_folds.max(1),
        });
    }
    if k_folds == 1 {
        return Err(SearchError::InvalidScheme("k-fold needs at least two folds".into()));
    }
    let (base, extra) = (n_pairs / k_folds, n_pairs % k_folds);
    let mut start = 0;
    Ok((0..k_folds)
        .map(|j| {
            let len = base + usize::from(j < extra);
            let val: Vec<usize> = (start..start + len).collect();
            let train = (0..start).chain(start + len..n_pairs).collect();
            start += len;
            Fold { train, validation: val }
        })
        .collect())
}

/// Chronological windows: fold `j` trains on `[s_j, s_j + T)` and validates
/// on `[s_j + T, s_j + T + V)`, with `T = round(train_frac · n)`,
/// `V = round(val_frac · n)` and starts `s_j = ⌊j (n − T − V) / (k − 1)⌋`.
pub fn sliding_window_splits(n_pairs: usize, k_folds: usize, train_frac: f64, val_frac: f64) -> Result<Vec<Fold>, SearchError> {
    if k_folds == 0 {
        return Err(SearchError::InvalidScheme("at least one fold is required".into()));
    }
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac <= 1.0) {
        return Err(SearchError::InvalidScheme(format!(
            "fractions {train_frac} and {val_frac} must be positive and sum to at most 1"
        )));
    }
    let t = (train_frac * n_pairs as f64).round() as usize;
    let v = (val_frac * n_pairs as f64).round() as usize;
    if t == 0 || v == 0 || t + v > n_pairs {
        return Err(SearchError::TooFewPairs {
            pairs: n_pairs,
            needed: (1.0 / train_frac.min(val_frac)).ceil() as usize,
        });
    }
    let slack = n_pairs - t - v;
    Ok((0..k_folds)
        .map(|j| {
            let s = if k_folds == 1 { slack } else { j * slack / (k_folds - 1) };
            Fold {
                train: (s..s + t).collect(),
                validation: (s + t..s + t + v).collect(),
            }
        })
        .collect())
}
