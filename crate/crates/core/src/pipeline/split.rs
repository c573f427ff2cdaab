use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::ingest::SeriesTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

/// One contiguous hour range of the aligned station tables and its role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkAssignment {
    #[serde(default)]
    pub label: String,
    /// First row (hours since the table start).
    pub start: usize,
    pub len: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub chunks: Vec<ChunkAssignment>,
}

impl SplitSpec {
    /// Three consecutive chunks covering `total` hours in the given proportions.
    pub fn chronological(total: usize, train: f64, validation: f64) -> Self {
        let n_train = (total as f64 * train).round() as usize;
        let n_val = (total as f64 * validation).round() as usize;
        let n_test = total.saturating_sub(n_train + n_val);
        let mut chunks = Vec::new();
        let mut at = 0;
        for (label, len, role) in [
            ("train", n_train, Role::Train),
            ("validation", n_val, Role::Validation),
            ("test", n_test, Role::Test),
        ] {
            if len > 0 {
                chunks.push(ChunkAssignment {
                    label: label.into(),
                    start: at,
                    len,
                    role,
                });
            }
            at += len;
        }
        Self { chunks }
    }

    /// Lay out `(label, len, role)` triples back to back from row 0.
    pub fn consecutive<S: Into<String>>(parts: impl IntoIterator<Item = (S, usize, Role)>) -> Self {
        let mut at = 0;
        let chunks = parts
            .into_iter()
            .map(|(label, len, role)| {
                let c = ChunkAssignment {
                    label: label.into(),
                    start: at,
                    len,
                    role,
                };
                at += len;
                c
            })
            .collect();
        Self { chunks }
    }

    fn validate(&self, available: usize) -> Result<(), PipelineError> {
        let mut ranges: Vec<(usize, usize, &str)> = Vec::new();
        for c in &self.chunks {
            if c.len == 0 || c.start + c.len > available {
                return Err(PipelineError::ChunkOutOfRange {
                    label: c.label.clone(),
                    start: c.start,
                    len: c.len,
                    available,
                });
            }
            ranges.push((c.start, c.start + c.len, &c.label));
        }
        ranges.sort();
        for w in ranges.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(PipelineError::OverlappingAssignment(
                    w[0].2.to_string(),
                    w[1].2.to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Aligned slices of both stations for one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub id: usize,
    pub label: String,
    pub role: Role,
    /// Row offset of the chunk in the full tables.
    pub offset: usize,
    pub source: SeriesTable,
    pub target: SeriesTable,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    pub train_hours: usize,
    pub validation_hours: usize,
    pub test_hours: usize,
}

impl Balance {
    pub fn total(&self) -> usize {
        self.train_hours + self.validation_hours + self.test_hours
    }

    /// Percentages (train, validation, test) of the assigned hours.
    pub fn percentages(&self) -> (f64, f64, f64) {
        let t = self.total().max(1) as f64;
        (
            100.0 * self.train_hours as f64 / t,
            100.0 * self.validation_hours as f64 / t,
            100.0 * self.test_hours as f64 / t,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub train: Vec<Chunk>,
    pub validation: Vec<Chunk>,
    pub test: Vec<Chunk>,
    pub balance: Balance,
}

impl SplitData {
    pub fn role(&self, role: Role) -> &[Chunk] {
        match role {
            Role::Train => &self.train,
            Role::Validation => &self.validation,
            Role::Test => &self.test,
        }
    }
}

/// Cuts the aligned station tables into role-tagged contiguous chunks.
/// Chunk ids follow the order of `spec.chunks`.
pub fn split(
    source: &SeriesTable,
    target: &SeriesTable,
    spec: &SplitSpec,
) -> Result<SplitData, PipelineError> {
    if source.start != target.start || source.len() != target.len() {
        return Err(PipelineError::LayoutMismatch(format!(
            "station tables are not aligned ({} rows from {} vs {} rows from {})",
            source.len(),
            source.start,
            target.len(),
            target.start
        )));
    }
    spec.validate(source.len())?;
    let mut out = SplitData {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        balance: Balance {
            train_hours: 0,
            validation_hours: 0,
            test_hours: 0,
        },
    };
    for (id, c) in spec.chunks.iter().enumerate() {
        let chunk = Chunk {
            id,
            label: c.label.clone(),
            role: c.role,
            offset: c.start,
            source: source.slice(c.start, c.len)?,
            target: target.slice(c.start, c.len)?,
        };
        match c.role {
            Role::Train => {
                out.balance.train_hours += c.len;
                out.train.push(chunk);
            }
            Role::Validation => {
                out.balance.validation_hours += c.len;
                out.validation.push(chunk);
            }
            Role::Test => {
                out.balance.test_hours += c.len;
                out.test.push(chunk);
            }
        }
    }
    Ok(out)
}
