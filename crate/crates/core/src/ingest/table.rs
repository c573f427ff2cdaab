use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::IngestError;

/// One named feature column. Missing cells hold `NaN` until interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
    /// `true` where the raw value was missing (kept after interpolation).
    pub gaps: Vec<bool>,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, values: Vec<f64>) -> Self {
        let gaps = values.iter().map(|v| v.is_nan()).collect();
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
            gaps,
        }
    }

    pub fn gap_count(&self) -> usize {
        self.gaps.iter().filter(|g| **g).count()
    }
}

/// Hourly timestamped feature columns for a single station.
///
/// Timestamps are implicit: row `i` is `start + i` hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTable {
    pub station_id: String,
    pub start: DateTime<Utc>,
    pub columns: Vec<Column>,
}

impl SeriesTable {
    pub fn new(
        station_id: impl Into<String>,
        start: DateTime<Utc>,
        columns: Vec<Column>,
    ) -> Result<Self, IngestError> {
        let len = columns.first().map(|c| c.values.len()).unwrap_or(0);
        if len == 0 {
            return Err(IngestError::NoRows);
        }
        for c in &columns {
            if c.values.len() != len || c.gaps.len() != len {
                return Err(IngestError::RaggedColumns(c.name.clone()));
            }
        }
        if start.timestamp() % 3600 != 0 {
            return Err(IngestError::NonHourlyCadence(start.to_rfc3339()));
        }
        Ok(Self {
            station_id: station_id.into(),
            start,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.first().map(|c| c.values.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn timestamp(&self, row: usize) -> DateTime<Utc> {
        self.start + Duration::hours(row as i64)
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut Column> {
        self.columns.iter_mut().find(|c| c.name == name)
    }

    pub fn values(&self, name: &str) -> Result<&[f64], IngestError> {
        self.column(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    }

    /// Contiguous row range `[start, start + len)` as a new table.
    pub fn slice(&self, start: usize, len: usize) -> Result<SeriesTable, IngestError> {
        if len == 0 || start + len > self.len() {
            return Err(IngestError::RowRange {
                start,
                len,
                available: self.len(),
            });
        }
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                unit: c.unit.clone(),
                values: c.values[start..start + len].to_vec(),
                gaps: c.gaps[start..start + len].to_vec(),
            })
            .collect();
        Ok(SeriesTable {
            station_id: self.station_id.clone(),
            start: self.timestamp(start),
            columns,
        })
    }

    /// Table restricted to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<SeriesTable, IngestError> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n)
                    .cloned()
                    .ok_or_else(|| IngestError::MissingColumn(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SeriesTable {
            station_id: self.station_id.clone(),
            start: self.start,
            columns,
        })
    }

    pub fn has_missing(&self) -> bool {
        self.columns
            .iter()
            .any(|c| c.values.iter().any(|v| v.is_nan()))
    }
}
