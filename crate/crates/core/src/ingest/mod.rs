//! Station data ingestion: CSV parsing, gap filling, availability
//! accounting and synthetic data.

mod clean;
mod csvio;
mod synth;
mod table;

pub use clean::{availability, interpolate, mask_outliers, AvailabilityReport, OutlierBounds};
pub use csvio::{
    format_timestamp, parse_csv, parse_reader, parse_timestamp, schema_of, write_csv,
    write_csv_file, write_csv_with_header, ColumnSpec, TIMESTAMP,
};
pub use synth::{synthesize, SynthConfig, B_GAIN, B_NOISE, B_OFFSET};
pub use table::{Column, SeriesTable};

/// Pollutant columns shared by both stations, in output order.
pub const POLLUTANTS: [&str; 4] = ["NO2", "O3", "PM10", "PM25"];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(String),
    #[error("timestamp {0} is not on an hour boundary")]
    NonHourlyCadence(String),
    #[error("cannot parse timestamp `{0}`")]
    BadTimestamp(String),
    #[error("column `{0}` has no observed values")]
    AllMissingColumn(String),
    #[error("table has no rows")]
    NoRows,
    #[error("column `{0}` length differs from the others")]
    RaggedColumns(String),
    #[error("rows {start}..{} out of range (table has {available})", start + len)]
    RowRange {
        start: usize,
        len: usize,
        available: usize,
    },
    #[error("synthetic data: {0}")]
    Synth(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
