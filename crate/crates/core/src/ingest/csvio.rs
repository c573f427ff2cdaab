//! Reading and writing station tables as hourly CSV.
//!
//! Files are UTF-8, comma separated, with a `timestamp` column holding
//! ISO-8601 hour stamps. Lines starting with `#` are comments. Empty or
//! unparseable numeric cells become missing cells; hours absent from the
//! file are inserted as fully missing rows.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};

use super::{Column, IngestError, SeriesTable};

pub const TIMESTAMP: &str = "timestamp";

/// Expected column names and units for one station file.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub columns: Vec<(String, String)>,
}

impl ColumnSpec {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = (S, S)>) -> Self {
        Self {
            columns: columns
                .into_iter()
                .map(|(n, u)| (n.into(), u.into()))
                .collect(),
        }
    }

    /// Source station: four pollutants plus six meteorological covariates.
    pub fn station_a() -> Self {
        Self::new([
            ("NO2", "ug/m3"),
            ("O3", "ug/m3"),
            ("PM10", "ug/m3"),
            ("PM25", "ug/m3"),
            ("AP", "0.1 hPa"),
            ("DPT", "0.1 degC"),
            ("MWD", "deg"),
            ("MWS", "0.1 m/s"),
            ("SD", "0.1 h"),
            ("T", "0.1 degC"),
        ])
    }

    /// Target station: the four pollutants only.
    pub fn station_b() -> Self {
        Self::new([
            ("NO2", "ug/m3"),
            ("O3", "ug/m3"),
            ("PM10", "ug/m3"),
            ("PM25", "ug/m3"),
        ])
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|(n, _)| n.clone()).collect()
    }
}

pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, IngestError> {
    let s = raw.trim();
    let parsed = DateTime::parse_from_rfc3339(s)
        .map(|d| d.with_timezone(&Utc))
        .or_else(|_| {
            ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
                .map(|n| n.and_utc())
                .ok_or(())
        })
        .map_err(|_| IngestError::BadTimestamp(s.to_string()))?;
    if parsed.timestamp() % 3600 != 0 {
        return Err(IngestError::NonHourlyCadence(s.to_string()));
    }
    Ok(parsed)
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn parse_csv(path: &Path, schema: &ColumnSpec) -> Result<SeriesTable, IngestError> {
    let file = std::fs::File::open(path)?;
    let station = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_reader(file, &station, schema)
}

pub fn parse_reader<R: Read>(
    reader: R,
    station_id: &str,
    schema: &ColumnSpec,
) -> Result<SeriesTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let ts_idx = position(TIMESTAMP)?;
    let col_idx = schema
        .columns
        .iter()
        .map(|(n, _)| position(n))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let raw_ts = record.get(ts_idx).unwrap_or("");
        let ts = parse_timestamp(raw_ts)?;
        let values = col_idx
            .iter()
            .map(|&i| {
                record
                    .get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .unwrap_or(f64::NAN)
            })
            .collect();
        if rows.insert(ts.timestamp(), values).is_some() {
            return Err(IngestError::DuplicateTimestamp(format_timestamp(ts)));
        }
    }

    let (&first, _) = rows.first_key_value().ok_or(IngestError::NoRows)?;
    let (&last, _) = rows.last_key_value().ok_or(IngestError::NoRows)?;
    let len = ((last - first) / 3600 + 1) as usize;
    let mut columns: Vec<Column> = schema
        .columns
        .iter()
        .map(|(n, u)| Column::new(n.clone(), u.clone(), vec![f64::NAN; len]))
        .collect();
    for (ts, values) in rows {
        let row = ((ts - first) / 3600) as usize;
        for (col, v) in columns.iter_mut().zip(values) {
            col.values[row] = v;
        }
    }
    for col in &mut columns {
        col.gaps = col.values.iter().map(|v| v.is_nan()).collect();
    }
    let start = DateTime::from_timestamp(first, 0).ok_or(IngestError::NoRows)?;
    SeriesTable::new(station_id, start, columns)
}

/// Writes `table` in the canonical layout. Missing cells are left empty.
pub fn write_csv<W: Write>(table: &SeriesTable, out: W) -> Result<(), IngestError> {
    write_csv_with_header(table, out, &[])
}

/// Like [`write_csv`] but prefixes `# key: value` comment lines.
pub fn write_csv_with_header<W: Write>(
    table: &SeriesTable,
    mut out: W,
    comments: &[(&str, &str)],
) -> Result<(), IngestError> {
    for (k, v) in comments {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec![TIMESTAMP.to_string()];
    header.extend(table.columns.iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;
    for row in 0..table.len() {
        let mut rec = vec![format_timestamp(table.timestamp(row))];
        rec.extend(table.columns.iter().map(|c| {
            let v = c.values[row];
            if v.is_nan() {
                String::new()
            } else {
                v.to_string()
            }
        }));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv_file(table: &SeriesTable, path: &Path) -> Result<(), IngestError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(table, file)
}

/// Schema derived from an existing table (names and units in column order).
pub fn schema_of(table: &SeriesTable) -> ColumnSpec {
    ColumnSpec::new(
        table
            .columns
            .iter()
            .map(|c| (c.name.clone(), c.unit.clone())),
    )
}
