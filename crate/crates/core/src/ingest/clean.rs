use std::collections::BTreeMap;
use std::io::Write;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{IngestError, SeriesTable};

/// Fills missing cells column by column.
///
/// Interior gaps are linearly interpolated between the nearest observed
/// neighbours; leading and trailing gaps take the nearest observed value.
/// Observed cells and the gap mask are left untouched.
pub fn interpolate(table: &SeriesTable) -> Result<SeriesTable, IngestError> {
    let mut out = table.clone();
    for col in &mut out.columns {
        let observed: Vec<usize> = (0..col.values.len())
            .filter(|&i| !col.values[i].is_nan())
            .collect();
        let (&first, &last) = match (observed.first(), observed.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(IngestError::AllMissingColumn(col.name.clone())),
        };
        let v = &mut col.values;
        let head = v[first];
        v[..first].iter_mut().for_each(|x| *x = head);
        let tail = v[last];
        v[last + 1..].iter_mut().for_each(|x| *x = tail);
        for pair in observed.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            if hi - lo < 2 {
                continue;
            }
            let (a, b) = (v[lo], v[hi]);
            let span = (hi - lo) as f64;
            for i in lo + 1..hi {
                let w = (i - lo) as f64 / span;
                v[i] = a + (b - a) * w;
            }
        }
    }
    Ok(out)
}

/// Inclusive plausibility bounds for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierBounds {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

/// Marks cells outside their column's bounds as missing. Columns without
/// bounds are untouched; with an empty bound list this is the identity.
pub fn mask_outliers(
    table: &SeriesTable,
    bounds: &[OutlierBounds],
) -> Result<SeriesTable, IngestError> {
    let mut out = table.clone();
    for b in bounds {
        let col = out
            .column_mut(&b.column)
            .ok_or_else(|| IngestError::MissingColumn(b.column.clone()))?;
        for (v, g) in col.values.iter_mut().zip(col.gaps.iter_mut()) {
            if !v.is_nan() && (*v < b.min || *v > b.max) {
                *v = f64::NAN;
                *g = true;
            }
        }
    }
    Ok(out)
}

/// Fraction of observed cells per (column, calendar year).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityReport {
    pub columns: Vec<String>,
    pub years: Vec<i32>,
    /// `fraction[year_idx][col_idx]`
    pub fraction: Vec<Vec<f64>>,
    pub missing: Vec<Vec<usize>>,
    pub total: Vec<usize>,
}

impl AvailabilityReport {
    pub fn get(&self, column: &str, year: i32) -> Option<f64> {
        let c = self.columns.iter().position(|n| n == column)?;
        let y = self.years.iter().position(|&v| v == year)?;
        Some(self.fraction[y][c])
    }

    /// Year-by-column layout, fractions rounded to four decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), IngestError> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["year".to_string()];
        header.extend(self.columns.iter().cloned());
        wtr.write_record(&header)?;
        for (y, year) in self.years.iter().enumerate() {
            let mut rec = vec![year.to_string()];
            rec.extend(self.fraction[y].iter().map(|f| format!("{f:.4}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn availability(table: &SeriesTable) -> AvailabilityReport {
    let mut per_year: BTreeMap<i32, (Vec<usize>, usize)> = BTreeMap::new();
    let ncol = table.columns.len();
    for row in 0..table.len() {
        let year = table.timestamp(row).year();
        let entry = per_year.entry(year).or_insert_with(|| (vec![0; ncol], 0));
        entry.1 += 1;
        for (c, col) in table.columns.iter().enumerate() {
            if col.gaps[row] {
                entry.0[c] += 1;
            }
        }
    }
    let mut report = AvailabilityReport {
        columns: table.columns.iter().map(|c| c.name.clone()).collect(),
        years: Vec::new(),
        fraction: Vec::new(),
        missing: Vec::new(),
        total: Vec::new(),
    };
    for (year, (missing, total)) in per_year {
        report.years.push(year);
        report.fraction.push(
            missing
                .iter()
                .map(|&m| 1.0 - m as f64 / total as f64)
                .collect(),
        );
        report.missing.push(missing);
        report.total.push(total);
    }
    report
}
