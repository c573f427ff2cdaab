use std::fmt::Write as _;
use std::io::Write;

use chrono::{DateTime, Duration, Utc};

use super::{EvalError, Forecasts, MetricsReport};
use crate::ingest::format_timestamp;
use crate::train::TrainReport;

fn csv_err(e: csv::Error) -> EvalError {
    EvalError::Io(std::io::Error::other(e))
}

fn comment_lines<W: Write>(out: &mut W, header: &[(&str, &str)]) -> Result<(), EvalError> {
    for (k, v) in header {
        writeln!(out, "# {k}: {v}")?;
    }
    Ok(())
}

/// One row per model: `model, rmse_<p>…, rmse_total, smape_<p>…, smape_total,
/// t_inf_ms, param_count`. Latency is blank when it was not measured.
pub fn write_metrics_csv<W: Write>(reports: &[MetricsReport], mut out: W, header: &[(&str, &str)]) -> Result<(), EvalError> {
    comment_lines(&mut out, header)?;
    let names = reports.first().map(|r| r.names.clone()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    let mut cols = vec!["model".to_string()];
    cols.extend(names.iter().map(|n| format!("rmse_{n}")));
    cols.push("rmse_total".into());
    cols.extend(names.iter().map(|n| format!("smape_{n}")));
    cols.push("smape_total".into());
    cols.push("t_inf_ms".into());
    cols.push("param_count".into());
    w.write_record(&cols).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![r.model.clone()];
        row.extend(r.rmse.iter().map(|v| format!("{v:.4}")));
        row.push(format!("{:.4}", r.rmse_total));
        row.extend(r.smape.iter().map(|v| format!("{v:.4}")));
        row.push(format!("{:.4}", r.smape_total));
        row.push(r.latency.as_ref().map(|l| format!("{:.3}", l.median_ms)).unwrap_or_default());
        row.push(r.param_count.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Forecast against truth for `hours` consecutive forecast hours beginning
/// with pair `first_pair`. Hours are labelled from `series_start`.
pub fn write_forecast_csv<W: Write>(
    f: &Forecasts,
    first_pair: usize,
    hours: usize,
    series_start: DateTime<Utc>,
    mut out: W,
    header: &[(&str, &str)],
) -> Result<usize, EvalError> {
    comment_lines(&mut out, header)?;
    let mut w = csv::Writer::from_writer(out);
    let mut cols = vec!["timestamp".to_string()];
    for n in &f.names {
        cols.push(format!("{n}_truth"));
        cols.push(format!("{n}_forecast"));
    }
    w.write_record(&cols).map_err(csv_err)?;
    let o = f.outputs();
    let mut written = 0;
    'pairs: for p in first_pair..f.pairs() {
        for s in 0..f.horizon {
            if written == hours {
                break 'pairs;
            }
            let at = (p * f.horizon + s) * o;
            let ts = series_start + Duration::hours((f.first_hour[p] + s) as i64);
            let mut row = vec![format_timestamp(ts)];
            for j in 0..o {
                row.push(format!("{:.4}", f.truth[at + j]));
                row.push(format!("{:.4}", f.pred[at + j]));
            }
            w.write_record(&row).map_err(csv_err)?;
            written += 1;
        }
    }
    w.flush()?;
    Ok(written)
}

/// `model,epoch,phase,train_loss,val_loss` for every record of every report.
pub fn write_losses_csv<W: Write>(runs: &[(&str, &TrainReport)], mut out: W, header: &[(&str, &str)]) -> Result<(), EvalError> {
    comment_lines(&mut out, header)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "epoch", "phase", "train_loss", "val_loss"]).map_err(csv_err)?;
    for (name, r) in runs {
        for rec in &r.records {
            w.write_record([
                name.to_string(),
                rec.epoch.to_string(),
                rec.phase.to_string(),
                rec.train_loss.to_string(),
                rec.val_loss.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

const W: f64 = 800.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;

fn polyline(values: &[f64], lo: f64, hi: f64, colour: &str) -> String {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let dx = if values.len() > 1 { (W - 2.0 * PAD) / (values.len() - 1) as f64 } else { 0.0 };
    let mut pts = String::new();
    for (i, v) in values.iter().enumerate() {
        let x = PAD + i as f64 * dx;
        let y = H - PAD - (v - lo) / span * (H - 2.0 * PAD);
        let _ = write!(pts, "{x:.1},{y:.1} ");
    }
    format!("<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n", pts.trim_end())
}

/// Line plot of several named series sharing one y axis.
pub fn svg_lines(title: &str, series: &[(&str, &[f64], &str)]) -> String {
    let finite = series.iter().flat_map(|s| s.1.iter()).filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, |a, b| a.min(*b));
    let hi = finite.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(s, "<text x=\"{PAD}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>", escape(title));
    let _ = writeln!(
        s,
        "<text x=\"4\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{hi:.3}</text><text x=\"4\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{lo:.3}</text>",
        PAD,
        H - PAD
    );
    for (i, (name, values, colour)) in series.iter().enumerate() {
        s.push_str(&polyline(values, lo, hi, colour));
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{colour}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            W - 160.0,
            20.0 + 14.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Truth in black, forecast in maroon, for one output over `hours` hours.
pub fn forecast_svg(f: &Forecasts, output: usize, first_pair: usize, hours: usize) -> String {
    let o = f.outputs();
    let start = first_pair * f.horizon * o;
    let end = (start + hours * o).min(f.truth.len());
    let truth: Vec<f64> = f.truth[start.min(end)..end].iter().skip(output).step_by(o).copied().collect();
    let pred: Vec<f64> = f.pred[start.min(end)..end].iter().skip(output).step_by(o).copied().collect();
    svg_lines(&f.names[output], &[("truth", &truth, "black"), ("forecast", &pred, "maroon")])
}

/// Training and validation loss per epoch (end of round for hierarchical runs).
pub fn loss_svg(name: &str, r: &TrainReport) -> String {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, rec) in r.records.iter().enumerate() {
        if r.records.get(i + 1).is_none_or(|n| n.epoch != rec.epoch) {
            train.push(rec.train_loss);
            val.push(rec.val_loss);
        }
    }
    svg_lines(name, &[("train", &train, "steelblue"), ("validation", &val, "darkorange")])
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn forecasts() -> Forecasts {
        let names: Vec<String> = ["NO2", "O3", "PM10", "PM25"].iter().map(|s| s.to_string()).collect();
        let n = 3 * 24 * 4;
        Forecasts {
            names,
            horizon: 24,
            pred: (0..n).map(|i| i as f64).collect(),
            truth: (0..n).map(|i| i as f64 + 0.5).collect(),
            first_hour: vec![49, 73, 97],
        }
    }

    fn report(model: &str, latency: Option<f64>) -> MetricsReport {
        MetricsReport {
            model: model.into(),
            names: forecasts().names,
            rmse: vec![1.0, 2.0, 3.0, 4.0],
            rmse_total: 2.5,
            smape: vec![10.0, 20.0, 30.0, 40.0],
            smape_total: 25.0,
            smape_mean: 25.0,
            n_samples: 96,
            param_count: 17604,
            latency: latency.map(|m| super::super::LatencyStats::from_samples(vec![m]).unwrap()),
        }
    }

    #[test]
    fn metrics_columns() {
        let mut out = Vec::new();
        write_metrics_csv(&[report("MLP", Some(1.25)), report("GRU", None)], &mut out, &[("config_hash", "abc")]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# config_hash: abc");
        assert_eq!(
            lines[1],
            "model,rmse_NO2,rmse_O3,rmse_PM10,rmse_PM25,rmse_total,smape_NO2,smape_O3,smape_PM10,smape_PM25,smape_total,t_inf_ms,param_count"
        );
        assert!(lines[2].ends_with(",1.250,17604"));
        assert!(lines[3].ends_with(",,17604"));
    }

    #[test]
    fn forecast_rows_match_request() {
        let start = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap();
        for hours in [1, 24, 50, 72] {
            let mut out = Vec::new();
            let n = write_forecast_csv(&forecasts(), 0, hours, start, &mut out, &[]).unwrap();
            assert_eq!(n, hours);
            assert_eq!(String::from_utf8(out).unwrap().lines().count(), hours + 1);
        }
        let mut out = Vec::new();
        write_forecast_csv(&forecasts(), 1, 2, start, &mut out, &[]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("2017-01-04T01:00:00Z,96.5000,96.0000"));
    }

    #[test]
    fn forecast_svg_has_both_series() {
        let svg = forecast_svg(&forecasts(), 2, 0, 168);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("black") && svg.contains("maroon"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
