use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};

use smogcast::eval::{
    self, forecast_svg, loss_svg, paired_t_test, persistence_forecast, time_inference,
    write_forecast_csv, write_metrics_csv, Forecasts, MetricBasis, MetricsReport,
};
use smogcast::ingest::{
    availability, format_timestamp, interpolate, mask_outliers, parse_csv, synthesize,
    write_csv_with_header, ColumnSpec, SeriesTable,
};
use smogcast::models::{batch_of, load_model, save_model, Family, ModelState};
use smogcast::pipeline::{prepare, PairSet, PipelineSidecar, Role, WindowPair};
use smogcast::search::{grid_search, SearchOptions};
use smogcast::train::{train, TrainReport};

use crate::config::RunConfig;
use crate::error::CliError;

const HASH_KEY: &str = "config_hash";

/// Fixed artifact names inside the workdir.
pub struct Workdir(pub PathBuf);

impl Workdir {
    pub fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
    fn family(&self, f: Family, ext: &str) -> PathBuf {
        self.0.join(format!("{}.{ext}", f.name().to_ascii_lowercase()))
    }
    pub fn tidy(&self, station: &str) -> PathBuf {
        self.file(&format!("{station}.tidy.csv"))
    }
    pub fn sidecar(&self) -> PathBuf {
        self.file("pipeline.sidecar.toml")
    }
    pub fn pairs(&self, role: Role) -> PathBuf {
        let name = match role {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        };
        self.file(&format!("pairs.{name}.json"))
    }
    pub fn model(&self, f: Family) -> PathBuf {
        self.family(f, "model")
    }
}

/// Options shared by every subcommand.
pub struct Ctx {
    pub cfg: RunConfig,
    pub force: bool,
}

impl Ctx {
    fn workdir(&self) -> Result<Workdir, CliError> {
        std::fs::create_dir_all(&self.cfg.paths.workdir)?;
        Ok(Workdir(self.cfg.paths.workdir.clone()))
    }

    fn check(&self, what: &Path, found: Option<&str>, expected: &str) -> Result<(), CliError> {
        if self.force || found == Some(expected) {
            return Ok(());
        }
        Err(CliError::Data(format!(
            "{} was produced by config {}, current config is {expected}; rerun the upstream command or pass --force",
            what.display(),
            found.unwrap_or("<none>"),
        )))
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
    ))
}

/// Value of a `# key: value` line in the leading comment block.
fn comment_value(path: &Path, key: &str) -> Result<Option<String>, CliError> {
    for line in BufReader::new(open(path)?).lines() {
        let line = line?;
        let Some(body) = line.strip_prefix('#') else {
            break;
        };
        if let Some((k, v)) = body.split_once(':') {
            if k.trim() == key {
                return Ok(Some(v.trim().to_string()));
            }
        }
    }
    Ok(None)
}

#[derive(Serialize, Deserialize)]
struct PairArchive {
    config_hash: String,
    set: PairSet,
}

fn station_schema(table_names: &[String]) -> ColumnSpec {
    let known = ColumnSpec::station_a();
    ColumnSpec::new(table_names.iter().map(|n| {
        let unit = known
            .columns
            .iter()
            .find(|(k, _)| k == n)
            .map_or("", |(_, u)| u.as_str());
        (n.clone(), unit.to_string())
    }))
}

fn write_table(table: &SeriesTable, path: &Path, hash: &str) -> Result<(), CliError> {
    let mut out = create(path)?;
    write_csv_with_header(table, &mut out, &[(HASH_KEY, hash)])?;
    out.flush()?;
    Ok(())
}

pub fn cmd_synth(ctx: &Ctx) -> Result<(), CliError> {
    let (a, b) = synthesize(&ctx.cfg.synth_config()).map_err(|e| CliError::Config(e.to_string()))?;
    let hash = ctx.cfg.data_hash();
    for (table, path) in [(&a, &ctx.cfg.paths.source), (&b, &ctx.cfg.paths.target)] {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_table(table, path, &hash)?;
    }
    println!(
        "synth: {} hours -> {}, {}",
        a.len(),
        ctx.cfg.paths.source.display(),
        ctx.cfg.paths.target.display()
    );
    Ok(())
}

pub fn cmd_ingest(ctx: &Ctx) -> Result<(), CliError> {
    let wd = ctx.workdir()?;
    let hash = ctx.cfg.data_hash();
    for (station, path, schema) in [
        ("source", &ctx.cfg.paths.source, ColumnSpec::station_a()),
        ("target", &ctx.cfg.paths.target, ColumnSpec::station_b()),
    ] {
        if !path.exists() {
            return Err(CliError::Io(format!("{}: not found", path.display())));
        }
        let raw = parse_csv(path, &schema)?;
        let bounds: Vec<_> = ctx
            .cfg
            .ingest
            .outliers
            .iter()
            .filter(|b| raw.column(&b.column).is_some())
            .cloned()
            .collect();
        let masked = mask_outliers(&raw, &bounds)?;
        let mut report = create(&wd.file(&format!("{station}.availability.csv")))?;
        availability(&masked).write_csv(&mut report)?;
        report.flush()?;
        let tidy = interpolate(&masked)?;
        write_table(&tidy, &wd.tidy(station), &hash)?;
        let gaps: usize = masked.columns.iter().map(|c| c.gap_count()).sum();
        println!("ingest: {station} {} hours, {gaps} missing cells filled", tidy.len());
    }
    Ok(())
}

fn read_tidy(ctx: &Ctx, wd: &Workdir, station: &str, schema: ColumnSpec) -> Result<SeriesTable, CliError> {
    let path = wd.tidy(station);
    let hash = comment_value(&path, HASH_KEY)?;
    ctx.check(&path, hash.as_deref(), &ctx.cfg.data_hash())?;
    Ok(parse_csv(&path, &schema)?)
}

pub fn cmd_preprocess(ctx: &Ctx) -> Result<(), CliError> {
    let wd = ctx.workdir()?;
    let hash = ctx.cfg.data_hash();
    if !wd.tidy("source").exists() || !wd.tidy("target").exists() {
        cmd_ingest(ctx)?;
    }
    let source = read_tidy(ctx, &wd, "source", ColumnSpec::station_a())?;
    let target = read_tidy(ctx, &wd, "target", ColumnSpec::station_b())?;
    let spec = ctx.cfg.split_spec(source.len());
    let prepared = prepare(&source, &target, &spec, &ctx.cfg.pipeline, &hash)?;
    prepared.sidecar.save(&wd.sidecar())?;
    let mut corr = create(&wd.file("correlations.csv"))?;
    prepared.sidecar.selection.write_matrix_csv(&mut corr)?;
    corr.flush()?;
    for set in [&prepared.train, &prepared.validation, &prepared.test] {
        let archive = PairArchive {
            config_hash: hash.clone(),
            set: set.clone(),
        };
        let mut out = create(&wd.pairs(set.role))?;
        serde_json::to_writer(&mut out, &archive).map_err(|e| CliError::Io(e.to_string()))?;
        out.flush()?;
    }
    let (tr, va, te) = prepared.split.balance.percentages();
    println!(
        "preprocess: kept {:?}, dropped {:?}; split {tr:.1}/{va:.1}/{te:.1}%; pairs {}/{}/{}",
        prepared.sidecar.selection.kept,
        prepared.sidecar.selection.dropped,
        prepared.train.pairs.len(),
        prepared.validation.pairs.len(),
        prepared.test.pairs.len(),
    );
    Ok(())
}

fn load_sidecar(ctx: &Ctx, wd: &Workdir) -> Result<PipelineSidecar, CliError> {
    let path = wd.sidecar();
    if !path.exists() {
        return Err(CliError::Io(format!("{}: not found; run preprocess first", path.display())));
    }
    let sidecar = PipelineSidecar::load(&path)?;
    ctx.check(&path, Some(&sidecar.config_hash), &ctx.cfg.data_hash())?;
    Ok(sidecar)
}

fn load_pairs(ctx: &Ctx, wd: &Workdir, role: Role) -> Result<Vec<WindowPair>, CliError> {
    let path = wd.pairs(role);
    let archive: PairArchive = serde_json::from_reader(BufReader::new(open(&path)?))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    ctx.check(&path, Some(&archive.config_hash), &ctx.cfg.data_hash())?;
    Ok(archive.set.pairs)
}

fn write_report_files(wd: &Workdir, family: Family, report: &TrainReport, hash: &str) -> Result<(), CliError> {
    let mut out = create(&wd.family(family, "losses.csv"))?;
    writeln!(out, "# {HASH_KEY}: {hash}")?;
    report.write_csv(&mut out)?;
    out.flush()?;
    std::fs::write(wd.family(family, "losses.svg"), loss_svg(family.name(), report))?;
    Ok(())
}

pub fn cmd_train(ctx: &Ctx) -> Result<(), CliError> {
    let wd = ctx.workdir()?;
    let sidecar = load_sidecar(ctx, &wd)?;
    let train_pairs = load_pairs(ctx, &wd, Role::Train)?;
    let val_pairs = load_pairs(ctx, &wd, Role::Validation)?;
    let family = ctx.cfg.model.family;
    let spec = ctx.cfg.model_spec(sidecar.selection.kept.len(), sidecar.target_scaler.features.len())?;
    let tc = ctx.cfg.train_config();
    let hash = ctx.cfg.model_hash();
    let mut model = ModelState::build(&spec, ctx.cfg.seed)?;
    model.scaler_hash = Some(sidecar.target_scaler.fingerprint());
    model.config_hash = Some(hash.clone());
    let report = train(&mut model, &train_pairs, &val_pairs, &tc)?;
    save_model(&model, &wd.model(family))?;
    write_report_files(&wd, family, &report, &hash)?;
    println!(
        "train: {family} {} parameters, {} epochs ({:?}), best epoch {} val mse {:.6}, {:.1}s",
        model.param_count(),
        report.epochs(),
        report.stop_reason,
        report.best_epoch,
        report.best_val_loss,
        report.wall_time.as_secs_f64(),
    );
    Ok(())
}

pub fn cmd_search(ctx: &Ctx, jobs: usize) -> Result<(), CliError> {
    let wd = ctx.workdir()?;
    let sidecar = load_sidecar(ctx, &wd)?;
    let mut pairs = load_pairs(ctx, &wd, Role::Train)?;
    pairs.extend(load_pairs(ctx, &wd, Role::Validation)?);
    let family = ctx.cfg.model.family;
    let spec = ctx.cfg.model_spec(sidecar.selection.kept.len(), sidecar.target_scaler.features.len())?;
    let opts = SearchOptions {
        max_epochs: Some(ctx.cfg.search.max_epochs),
        journal: Some(wd.family(family, "search.journal")),
        jobs,
    };
    let result = grid_search(
        family,
        &ctx.cfg.grid(),
        &pairs,
        &ctx.cfg.cv_scheme(),
        &spec,
        &ctx.cfg.train_config(),
        &opts,
    )?;
    let mut out = create(&wd.family(family, "search.csv"))?;
    result.write_csv(&mut out, &[(HASH_KEY, &ctx.cfg.data_hash())])?;
    out.flush()?;
    match result.best() {
        Some(b) => println!(
            "search: {family} best k={} w={} lr={:e} lambda={:e} val mse {:.6} over {} configs",
            b.point.layers,
            b.point.width,
            b.point.lr,
            b.point.lambda,
            b.mean_val_loss,
            result.ranking.len()
        ),
        None => println!("search: {family} grid is empty"),
    }
    Ok(())
}

fn load_checked_model(ctx: &Ctx, wd: &Workdir, family: Family) -> Result<ModelState, CliError> {
    let path = wd.model(family);
    if !path.exists() {
        return Err(CliError::Io(format!("{}: not found; run train first", path.display())));
    }
    let model = load_model(&path)?;
    let expected = ctx.cfg.with_family(family).model_hash();
    ctx.check(&path, model.config_hash.as_deref(), &expected)?;
    Ok(model)
}

/// Families to evaluate: those requested, else every trained model in the workdir.
fn trained_families(wd: &Workdir, requested: &[Family]) -> Result<Vec<Family>, CliError> {
    let families: Vec<Family> = if requested.is_empty() {
        Family::ALL.into_iter().filter(|f| wd.model(*f).exists()).collect()
    } else {
        requested.to_vec()
    };
    if families.is_empty() {
        return Err(CliError::Io(format!("no trained models in {}", wd.0.display())));
    }
    Ok(families)
}

pub fn cmd_evaluate(ctx: &Ctx, requested: &[Family]) -> Result<(), CliError> {
    let wd = ctx.workdir()?;
    let sidecar = load_sidecar(ctx, &wd)?;
    let test = load_pairs(ctx, &wd, Role::Test)?;
    let families = trained_families(&wd, requested)?;
    let source = read_tidy(ctx, &wd, "source", ColumnSpec::station_a())?;
    let hours = ctx.cfg.eval.plot_hours;

    let mut reports: Vec<MetricsReport> = Vec::new();
    let mut forecasts: Vec<(String, Forecasts)> = Vec::new();
    for f in &families {
        let model = load_checked_model(ctx, &wd, *f)?;
        let (mut report, fc) = eval::evaluate(&model, &test, &sidecar.target_scaler)?;
        if ctx.cfg.eval.latency_repeats > 0 {
            report.latency = time_inference(&model, &test[0], ctx.cfg.eval.latency_repeats)?;
        }
        let stem = f.name().to_ascii_lowercase();
        let mut out = create(&wd.file(&format!("{stem}.forecast.csv")))?;
        write_forecast_csv(&fc, 0, hours, source.start, &mut out, &[(HASH_KEY, model.config_hash.as_deref().unwrap_or(""))])?;
        out.flush()?;
        std::fs::write(wd.file(&format!("{stem}.forecast.svg")), forecast_svg(&fc, 0, 0, hours))?;
        reports.push(report);
        forecasts.push((f.name().to_string(), fc));
    }
    let persistence = persistence_forecast(&test, &sidecar.input_scaler, &sidecar.target_scaler)?;
    reports.push(eval::metrics("persistence", &persistence, 0)?);
    forecasts.push(("persistence".into(), persistence));

    let hash = ctx.cfg.data_hash();
    let mut out = create(&wd.file("metrics.csv"))?;
    write_metrics_csv(&reports, &mut out, &[(HASH_KEY, &hash)])?;
    out.flush()?;
    write_ttests(&wd.file("ttests.csv"), &forecasts, &hash)?;

    for r in &reports {
        let latency = r
            .latency
            .as_ref()
            .map(|l| format!(", {:.2} ms/forecast", l.median_ms))
            .unwrap_or_default();
        println!(
            "evaluate: {:<11} rmse {:.3} smape {:.3}{latency}",
            r.model, r.rmse_total, r.smape_total
        );
    }
    Ok(())
}

/// Paired tests of each hierarchical model against its flat counterpart and
/// of every model against persistence.
fn write_ttests(path: &Path, forecasts: &[(String, Forecasts)], hash: &str) -> Result<(), CliError> {
    let find = |name: &str| forecasts.iter().find(|(n, _)| n == name).map(|(_, f)| f);
    let mut comparisons: Vec<(&str, &str)> = Vec::new();
    for (name, _) in forecasts {
        if let Ok(f) = name.parse::<Family>() {
            if f.is_hierarchical() && find(f.flat().name()).is_some() {
                comparisons.push((name, f.flat().name()));
            }
        }
    }
    for (name, _) in forecasts.iter().filter(|(n, _)| n != "persistence") {
        comparisons.push((name, "persistence"));
    }
    let mut out = create(path)?;
    writeln!(out, "# {HASH_KEY}: {hash}")?;
    writeln!(out, "model_a,model_b,basis,t,df,p,mean_a,mean_b,std_a,std_b")?;
    for (a, b) in comparisons {
        let (fa, fb) = (find(a).expect("listed"), find(b).expect("listed"));
        for (basis, xa, xb) in [
            (MetricBasis::Rmse, fa.squared_errors(), fb.squared_errors()),
            (MetricBasis::Smape, fa.smape_terms(), fb.smape_terms()),
        ] {
            match paired_t_test(a, b, basis, &xa, &xb) {
                Ok(t) => writeln!(
                    out,
                    "{a},{b},{},{:.4},{},{:.4e},{:.4},{:.4},{:.4},{:.4}",
                    serde_json::to_value(basis).expect("unit enum").as_str().unwrap_or(""),
                    t.t,
                    t.df,
                    t.p,
                    t.mean_a,
                    t.mean_b,
                    t.std_a,
                    t.std_b
                )?,
                Err(e) => writeln!(out, "{a},{b},{basis:?},,,,,,,# {e}")?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Forecast for one input window read from a source-station CSV.
pub fn cmd_forecast(ctx: &Ctx, input: &Path, output: &Path) -> Result<(), CliError> {
    let wd = ctx.workdir()?;
    let sidecar = load_sidecar(ctx, &wd)?;
    let family = ctx.cfg.model.family;
    let model = load_checked_model(ctx, &wd, family)?;
    let kept = &sidecar.selection.kept;
    if !input.exists() {
        return Err(CliError::Io(format!("{}: not found", input.display())));
    }
    let table = interpolate(&parse_csv(input, &station_schema(kept))?)?;
    let l = sidecar.geometry.input_len;
    if table.len() != l {
        return Err(CliError::Data(format!(
            "{} holds {} hours, the model needs exactly {l}",
            input.display(),
            table.len()
        )));
    }
    let columns: Vec<&[f64]> = kept
        .iter()
        .map(|n| table.values(n))
        .collect::<Result<_, _>>()?;
    let mut values = Vec::with_capacity(l * kept.len());
    for t in 0..l {
        let mut row: Vec<f64> = columns.iter().map(|c| c[t]).collect();
        sidecar.input_scaler.apply_row(&mut row);
        values.extend(row);
    }
    let h = sidecar.geometry.horizon;
    let o = sidecar.target_scaler.features.len();
    let pair = WindowPair {
        input: values,
        target: vec![0.0; h * o],
        n_inputs: kept.len(),
        n_targets: o,
        start: 0,
        chunk_id: 0,
        abs_start: 0,
    };
    let (x, _) = batch_of(&[&pair])?;
    let y = model.forward(&x)?;
    let y = y.data();
    let first = table.start + Duration::hours(sidecar.geometry.target_offset() as i64);
    let mut out = create(output)?;
    writeln!(out, "# {HASH_KEY}: {}", model.config_hash.as_deref().unwrap_or(""))?;
    writeln!(out, "timestamp,{}", sidecar.target_scaler.names().join(","))?;
    for s in 0..h {
        let mut row = y[s * o..(s + 1) * o].to_vec();
        sidecar.target_scaler.invert_row(&mut row);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        writeln!(out, "{},{}", format_timestamp(first + Duration::hours(s as i64)), cells.join(","))?;
    }
    out.flush()?;
    println!("forecast: {family} {h} hours -> {}", output.display());
    Ok(())
}
