//! Run configuration.
//!
//! Values are layered, later layers winning: built-in defaults, the TOML
//! file, `SMOGCAST_<SECTION>__<KEY>` environment variables, then
//! `--set section.key=value` flags. Model and training keys left unset fall
//! back to the reference settings of the selected family.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use smogcast::ingest::{OutlierBounds, SynthConfig};
use smogcast::models::{Family, ModelSpec};
use smogcast::pipeline::{ChunkAssignment, PipelineConfig, SplitSpec};
use smogcast::search::{CvScheme, GridSpec};
use smogcast::train::TrainConfig;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "SMOGCAST_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthSection,
    pub ingest: IngestSection,
    pub split: SplitSection,
    pub pipeline: PipelineConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub search: SearchSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub source: PathBuf,
    pub target: PathBuf,
    pub workdir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub hours: usize,
    pub chunk_layout: Vec<usize>,
    pub gap_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub outliers: Vec<OutlierBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_frac: f64,
    pub val_frac: f64,
    /// Explicit chunks; when non-empty the fractions are ignored.
    pub chunks: Vec<ChunkAssignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub family: Family,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch_layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_branch: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_improvement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau_patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shuffle: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// k-fold for fully connected families, sliding window for recurrent ones.
    Auto,
    Kfold,
    SlidingWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub layers: Vec<usize>,
    pub width: Vec<usize>,
    pub lr: Vec<f64>,
    pub lambda: Vec<f64>,
    pub scheme: SchemeKind,
    pub k_folds: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    /// Per-cell epoch cap.
    pub max_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Timed single-pair forecasts per model; 0 disables timing.
    pub latency_repeats: usize,
    /// Hours drawn in each forecast plot and CSV.
    pub plot_hours: usize,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            source: "station_a.csv".into(),
            target: "station_b.csv".into(),
            workdir: "work".into(),
        }
    }
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            hours: s.hours,
            chunk_layout: s.chunk_layout,
            gap_rate: s.gap_rate,
        }
    }
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train_frac: 0.763,
            val_frac: 0.119,
            chunks: Vec::new(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            family: Family::Hgru,
            layers: None,
            width: None,
            branch_layers: None,
            branch_width: None,
            readout_bias: None,
        }
    }
}

impl Default for SearchSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            layers: g.layers,
            width: g.width,
            lr: g.lr,
            lambda: g.lambda,
            scheme: SchemeKind::Auto,
            k_folds: 5,
            train_frac: 0.7,
            val_frac: 0.1,
            max_epochs: 50,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            latency_repeats: 20,
            plot_hours: 168,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            synth: SynthSection::default(),
            ingest: IngestSection::default(),
            split: SplitSection::default(),
            pipeline: PipelineConfig::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            search: SearchSection::default(),
            eval: EvalSection::default(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(root: &mut Table, path: &[&str], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().ok_or_else(|| config_err("empty key"))?;
    let mut table = root;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("`{p}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// `section.key=value` assignment.
pub fn apply_assignment(root: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("expected key=value, got `{assignment}`")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("malformed key `{key}`")));
    }
    set_path(root, &path, parse_value(raw.trim()))
}

/// `SMOGCAST_SECTION__KEY=value`, with the name lowercased.
pub fn apply_env(root: &mut Table, name: &str, raw: &str) -> Result<(), CliError> {
    let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
        return Ok(());
    };
    let key = rest.to_ascii_lowercase().replace("__", ".");
    apply_assignment(root, &format!("{key}={raw}"))
}

impl RunConfig {
    /// Layers the file, environment and flag overrides over the defaults.
    pub fn load(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        sets: &[String],
    ) -> Result<Self, CliError> {
        let mut root = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                toml::from_str::<Table>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        env.sort();
        for (k, v) in &env {
            apply_env(&mut root, k, v)?;
        }
        for s in sets {
            apply_assignment(&mut root, s)?;
        }
        let cfg: RunConfig = Value::Table(root).try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.split;
        if s.chunks.is_empty()
            && !(s.train_frac > 0.0 && s.val_frac >= 0.0 && s.train_frac + s.val_frac <= 1.0)
        {
            return Err(config_err("split fractions must be non-negative and sum to at most 1"));
        }
        let outputs = self.pipeline.targets.len();
        self.model_spec(outputs + self.pipeline.candidates.len(), outputs)?.validate()?;
        self.train_config().validate()?;
        if self.search.k_folds == 0 {
            return Err(config_err("search.k_folds must be at least 1"));
        }
        Ok(())
    }

    pub fn with_family(&self, family: Family) -> Self {
        let mut c = self.clone();
        c.model.family = family;
        c
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            hours: self.synth.hours,
            chunk_layout: self.synth.chunk_layout.clone(),
            gap_rate: self.synth.gap_rate,
        }
    }

    pub fn split_spec(&self, total: usize) -> SplitSpec {
        if self.split.chunks.is_empty() {
            SplitSpec::chronological(total, self.split.train_frac, self.split.val_frac)
        } else {
            SplitSpec {
                chunks: self.split.chunks.clone(),
            }
        }
    }

    pub fn model_spec(&self, inputs: usize, outputs: usize) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let reference = ModelSpec::reference(m.family);
        Ok(ModelSpec {
            layers: m.layers.unwrap_or(reference.layers),
            width: m.width.unwrap_or(reference.width),
            inputs,
            outputs,
            branch_layers: m.branch_layers,
            branch_width: m.branch_width,
            input_len: self.pipeline.input_len,
            horizon: self.pipeline.horizon,
            readout_bias: m.readout_bias,
            ..reference
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let r = TrainConfig::reference(self.model.family);
        TrainConfig {
            lr: t.lr.unwrap_or(r.lr),
            lr_branch: t.lr_branch.or(r.lr_branch),
            lambda: t.lambda.unwrap_or(r.lambda),
            batch_size: t.batch_size.unwrap_or(r.batch_size),
            patience: t.patience.unwrap_or(r.patience),
            min_improvement: t.min_improvement.unwrap_or(r.min_improvement),
            max_epochs: t.max_epochs.unwrap_or(r.max_epochs),
            plateau_factor: t.plateau_factor.unwrap_or(r.plateau_factor),
            plateau_patience: t.plateau_patience.or(r.plateau_patience),
            seed: self.seed,
            shuffle: t.shuffle.unwrap_or(r.shuffle),
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            layers: self.search.layers.clone(),
            width: self.search.width.clone(),
            lr: self.search.lr.clone(),
            lambda: self.search.lambda.clone(),
        }
    }

    pub fn cv_scheme(&self) -> CvScheme {
        let s = &self.search;
        let sliding = CvScheme::SlidingWindow {
            k_folds: s.k_folds,
            train_frac: s.train_frac,
            val_frac: s.val_frac,
        };
        match s.scheme {
            SchemeKind::Kfold => CvScheme::Kfold { k_folds: s.k_folds },
            SchemeKind::SlidingWindow => sliding,
            SchemeKind::Auto if self.model.family.is_recurrent() => sliding,
            SchemeKind::Auto => CvScheme::Kfold { k_folds: s.k_folds },
        }
    }

    /// Identity of everything that shapes the prepared data.
    pub fn data_hash(&self) -> String {
        digest(&[
            &to_json(&self.ingest),
            &to_json(&self.split),
            &to_json(&self.pipeline),
        ])
    }

    /// Identity of a trained model: the data plus the resolved architecture,
    /// training settings and seed. Input and output counts come from the data.
    pub fn model_hash(&self) -> String {
        let spec = self.model_spec(0, 0).expect("validated");
        digest(&[&self.data_hash(), &to_json(&spec), &to_json(&self.train_config())])
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())[..16].to_string()
}

/// Every key with a one-line description. Keys whose default depends on
/// the model family are marked.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "base seed for data synthesis, initialisation and shuffling"),
    ("paths.source", "source station CSV (all features)"),
    ("paths.target", "target station CSV (pollutants)"),
    ("paths.workdir", "directory for all artifacts"),
    ("synth.hours", "hours generated by `synth`"),
    ("synth.chunk_layout", "regime lengths summing to synth.hours; empty for one regime"),
    ("synth.gap_rate", "probability of dropping a pollutant cell"),
    ("ingest.outliers", "list of {column, min, max}; values outside become missing"),
    ("split.train_frac", "training share of the hours"),
    ("split.val_frac", "validation share of the hours; the rest is test"),
    ("split.chunks", "explicit {label, start, len, role} chunks; overrides the fractions"),
    ("pipeline.r_th", "minimum |r| with any pollutant for a covariate to be kept"),
    ("pipeline.input_len", "input window length in hours"),
    ("pipeline.horizon", "forecast horizon in hours"),
    ("pipeline.stride", "hours between consecutive window starts"),
    ("pipeline.targets", "pollutants forecast at the target station"),
    ("pipeline.candidates", "covariates subject to the correlation filter"),
    ("model.family", "MLP, HMLP, LSTM, HLSTM, GRU or HGRU"),
    ("model.layers", "[family] depth k"),
    ("model.width", "[family] layer width"),
    ("model.branch_layers", "layers per branch of hierarchical models (default layers - 1)"),
    ("model.branch_width", "branch width of hierarchical models (default width)"),
    ("model.readout_bias", "constant initial readout bias (default: uniform draw)"),
    ("train.lr", "[family] learning rate (shared layer for hierarchical models)"),
    ("train.lr_branch", "branch learning rate (default layers x lr)"),
    ("train.lambda", "[family] L2 penalty"),
    ("train.batch_size", "[family] batch size"),
    ("train.patience", "[family] early-stopping patience in epochs"),
    ("train.min_improvement", "[family] smallest decrease counted as improvement"),
    ("train.max_epochs", "[family] epoch (round) limit"),
    ("train.plateau_factor", "[family] learning-rate factor on plateau"),
    ("train.plateau_patience", "bad epochs before a decay (default ceil(patience / 2))"),
    ("train.shuffle", "[family] reshuffle batches every epoch"),
    ("search.layers", "grid values for model.layers"),
    ("search.width", "grid values for model.width"),
    ("search.lr", "grid values for train.lr"),
    ("search.lambda", "grid values for train.lambda"),
    ("search.scheme", "auto, kfold or sliding_window"),
    ("search.k_folds", "folds per configuration"),
    ("search.train_frac", "sliding-window training share"),
    ("search.val_frac", "sliding-window validation share"),
    ("search.max_epochs", "epoch cap per search cell"),
    ("eval.latency_repeats", "timed forecasts per model; 0 disables timing"),
    ("eval.plot_hours", "hours in forecast plots and CSVs"),
];

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Defaults of `cfg` as `(key, rendered value)`, with family-dependent keys
/// resolved for `cfg.model.family`.
pub fn resolved_defaults(cfg: &RunConfig) -> Vec<(String, String)> {
    let spec = cfg.model_spec(0, 0).expect("defaults are valid");
    let t = cfg.train_config();
    let mut full = cfg.clone();
    full.model.layers = Some(spec.layers);
    full.model.width = Some(spec.width);
    full.train = TrainSection {
        lr: Some(t.lr),
        lr_branch: t.lr_branch,
        lambda: Some(t.lambda),
        batch_size: Some(t.batch_size),
        patience: Some(t.patience),
        min_improvement: Some(t.min_improvement),
        max_epochs: Some(t.max_epochs),
        plateau_factor: Some(t.plateau_factor),
        plateau_patience: t.plateau_patience,
        shuffle: Some(t.shuffle),
    };
    let mut out = Vec::new();
    flatten("", &Value::try_from(&full).expect("serializes"), &mut out);
    out
}

fn sci(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:e}")
    }
}

/// Text appended to `--help`.
pub fn help_text() -> String {
    let defaults = resolved_defaults(&RunConfig::default());
    let mut s = String::from(
        "CONFIGURATION (precedence: defaults < --config file < SMOGCAST_<SECTION>__<KEY> env < --set):\n",
    );
    for (key, doc) in KEYS {
        let value = defaults
            .iter()
            .find(|(k, _)| k == key)
            .map_or("unset", |(_, v)| v.as_str());
        s.push_str(&format!("  {key:<22} = {value:<28} {doc}\n"));
    }
    s.push_str("\n[family] reference values (unset keys fall back to these):\n");
    s.push_str("  family  layers  width  lr      lr_branch  lambda  patience  batch  plateau_factor  k_folds\n");
    for f in Family::ALL {
        let spec = ModelSpec::reference(f);
        let t = TrainConfig::reference(f);
        let branch = if f.is_hierarchical() {
            sci(t.branch_lr(spec.layers))
        } else {
            "-".into()
        };
        s.push_str(&format!(
            "  {:<6}  {:<6}  {:<5}  {:<6}  {:<9}  {:<6}  {:<8}  {:<5}  {:<14}  {}\n",
            f.name(),
            spec.layers,
            spec.width,
            sci(t.lr),
            branch,
            sci(t.lambda),
            t.patience,
            t.batch_size,
            t.plateau_factor,
            SearchSection::default().k_folds,
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(file: &str, env: &[(&str, &str)], sets: &[&str]) -> Result<RunConfig, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, file).unwrap();
        RunConfig::load(
            Some(&path),
            env.iter().map(|(k, v)| (k.to_string(), v.to_string())),
            &sets.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn defaults_follow_reference_tables() {
        let c = RunConfig::default();
        assert_eq!(c.model.family, Family::Hgru);
        let spec = c.model_spec(10, 4).unwrap();
        assert_eq!((spec.layers, spec.width), (4, 64));
        let t = c.train_config();
        assert_eq!((t.lr, t.branch_lr(spec.layers), t.lambda), (1e-3, 4e-3, 1e-7));
        assert_eq!((t.batch_size, t.patience, t.plateau_factor), (16, 15, 0.1));
        let mlp = c.with_family(Family::Mlp);
        let spec = mlp.model_spec(10, 4).unwrap();
        assert_eq!((spec.layers, spec.width), (4, 64));
        let t = mlp.train_config();
        assert_eq!((t.lr, t.lambda, t.patience), (1e-5, 1e-5, 6));
        assert_eq!(c.search.k_folds, 5);
    }

    #[test]
    fn layers_apply_in_order() {
        let file = "seed = 1\n[model]\nfamily = \"GRU\"\nwidth = 8\n[train]\nlr = 0.5\n";
        let c = load(file, &[], &[]).unwrap();
        assert_eq!((c.seed, c.model.family, c.model.width), (1, Family::Gru, Some(8)));
        let c = load(file, &[("SMOGCAST_MODEL__WIDTH", "9"), ("SMOGCAST_SEED", "2")], &[]).unwrap();
        assert_eq!((c.seed, c.model.width), (2, Some(9)));
        let c = load(file, &[("SMOGCAST_MODEL__WIDTH", "9")], &["model.width=10", "train.lr=1e-2"]).unwrap();
        assert_eq!(c.model.width, Some(10));
        assert_eq!(c.train_config().lr, 1e-2);
    }

    #[test]
    fn override_values_parse_as_toml() {
        let c = load("", &[], &["search.width=[3, 5]", "model.family=lstm", "pipeline.targets=[\"NO2\"]"]).unwrap();
        assert_eq!(c.search.width, vec![3, 5]);
        assert_eq!(c.model.family, Family::Lstm);
        assert_eq!(c.pipeline.targets, vec!["NO2".to_string()]);
    }

    #[test]
    fn unrelated_environment_is_ignored() {
        let c = load("", &[("PATH", "/bin"), ("SMOGCASTX", "1")], &[]).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn unknown_and_invalid_keys_are_config_errors() {
        for bad in [
            load("[model]\ndepth = 3\n", &[], &[]),
            load("", &[("SMOGCAST_TRAIN__SPEED", "1")], &[]),
            load("", &[], &["model.family=RNN"]),
            load("", &[], &["train.batch_size=0"]),
            load("", &[], &["split.train_frac=0.9", "split.val_frac=0.2"]),
            load("", &[], &["nonsense"]),
            load("not toml [", &[], &[]),
        ] {
            assert!(matches!(bad, Err(CliError::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn scheme_follows_family() {
        let c = RunConfig::default();
        assert!(matches!(c.cv_scheme(), CvScheme::SlidingWindow { k_folds: 5, .. }));
        assert!(matches!(c.with_family(Family::Hmlp).cv_scheme(), CvScheme::Kfold { k_folds: 5 }));
    }

    #[test]
    fn hashes_track_their_inputs() {
        let c = RunConfig::default();
        let mut other = c.clone();
        other.paths.workdir = "elsewhere".into();
        other.eval.latency_repeats = 0;
        other.search.width = vec![1];
        assert_eq!(c.data_hash(), other.data_hash());
        assert_eq!(c.model_hash(), other.model_hash());
        other.train.lr = Some(0.1);
        assert_eq!(c.data_hash(), other.data_hash());
        assert_ne!(c.model_hash(), other.model_hash());
        other.pipeline.r_th = 0.3;
        assert_ne!(c.data_hash(), other.data_hash());
        assert_ne!(c.model_hash(), c.with_family(Family::Gru).model_hash());
        let mut seeded = c.clone();
        seeded.seed = 9;
        assert_ne!(c.model_hash(), seeded.model_hash());
    }

    #[test]
    fn help_lists_every_key() {
        let mut full = RunConfig::default();
        full.model.branch_layers = Some(1);
        full.model.branch_width = Some(1);
        full.model.readout_bias = Some(0.1);
        full.train.lr_branch = Some(1.0);
        full.train.plateau_patience = Some(1);
        full.ingest.outliers.push(OutlierBounds {
            column: "NO2".into(),
            min: 0.0,
            max: 1.0,
        });
        full.split.chunks = SplitSpec::chronological(10, 0.5, 0.2).chunks;
        let keys: Vec<String> = resolved_defaults(&full)
            .into_iter()
            .map(|(k, _)| k)
            .collect();
        let documented: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
        for k in &keys {
            assert!(documented.contains(&k.as_str()), "undocumented key {k}");
        }
        for k in &documented {
            assert!(keys.iter().any(|x| x == k), "stale key {k}");
        }
        let help = help_text();
        for (k, _) in KEYS {
            assert!(help.contains(k));
        }
        assert!(help.contains("HLSTM   7       48"));
    }
}
