use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{Seek, SeekFrom, Write};
use std::path::PathBuf;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CvScheme, Fold, GridPoint, GridSpec, SearchError};
use crate::models::{Family, ModelSpec, ModelState};
use crate::pipeline::WindowPair;
use crate::train::{train, TrainConfig};

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    /// Caps the epochs of every cell; `None` keeps the training config's limit.
    pub max_epochs: Option<usize>,
    /// Append-only record of finished cells; existing entries are reused.
    pub journal: Option<PathBuf>,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub point: GridPoint,
    pub param_count: usize,
    /// Validation loss per fold; `None` where training failed.
    pub fold_losses: Vec<Option<f64>>,
    pub errors: Vec<String>,
    /// Mean over folds; infinite if any fold failed.
    pub mean_val_loss: f64,
    /// Sample standard deviation over folds.
    pub std_val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub family: Family,
    /// Best first.
    pub ranking: Vec<ConfigResult>,
}

impl SearchResult {
    pub fn best(&self) -> Option<&ConfigResult> {
        self.ranking.first()
    }

    /// `rank,layers,width,lr,lr_branch,lambda,param_count,mean_val_loss,std_val_loss,failed_folds`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[(&str, &str)]) -> Result<(), SearchError> {
        for (k, v) in header {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SearchError::Io(std::io::Error::other(e));
        w.write_record([
            "rank",
            "layers",
            "width",
            "lr",
            "lr_branch",
            "lambda",
            "param_count",
            "mean_val_loss",
            "std_val_loss",
            "failed_folds",
        ])
        .map_err(io)?;
        for (i, r) in self.ranking.iter().enumerate() {
            let branch = if self.family.is_hierarchical() {
                format!("{:e}", r.point.lr * r.point.layers as f64)
            } else {
                String::new()
            };
            w.write_record([
                (i + 1).to_string(),
                r.point.layers.to_string(),
                r.point.width.to_string(),
                format!("{:e}", r.point.lr),
                branch,
                format!("{:e}", r.point.lambda),
                r.param_count.to_string(),
                r.mean_val_loss.to_string(),
                r.std_val_loss.to_string(),
                r.errors.len().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn hash_u64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// Seed of one (configuration, fold) cell. It depends only on the content
/// of the cell, so results do not depend on enumeration order.
pub fn cell_seed(base: u64, point: &GridPoint, fold: usize) -> u64 {
    hash_u64(&[&base.to_le_bytes(), point.key().as_bytes(), &(fold as u64).to_le_bytes()])
}

#[derive(Debug, Serialize, Deserialize)]
struct JournalHeader {
    search_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JournalEntry {
    key: String,
    fold: usize,
    val_loss: Option<f64>,
    error: Option<String>,
}

fn search_hash(
    family: Family,
    keys: &[String],
    pairs: &[WindowPair],
    scheme: &CvScheme,
    base_spec: &ModelSpec,
    cfg: &TrainConfig,
    max_epochs: Option<usize>,
) -> String {
    let mut sorted = keys.to_vec();
    sorted.sort();
    let mut h = Sha256::new();
    let text = serde_json::json!({
        "family": family,
        "grid": sorted,
        "scheme": scheme,
        "spec": base_spec,
        "train": cfg,
        "max_epochs": max_epochs,
        "pairs": pairs.len(),
    })
    .to_string();
    h.update(text.as_bytes());
    for p in pairs {
        for v in p.input.iter().chain(&p.target) {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Returns the recorded cells and the byte length of the intact prefix.
fn read_journal(path: &PathBuf, expected: &str) -> Result<(Vec<JournalEntry>, u64), SearchError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    let mut entries = Vec::new();
    let mut valid = 0usize;
    let mut offset = 0usize;
    let n_lines = text.split_inclusive('\n').count();
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        let complete = raw.ends_with('\n');
        if line.trim().is_empty() {
            if complete {
                valid = offset;
            }
            continue;
        }
        let corrupt = |e: serde_json::Error| SearchError::CorruptJournal {
            line: i + 1,
            reason: e.to_string(),
        };
        if i == 0 {
            let h: JournalHeader = serde_json::from_str(line).map_err(corrupt)?;
            if h.search_hash != expected {
                return Err(SearchError::JournalMismatch {
                    found: h.search_hash,
                    expected: expected.to_string(),
                });
            }
        } else {
            // A cell interrupted mid-write is simply run again.
            if !complete {
                break;
            }
            match serde_json::from_str(line) {
                Ok(e) => entries.push(e),
                Err(_) if i + 1 == n_lines => break,
                Err(e) => return Err(corrupt(e)),
            }
        }
        valid = offset;
    }
    Ok((entries, valid as u64))
}

fn run_cell(
    family: Family,
    point: &GridPoint,
    fold_ix: usize,
    fold: &Fold,
    pairs: &[WindowPair],
    base_spec: &ModelSpec,
    cfg: &TrainConfig,
    max_epochs: Option<usize>,
) -> JournalEntry {
    let seed = cell_seed(cfg.seed, point, fold_ix);
    let spec = ModelSpec {
        family,
        layers: point.layers,
        width: point.width,
        ..base_spec.clone()
    };
    let cell_cfg = TrainConfig {
        lr: point.lr,
        lr_branch: None,
        lambda: point.lambda,
        seed,
        max_epochs: max_epochs.map_or(cfg.max_epochs, |m| m.min(cfg.max_epochs)),
        ..cfg.clone()
    };
    let train_set: Vec<WindowPair> = fold.train.iter().map(|&i| pairs[i].clone()).collect();
    let val_set: Vec<WindowPair> = fold.validation.iter().map(|&i| pairs[i].clone()).collect();
    let outcome = ModelState::build(&spec, seed)
        .map_err(|e| e.to_string())
        .and_then(|mut m| train(&mut m, &train_set, &val_set, &cell_cfg).map_err(|e| e.to_string()));
    let (val_loss, error) = match outcome {
        Ok(r) if r.best_epoch > 0 => (Some(r.best_val_loss), None),
        Ok(_) => (None, Some("no epoch completed".to_string())),
        Err(e) => (None, Some(e)),
    };
    JournalEntry {
        key: point.key(),
        fold: fold_ix,
        val_loss,
        error,
    }
}

fn aggregate(point: GridPoint, param_count: usize, entries: &[&JournalEntry]) -> ConfigResult {
    let fold_losses: Vec<Option<f64>> = entries.iter().map(|e| e.val_loss).collect();
    let errors: Vec<String> = entries.iter().filter_map(|e| e.error.clone()).collect();
    let (mean, std) = if errors.is_empty() && !fold_losses.is_empty() {
        let v: Vec<f64> = fold_losses.iter().map(|l| l.unwrap()).collect();
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s = if v.len() > 1 {
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (m, s)
    } else {
        (f64::INFINITY, f64::NAN)
    };
    ConfigResult {
        point,
        param_count,
        fold_losses,
        errors,
        mean_val_loss: mean,
        std_val_loss: std,
    }
}

/// Trains every (configuration, fold) cell and ranks configurations by mean
/// validation loss, then by parameter count, then by learning rate. Failed
/// cells are recorded and rank their configuration last.
pub fn grid_search(
    family: Family,
    grid: &GridSpec,
    pairs: &[WindowPair],
    scheme: &CvScheme,
    base_spec: &ModelSpec,
    cfg: &TrainConfig,
    opts: &SearchOptions,
) -> Result<SearchResult, SearchError> {
    let points = grid.enumerate()?;
    let folds = scheme.folds(pairs.len())?;
    let keys: Vec<String> = points.iter().map(GridPoint::key).collect();
    let hash = search_hash(family, &keys, pairs, scheme, base_spec, cfg, opts.max_epochs);

    let mut done: HashMap<(String, usize), JournalEntry> = HashMap::new();
    let writer = match &opts.journal {
        Some(path) => {
            let (entries, intact) = read_journal(path, &hash)?;
            for e in entries {
                done.insert((e.key.clone(), e.fold), e);
            }
            let mut f = OpenOptions::new().create(true).truncate(false).write(true).open(path)?;
            f.set_len(intact)?;
            f.seek(SeekFrom::End(0))?;
            if intact == 0 {
                writeln!(f, "{}", serde_json::to_string(&JournalHeader { search_hash: hash.clone() }).unwrap())?;
            }
            Some(Mutex::new(f))
        }
        None => None,
    };

    let mut todo: Vec<(usize, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (pi, p) in points.iter().enumerate() {
        if !seen.insert(p.key()) {
            continue;
        }
        for fi in 0..folds.len() {
            if !done.contains_key(&(p.key(), fi)) {
                todo.push((pi, fi));
            }
        }
    }

    let work = |&(pi, fi): &(usize, usize)| -> Result<JournalEntry, SearchError> {
        let entry = run_cell(family, &points[pi], fi, &folds[fi], pairs, base_spec, cfg, opts.max_epochs);
        if let Some(w) = &writer {
            let mut f = w.lock().unwrap();
            writeln!(f, "{}", serde_json::to_string(&entry).unwrap())?;
            f.flush()?;
        }
        Ok(entry)
    };
    let fresh: Vec<JournalEntry> = if opts.jobs == 1 {
        todo.iter().map(work).collect::<Result<_, _>>()?
    } else if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| SearchError::Io(std::io::Error::other(e)))?;
        pool.install(|| todo.par_iter().map(work).collect::<Result<_, _>>())?
    } else {
        todo.par_iter().map(work).collect::<Result<_, _>>()?
    };
    for e in fresh {
        done.insert((e.key.clone(), e.fold), e);
    }

    let mut ranking = Vec::new();
    let mut listed = std::collections::HashSet::new();
    for p in &points {
        if !listed.insert(p.key()) {
            continue;
        }
        let spec = ModelSpec {
            family,
            layers: p.layers,
            width: p.width,
            ..base_spec.clone()
        };
        let entries: Vec<&JournalEntry> = (0..folds.len()).map(|fi| &done[&(p.key(), fi)]).collect();
        ranking.push(aggregate(*p, spec.closed_form_param_count(), &entries));
    }
    ranking.sort_by(|a, b| {
        a.mean_val_loss
            .total_cmp(&b.mean_val_loss)
            .then(a.param_count.cmp(&b.param_count))
            .then(a.point.lr.total_cmp(&b.point.lr))
            .then_with(|| a.point.key().cmp(&b.point.key()))
    });
    Ok(SearchResult { family, ranking })
}
