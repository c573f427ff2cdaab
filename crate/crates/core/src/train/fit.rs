use std::time::Instant;

use super::{add_l2_grad, make_batches, mse_l2, Adam, EpochRecord, Phase, Plateau, ReduceOnPlateau, StopReason, TrainConfig, TrainError, TrainReport};
use crate::models::{batch_of, ModelError, ModelState};
use crate::neuro::{ComponentTag, NeuroError, Tensor};
use crate::pipeline::WindowPair;

const EVAL_CHUNK: usize = 256;

/// Forecasts for every pair, `[P × horizon × outputs]`.
pub fn predict(model: &ModelState, pairs: &[WindowPair]) -> Result<Tensor, TrainError> {
    let (h, o) = (model.spec.horizon, model.spec.outputs);
    let mut data = Vec::with_capacity(pairs.len() * h * o);
    for chunk in pairs.chunks(EVAL_CHUNK) {
        let refs: Vec<&WindowPair> = chunk.iter().collect();
        let (x, _) = batch_of(&refs)?;
        data.extend_from_slice(model.forward(&x)?.data());
    }
    Ok(Tensor::from_vec(&[pairs.len(), h, o], data)?)
}

/// Total validation MSE and the MSE of each output column.
pub fn validation_mse(model: &ModelState, pairs: &[WindowPair]) -> Result<(f64, Vec<f64>), TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyData("validation"));
    }
    let o = model.spec.outputs;
    let mut sse = vec![0.0; o];
    let mut n = 0usize;
    for chunk in pairs.chunks(EVAL_CHUNK) {
        let refs: Vec<&WindowPair> = chunk.iter().collect();
        let (x, y) = batch_of(&refs)?;
        let pred = model.forward(&x)?;
        y.expect_shape(pred.shape(), "validation targets")?;
        for (i, (p, t)) in pred.data().iter().zip(y.data()).enumerate() {
            sse[i % o] += (p - t) * (p - t);
        }
        n += pred.len() / o;
    }
    let cols: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let total = sse.iter().sum::<f64>() / (n * o) as f64;
    Ok((total, cols))
}

fn digests(model: &ModelState) -> Vec<u64> {
    model.components().iter().map(|c| model.component_digest(*c)).collect()
}

/// One pass over all training batches; returns the pair-weighted mean loss.
fn run_phase(
    model: &mut ModelState,
    pairs: &[WindowPair],
    cfg: &TrainConfig,
    shuffle_epoch: u64,
    epoch: usize,
    opts: &mut [Adam],
) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for idx in make_batches(pairs.len(), cfg.batch_size, cfg.seed, shuffle_epoch, cfg.shuffle) {
        let refs: Vec<&WindowPair> = idx.iter().map(|&i| &pairs[i]).collect();
        let (x, y) = batch_of(&refs)?;
        let (pred, cache) = model.forward_train(&x).map_err(|e| match e {
            ModelError::Neuro(NeuroError::NonFinite(_)) => TrainError::DivergedLoss { epoch },
            other => other.into(),
        })?;
        let (loss, dpred) = mse_l2(&pred, &y, &model.params(), cfg.lambda)?;
        if !loss.is_finite() {
            return Err(TrainError::DivergedLoss { epoch });
        }
        model.zero_grads();
        model.backward_params(&cache, &dpred)?;
        add_l2_grad(&mut model.params_mut(), cfg.lambda);
        for opt in opts.iter_mut() {
            opt.step(model);
        }
        total += loss * idx.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

fn check_inputs(cfg: &TrainConfig, train: &[WindowPair], val: &[WindowPair]) -> Result<(), TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyData("training"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptyData("validation"));
    }
    Ok(())
}

fn empty_report(model: &ModelState) -> TrainReport {
    TrainReport {
        components: model.component_names(),
        records: Vec::new(),
        stop_reason: StopReason::MaxEpochs,
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        wall_time: Default::default(),
    }
}

/// Trains a fully connected or flat recurrent model. The parameters of the
/// epoch with the lowest validation loss are kept.
pub fn train_monolithic(
    model: &mut ModelState,
    train: &[WindowPair],
    val: &[WindowPair],
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    if model.family().is_hierarchical() {
        return Err(TrainError::WrongFamily(format!("{} needs hierarchical training", model.family())));
    }
    check_inputs(cfg, train, val)?;
    let started = Instant::now();
    let mut report = empty_report(model);
    if cfg.max_epochs == 0 {
        return Ok(report);
    }
    let mut opt = [Adam::new(ComponentTag::Monolithic, cfg.lr)];
    let mut sched = ReduceOnPlateau::new(cfg.lr, cfg.plateau_factor, cfg.plateau_patience(), cfg.min_improvement);
    let mut stopper = Plateau::new(cfg.min_improvement);
    let mut best = model.clone();
    for epoch in 1..=cfg.max_epochs {
        let before = digests(model);
        let lrs = vec![opt[0].lr];
        let train_loss = run_phase(model, train, cfg, epoch as u64, epoch, &mut opt)?;
        let (val_loss, _) = validation_mse(model, val)?;
        if !val_loss.is_finite() {
            return Err(TrainError::DivergedLoss { epoch });
        }
        report.records.push(EpochRecord {
            epoch,
            phase: Phase::Full,
            train_loss,
            val_loss,
            lrs,
            digests_before: before,
            digests_after: digests(model),
        });
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best = model.clone();
        }
        opt[0].lr = sched.step(val_loss);
        stopper.observe(val_loss);
        if stopper.bad_epochs >= cfg.patience {
            report.stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    *model = best;
    report.wall_time = started.elapsed();
    Ok(report)
}

fn freeze_for(model: &mut ModelState, phase: Phase) {
    for tag in model.components() {
        let frozen = match phase {
            Phase::Shared => tag != ComponentTag::Shared,
            Phase::Branch => tag == ComponentTag::Shared,
            Phase::Full => false,
        };
        model.set_frozen_tag(tag, frozen);
    }
}

/// Trains a hierarchical model in rounds: a shared phase with the branches
/// frozen, then a branch phase with the shared layer frozen. Each component
/// has its own optimiser and scheduler; the shared scheduler follows the
/// total validation loss, each branch scheduler its own output's loss.
/// Early stopping and snapshots use the total validation loss per round.
pub fn train_hierarchical(
    model: &mut ModelState,
    train: &[WindowPair],
    val: &[WindowPair],
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    if !model.family().is_hierarchical() {
        return Err(TrainError::WrongFamily(format!("{} has no shared/branch split", model.family())));
    }
    check_inputs(cfg, train, val)?;
    let started = Instant::now();
    let mut report = empty_report(model);
    if cfg.max_epochs == 0 {
        return Ok(report);
    }
    let components = model.components();
    let branch_lr = cfg.branch_lr(model.spec.layers);
    let lr_of = |tag: &ComponentTag| if *tag == ComponentTag::Shared { cfg.lr } else { branch_lr };
    let mut opts: Vec<Adam> = components.iter().map(|t| Adam::new(*t, lr_of(t))).collect();
    let mut scheds: Vec<ReduceOnPlateau> = components
        .iter()
        .map(|t| ReduceOnPlateau::new(lr_of(t), cfg.plateau_factor, cfg.plateau_patience(), cfg.min_improvement))
        .collect();
    let mut stopper = Plateau::new(cfg.min_improvement);
    let mut best = model.clone();
    for epoch in 1..=cfg.max_epochs {
        let mut cols = Vec::new();
        let mut total = 0.0;
        for (k, phase) in [Phase::Shared, Phase::Branch].into_iter().enumerate() {
            freeze_for(model, phase);
            let before = digests(model);
            let lrs: Vec<f64> = opts.iter().map(|o| o.lr).collect();
            let train_loss = run_phase(model, train, cfg, 2 * epoch as u64 + k as u64, epoch, &mut opts)?;
            let (val_loss, per_col) = validation_mse(model, val)?;
            if !val_loss.is_finite() {
                return Err(TrainError::DivergedLoss { epoch });
            }
            report.records.push(EpochRecord {
                epoch,
                phase,
                train_loss,
                val_loss,
                lrs,
                digests_before: before,
                digests_after: digests(model),
            });
            total = val_loss;
            cols = per_col;
        }
        if total < report.best_val_loss {
            report.best_val_loss = total;
            report.best_epoch = epoch;
            best = model.clone();
        }
        for ((opt, sched), tag) in opts.iter_mut().zip(&mut scheds).zip(&components) {
            let signal = match tag {
                ComponentTag::Branch(j) => cols[*j],
                _ => total,
            };
            opt.lr = sched.step(signal);
        }
        stopper.observe(total);
        if stopper.bad_epochs >= cfg.patience {
            report.stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    *model = best;
    freeze_for(model, Phase::Full);
    report.wall_time = started.elapsed();
    Ok(report)
}

/// Dispatches on the model family.
pub fn train(
    model: &mut ModelState,
    train: &[WindowPair],
    val: &[WindowPair],
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    if model.family().is_hierarchical() {
        train_hierarchical(model, train, val, cfg)
    } else {
        train_monolithic(model, train, val, cfg)
    }
}
