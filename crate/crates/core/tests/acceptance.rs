//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use num::{BigRational, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smogcast::eval::{
    self, metrics, paired_t_test, persistence_forecast, rmse, smape, time_inference, write_metrics_csv,
    MetricBasis,
};
use smogcast::ingest::{synthesize, Column, SeriesTable, SynthConfig};
use smogcast::models::{batch_of, write_model, Family, ModelSpec, ModelState};
use smogcast::neuro::{Activation, CellKind, ComponentTag, Dense, Layer, Param, RecurrentCell, Tensor};
use smogcast::pipeline::{
    generate_pairs, pearson_abs, prepare, Chunk, PairSetStats, PipelineConfig, Role, SplitSpec, WindowGeometry,
    WindowPair,
};
use smogcast::search::sliding_window_splits;
use smogcast::train::{early_stop, mse_l2, train, Phase, ReduceOnPlateau, TrainConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

const FD_STEP: f64 = 1e-5;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn layer_probe(layer: &Layer, xs: &[Tensor], ws: &[Tensor]) -> f64 {
    layer
        .infer_sequence(xs)
        .unwrap()
        .iter()
        .zip(ws)
        .map(|(y, w)| y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Worst relative error over every parameter and input element, and the
/// number of elements checked.
fn layer_gradcheck(mut layer: Layer, xs: Vec<Tensor>, rng: &mut ChaCha8Rng) -> (f64, usize) {
    let (ys, cache) = layer.forward_sequence(&xs).unwrap();
    let ws: Vec<Tensor> = ys.iter().map(|y| rand_tensor(rng, y.shape())).collect();
    let dxs = layer.backward_sequence(&cache, &ws).unwrap();
    let (mut worst, mut checked) = (0.0f64, 0);
    for pi in 0..layer.params().len() {
        let analytic = layer.params()[pi].grad.clone();
        for k in 0..analytic.len() {
            let orig = layer.params()[pi].value.data()[k];
            layer.params_mut()[pi].value.data_mut()[k] = orig + FD_STEP;
            let up = layer_probe(&layer, &xs, &ws);
            layer.params_mut()[pi].value.data_mut()[k] = orig - FD_STEP;
            let down = layer_probe(&layer, &xs, &ws);
            layer.params_mut()[pi].value.data_mut()[k] = orig;
            worst = worst.max(rel_err(analytic.data()[k], (up - down) / (2.0 * FD_STEP)));
            checked += 1;
        }
    }
    let mut xs = xs;
    for t in 0..xs.len() {
        for k in 0..xs[t].len() {
            let orig = xs[t].data()[k];
            xs[t].data_mut()[k] = orig + FD_STEP;
            let up = layer_probe(&layer, &xs, &ws);
            xs[t].data_mut()[k] = orig - FD_STEP;
            let down = layer_probe(&layer, &xs, &ws);
            xs[t].data_mut()[k] = orig;
            worst = worst.max(rel_err(dxs[t].data()[k], (up - down) / (2.0 * FD_STEP)));
            checked += 1;
        }
    }
    (worst, checked)
}

fn model_gradcheck(spec: &ModelSpec, batch: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ModelState::build(spec, seed).unwrap();
    let n = batch * spec.input_len * spec.inputs;
    let x = Tensor::from_vec(
        &[batch, spec.input_len, spec.inputs],
        (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let (y, cache) = m.forward_train(&x).unwrap();
    let w = rand_tensor(&mut rng, y.shape());
    m.zero_grads();
    let dx = m.backward(&cache, &w).unwrap();
    let probe = |m: &ModelState, x: &Tensor| -> f64 {
        m.forward(x).unwrap().data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
    };
    let analytic: Vec<Vec<f64>> = m.params().iter().map(|p| p.grad.data().to_vec()).collect();
    let (mut worst, mut checked) = (0.0f64, 0);
    for (pi, grads) in analytic.iter().enumerate() {
        for (i, a) in grads.iter().enumerate() {
            let orig = m.params()[pi].value.data()[i];
            m.params_mut()[pi].value.data_mut()[i] = orig + FD_STEP;
            let up = probe(&m, &x);
            m.params_mut()[pi].value.data_mut()[i] = orig - FD_STEP;
            let down = probe(&m, &x);
            m.params_mut()[pi].value.data_mut()[i] = orig;
            worst = worst.max(rel_err(*a, (up - down) / (2.0 * FD_STEP)));
            checked += 1;
        }
    }
    let mut x = x;
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + FD_STEP;
        let up = probe(&m, &x);
        x.data_mut()[i] = orig - FD_STEP;
        let down = probe(&m, &x);
        x.data_mut()[i] = orig;
        worst = worst.max(rel_err(dx.data()[i], (up - down) / (2.0 * FD_STEP)));
        checked += 1;
    }
    (worst, checked)
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for trial in 0..20 {
        let (i, o, t, b) = (
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=10),
            rng.random_range(1..=4),
        );
        let xs: Vec<Tensor> = (0..t).map(|_| rand_tensor(&mut rng, &[b, i])).collect();
        let layers = [
            Layer::Dense(Dense::new(i, o, Activation::Relu, ComponentTag::Monolithic, "d", &mut rng)),
            Layer::Dense(Dense::new(i, o, Activation::Linear, ComponentTag::Monolithic, "d", &mut rng)),
            Layer::Recurrent(RecurrentCell::new(CellKind::Lstm, i, o, ComponentTag::Monolithic, "l", &mut rng)),
            Layer::Recurrent(RecurrentCell::new(CellKind::Gru, i, o, ComponentTag::Monolithic, "g", &mut rng)),
        ];
        for layer in layers {
            let (w, c) = layer_gradcheck(layer, xs.clone(), &mut rng);
            ensure(w < 1e-4, || format!("layer trial {trial}: relative error {w:e}"))?;
            worst = worst.max(w);
            checked += c;
        }
    }
    for f in Family::ALL {
        for (k, w, seed) in [(2, 5, 3), (3, 8, 4)] {
            let spec = ModelSpec {
                inputs: 3,
                input_len: 10,
                horizon: 4,
                ..ModelSpec::new(f, k, w)
            };
            let (e, c) = model_gradcheck(&spec, 4, seed);
            ensure(e < 1e-4, || format!("{f} k={k} w={w}: relative error {e:e}"))?;
            worst = worst.max(e);
            checked += c;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "max relative error {worst:.2e} over {checked} gradient elements, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// 2. Parameter counts

fn parameter_counts() -> Outcome {
    let mlp = ModelState::build(&ModelSpec::reference(Family::Mlp), 0).unwrap();
    ensure(mlp.param_count() == 17604, || format!("MLP has {} parameters", mlp.param_count()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for f in Family::ALL {
        let mut specs = vec![ModelSpec::reference(f)];
        for _ in 0..10 {
            let mut s = ModelSpec::new(f, rng.random_range(1..=7), rng.random_range(1..=64));
            s.inputs = rng.random_range(1..=12);
            if f.is_hierarchical() && rng.random_bool(0.5) {
                s.branch_layers = Some(rng.random_range(0..=4));
                s.branch_width = Some(rng.random_range(1..=32));
            }
            specs.push(s);
        }
        for s in specs {
            if s.validate().is_err() {
                continue;
            }
            let built = ModelState::build(&s, 0).unwrap().param_count();
            let closed = s.closed_form_param_count();
            ensure(built == closed, || format!("{f} {s:?}: built {built}, closed form {closed}"))?;
            checked += 1;
        }
    }
    let reference: Vec<String> = Family::ALL
        .iter()
        .map(|f| format!("{f}={}", ModelSpec::reference(*f).closed_form_param_count()))
        .collect();
    Ok(format!(
        "MLP(4x64, 10->4) = 17604; {checked} architectures match the closed form; reference sizes {}",
        reference.join(" ")
    ))
}

// ---------------------------------------------------------------------------
// 3. Windowing

fn coded_chunk(id: usize, len: usize, offset: usize, n_in: usize, n_out: usize) -> Chunk {
    let start = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap();
    let code = |c: usize, r: usize| (id * 1_000_000 + c * 10_000 + r) as f64;
    let cols = |n: usize, sign: f64| -> Vec<Column> {
        (0..n)
            .map(|c| Column::new(format!("c{c}"), "", (0..len).map(|r| sign * code(c, r)).collect()))
            .collect()
    };
    Chunk {
        id,
        label: format!("chunk{id}"),
        role: Role::Train,
        offset,
        source: SeriesTable::new("a", start, cols(n_in, 1.0)).unwrap(),
        target: SeriesTable::new("b", start, cols(n_out, -1.0)).unwrap(),
    }
}

/// Every start `n` on the stride grid whose input rows `[n, n + l)` and
/// target rows `[n + δ, n + δ + h)` fit inside the chunk, δ = l − h + 1.
fn brute_force_pairs(chunks: &[Chunk], l: usize, h: usize, stride: usize) -> Vec<WindowPair> {
    let delta = l - h + 1;
    let mut out = Vec::new();
    for c in chunks {
        let len = c.len();
        for n in 0..len {
            if n % stride != 0 || n + l > len || n + delta + h > len {
                continue;
            }
            let mut input = Vec::new();
            for t in n..n + l {
                for col in &c.source.columns {
                    input.push(col.values[t]);
                }
            }
            let mut target = Vec::new();
            for t in n + delta..n + delta + h {
                for col in &c.target.columns {
                    target.push(col.values[t]);
                }
            }
            out.push(WindowPair {
                input,
                target,
                n_inputs: c.source.columns.len(),
                n_targets: c.target.columns.len(),
                start: n,
                chunk_id: c.id,
                abs_start: c.offset + n,
            });
        }
    }
    out
}

fn windowing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total_pairs = 0;
    for layout in 0..200 {
        let geometry = if layout % 2 == 0 {
            WindowGeometry {
                input_len: 72,
                horizon: 24,
                stride: 24,
            }
        } else {
            let input_len = rng.random_range(1..=30);
            WindowGeometry {
                input_len,
                horizon: rng.random_range(1..=input_len),
                stride: rng.random_range(1..=12),
            }
        };
        let (n_in, n_out) = if layout % 2 == 0 { (10, 4) } else { (rng.random_range(1..=4), rng.random_range(1..=3)) };
        let mut offset = 0;
        let chunks: Vec<Chunk> = (0..rng.random_range(1..=5))
            .map(|id| {
                let len = rng.random_range(1..=400);
                let c = coded_chunk(id, len, offset, n_in, n_out);
                offset += len + rng.random_range(0..50);
                c
            })
            .collect();
        let (pairs, stats) = generate_pairs(&chunks, geometry).unwrap();
        let expected = brute_force_pairs(&chunks, geometry.input_len, geometry.horizon, geometry.stride);
        ensure(pairs == expected, || format!("layout {layout}: {} pairs vs {} expected", pairs.len(), expected.len()))?;
        let p = pairs.len();
        ensure(
            stats.pairs == p
                && stats.hrs_total == p * geometry.input_len
                && stats.n_u == p * geometry.input_len * n_in
                && stats.n_y == p * geometry.horizon * n_out
                && stats.n_total == stats.n_u + stats.n_y,
            || format!("layout {layout}: stats {stats:?}"),
        )?;
        if layout % 2 == 0 {
            ensure(stats.hrs_total == p * 72 && stats.n_u == p * 720 && stats.n_y == p * 96, || {
                format!("layout {layout}: {stats:?}")
            })?;
        }
        total_pairs += p;
    }
    let t5 = PairSetStats::compute(656, 72, 24, 10, 4);
    ensure(
        (t5.hrs_total, t5.n_u, t5.n_y, t5.n_total) == (47232, 472320, 62976, 535296),
        || format!("P=656 gives {t5:?}"),
    )?;
    Ok(format!(
        "200 layouts, {total_pairs} pairs identical to brute force; P=656 -> (47232, 472320, 62976)"
    ))
}

// ---------------------------------------------------------------------------
// 4. Metric oracles

fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut s = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Regularised incomplete beta by the modified Lentz continued fraction.
fn inc_beta_cf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - inc_beta_cf(1.0 - x, b, a);
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))).exp() / a;
    const TINY: f64 = 1e-300;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut f = d;
    for m in 1..100_000 {
        let m = m as f64;
        let num = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
        for (step, numerator) in [
            (0, num),
            (1, -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0))),
        ] {
            d = 1.0 + numerator * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + numerator / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if step == 1 && (delta - 1.0).abs() < 1e-16 {
                return front * f;
            }
        }
    }
    front * f
}

/// Two-sided Student-t tail: closed forms for one and two degrees of
/// freedom, the continued fraction otherwise.
fn t_tail_oracle(t: f64, df: usize) -> f64 {
    let t = t.abs();
    match df {
        1 => 2.0 / std::f64::consts::PI * (1.0 / t).atan(),
        2 => {
            let s = (2.0 + t * t).sqrt();
            2.0 / (s * (s + t))
        }
        _ => {
            let v = df as f64;
            inc_beta_cf(v / (v + t * t), v / 2.0, 0.5)
        }
    }
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut w_rmse, mut w_smape, mut w_r, mut w_loss, mut w_t, mut w_p) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for i in 0..1000 {
        let n = rng.random_range(2..=60);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..150.0)).collect();
        let yhat: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..150.0) })
            .collect();
        let nr = BigRational::from_integer((n as i64).into());

        let sse = y.iter().zip(&yhat).fold(BigRational::zero(), |acc, (a, b)| {
            let d = rational(*a) - rational(*b);
            acc + &d * &d
        });
        let oracle = (sse / &nr).to_f64().unwrap().sqrt();
        w_rmse = w_rmse.max(rel_err(rmse(&y, &yhat).unwrap(), oracle));

        let two_hundred = BigRational::from_integer(200.into());
        let terms = y.iter().zip(&yhat).fold(BigRational::zero(), |acc, (a, b)| {
            let den = rational(*a).abs() + rational(*b).abs();
            if den.is_zero() {
                acc
            } else {
                acc + &two_hundred * (rational(*a) - rational(*b)).abs() / den
            }
        });
        let s = smape(&y, &yhat).unwrap();
        w_smape = w_smape.max(rel_err(s, (terms / &nr).to_f64().unwrap()));
        let s_swapped = smape(&yhat, &y).unwrap();
        ensure((0.0..=200.0).contains(&s) && (s - s_swapped).abs() <= 1e-12 * s.max(1.0), || {
            format!("fixture {i}: sMAPE {s} vs swapped {s_swapped}")
        })?;

        let mx = y.iter().map(|v| rational(*v)).fold(BigRational::zero(), |a, b| a + b) / &nr;
        let my = yhat.iter().map(|v| rational(*v)).fold(BigRational::zero(), |a, b| a + b) / &nr;
        let (mut sxy, mut sxx, mut syy) = (BigRational::zero(), BigRational::zero(), BigRational::zero());
        for (a, b) in y.iter().zip(&yhat) {
            let (dx, dy) = (rational(*a) - &mx, rational(*b) - &my);
            sxy += &dx * &dy;
            sxx += &dx * &dx;
            syy += &dy * &dy;
        }
        if !sxx.is_zero() && !syy.is_zero() {
            let r2 = (&sxy * &sxy / (sxx * syy)).to_f64().unwrap();
            w_r = w_r.max(rel_err(pearson_abs(&y, &yhat).unwrap(), r2.sqrt()));
        }

        let lambda = [0.0, 1e-7, 1e-5, 1e-3][i % 4];
        let pred = Tensor::from_vec(&[n], yhat.iter().map(|v| v / 150.0).collect()).unwrap();
        let truth = Tensor::from_vec(&[n], y.iter().map(|v| v / 150.0).collect()).unwrap();
        let params: Vec<Param> = (0..3)
            .map(|k| {
                let len = rng.random_range(1..=20);
                Param::new(format!("p{k}"), ComponentTag::Monolithic, rand_tensor(&mut rng, &[len]))
            })
            .collect();
        let refs: Vec<&Param> = params.iter().collect();
        let (loss, _) = mse_l2(&pred, &truth, &refs, lambda).unwrap();
        let mut exact = pred
            .data()
            .iter()
            .zip(truth.data())
            .fold(BigRational::zero(), |acc, (p, t)| {
                let d = rational(*p) - rational(*t);
                acc + &d * &d
            })
            / &nr;
        let norm = params
            .iter()
            .flat_map(|p| p.value.data().iter())
            .fold(BigRational::zero(), |acc, v| acc + rational(*v) * rational(*v));
        exact += rational(lambda) * norm;
        w_loss = w_loss.max(rel_err(loss, exact.to_f64().unwrap()));

        let m = rng.random_range(2..=200);
        let shift = rng.random_range(-1.0..1.0);
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + shift + rng.random_range(-2.0..2.0)).collect();
        let test = paired_t_test("a", "b", MetricBasis::Rmse, &a, &b).unwrap();
        let mr = BigRational::from_integer((m as i64).into());
        let d: Vec<BigRational> = a.iter().zip(&b).map(|(x, y)| rational(*x) - rational(*y)).collect();
        let md = d.iter().fold(BigRational::zero(), |acc, v| acc + v) / &mr;
        let ss = d.iter().fold(BigRational::zero(), |acc, v| {
            let e = v - &md;
            acc + &e * &e
        });
        let var = ss / (&mr - BigRational::from_integer(1.into()));
        let t2 = &md * &md * &mr / var;
        let t_oracle = t2.to_f64().unwrap().sqrt() * if md.is_negative() { -1.0 } else { 1.0 };
        w_t = w_t.max(rel_err(test.t, t_oracle));
        ensure(test.df == m - 1, || format!("fixture {i}: df {}", test.df))?;
        w_p = w_p.max((test.p - t_tail_oracle(t_oracle, m - 1)).abs() / t_tail_oracle(t_oracle, m - 1));
    }
    for (name, worst) in [
        ("RMSE", w_rmse),
        ("sMAPE", w_smape),
        ("Pearson |r|", w_r),
        ("MSE+L2", w_loss),
        ("t", w_t),
        ("p", w_p),
    ] {
        ensure(worst <= 1e-9, || format!("{name}: worst relative error {worst:e}"))?;
    }
    let reported = eval::student_t_two_sided(-5.922, 8927.0);
    ensure((reported - 3.30e-9).abs() < 0.005e-9, || format!("t(8927) = -5.922 gives p = {reported:e}"))?;
    Ok(format!(
        "1000 fixtures each; worst relative errors RMSE {w_rmse:.1e}, sMAPE {w_smape:.1e}, |r| {w_r:.1e}, \
         MSE+L2 {w_loss:.1e}, t {w_t:.1e}, p {w_p:.1e}; t(8927)=-5.922 -> p={reported:.3e}"
    ))
}

// ---------------------------------------------------------------------------
// Shared synthetic setup

struct Data {
    train: Vec<WindowPair>,
    val: Vec<WindowPair>,
    test: Vec<WindowPair>,
    prepared: smogcast::pipeline::Prepared,
}

fn synthetic(seed: u64, hours: usize) -> Data {
    let (a, b) = synthesize(&SynthConfig {
        seed,
        hours,
        ..Default::default()
    })
    .unwrap();
    let spec = SplitSpec::chronological(hours, 0.763, 0.119);
    let prepared = prepare(&a, &b, &spec, &PipelineConfig::default(), "acceptance").unwrap();
    Data {
        train: prepared.train.pairs.clone(),
        val: prepared.validation.pairs.clone(),
        test: prepared.test.pairs.clone(),
        prepared,
    }
}

// ---------------------------------------------------------------------------
// 5. Hierarchical training contract

fn decay_epochs(lrs: &[f64]) -> Vec<usize> {
    lrs.windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0])
        .map(|(i, _)| i + 2)
        .collect()
}

fn hierarchical_contract() -> Outcome {
    let data = synthetic(5, 2500);
    let mut lines = Vec::new();
    for family in [Family::Hgru, Family::Hlstm] {
        let spec = ModelSpec {
            inputs: data.train[0].n_inputs,
            readout_bias: Some(0.1),
            ..ModelSpec::new(family, 2, 12)
        };
        let mut model = ModelState::build(&spec, 5).unwrap();
        let cfg = TrainConfig {
            lr: 1e-2,
            lambda: 1e-6,
            patience: 30,
            plateau_patience: Some(1),
            plateau_factor: 0.5,
            max_epochs: 12,
            seed: 5,
            ..TrainConfig::reference(family)
        };
        let report = train(&mut model, &data.train, &data.val, &cfg).unwrap();
        let shared = report.components.iter().position(|c| c == "shared").unwrap();
        let mut phases = 0;
        for r in &report.records {
            let active = |i: usize| match r.phase {
                Phase::Shared => i == shared,
                Phase::Branch => i != shared,
                Phase::Full => true,
            };
            for i in 0..report.components.len() {
                if !active(i) {
                    ensure(r.digests_before[i] == r.digests_after[i], || {
                        format!("{family} epoch {} {:?} phase changed frozen {}", r.epoch, r.phase, report.components[i])
                    })?;
                }
            }
            ensure(
                (0..report.components.len()).any(|i| active(i) && r.digests_before[i] != r.digests_after[i]),
                || format!("{family} epoch {} {:?} phase changed nothing", r.epoch, r.phase),
            )?;
            phases += 1;
        }
        ensure(model.components().iter().all(|t| !model.is_frozen(*t)), || {
            format!("{family} left components frozen")
        })?;

        // The shared scheduler follows the total validation loss of each round.
        let rounds: Vec<_> = report.records.iter().filter(|r| r.phase == Phase::Branch).collect();
        let mut sim = ReduceOnPlateau::new(cfg.lr, cfg.plateau_factor, cfg.plateau_patience(), cfg.min_improvement);
        for w in rounds.windows(2) {
            let lr = sim.step(w[0].val_loss);
            ensure(w[1].lrs[shared] == lr, || {
                format!("{family} epoch {}: shared lr {} vs simulated {lr}", w[1].epoch, w[1].lrs[shared])
            })?;
        }
        let schedules: Vec<Vec<usize>> = (0..report.components.len())
            .map(|i| decay_epochs(&rounds.iter().map(|r| r.lrs[i]).collect::<Vec<_>>()))
            .collect();
        let mut distinct = schedules.clone();
        distinct.sort();
        distinct.dedup();
        ensure(distinct.len() >= 2 && schedules.iter().any(|s| !s.is_empty()), || {
            format!("{family}: decay schedules not independent: {schedules:?}")
        })?;
        lines.push(format!(
            "{family} {phases} phases, {} distinct decay schedules over 5 components",
            distinct.len()
        ));
    }
    Ok(format!("frozen components bit-identical in every phase; {}", lines.join("; ")))
}

// ---------------------------------------------------------------------------
// 6. Learning capability

fn learning_capability() -> Outcome {
    let seeds = [0u64, 1, 2];
    let flat_pairs = [(Family::Hmlp, Family::Mlp), (Family::Hlstm, Family::Lstm), (Family::Hgru, Family::Gru)];
    let mut wins = [0usize; 3];
    let mut worst_ratio = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for &seed in &seeds {
        let data = synthetic(seed, 4000);
        let sc = &data.prepared.sidecar;
        let persistence = persistence_forecast(&data.test, &sc.input_scaler, &sc.target_scaler).unwrap();
        let base = metrics("persistence", &persistence, 0).unwrap().rmse_total;
        let mut rmse_of = std::collections::BTreeMap::new();
        for f in Family::ALL {
            let spec = ModelSpec {
                inputs: data.train[0].n_inputs,
                readout_bias: Some(0.1),
                ..ModelSpec::new(f, 2, 32)
            };
            let cfg = TrainConfig {
                lr: 3e-3,
                max_epochs: 60,
                seed,
                ..TrainConfig::reference(f)
            };
            let started = Instant::now();
            let mut model = ModelState::build(&spec, seed).unwrap();
            train(&mut model, &data.train, &data.val, &cfg).unwrap();
            let elapsed = started.elapsed();
            slowest = slowest.max(elapsed);
            let (m, _) = eval::evaluate(&model, &data.test, &sc.target_scaler).unwrap();
            let ratio = m.rmse_total / base;
            worst_ratio = worst_ratio.max(ratio);
            if ratio > 0.7 {
                failures.push(format!("seed {seed} {f}: rmse {:.3} is {:.0}% of persistence", m.rmse_total, ratio * 100.0));
            }
            if elapsed > Duration::from_secs(600) {
                failures.push(format!("seed {seed} {f}: {elapsed:?}"));
            }
            rmse_of.insert(f, m.rmse_total);
        }
        for (i, (h, flat)) in flat_pairs.iter().enumerate() {
            if rmse_of[h] <= rmse_of[flat] * 1.05 {
                wins[i] += 1;
            }
        }
        summary.push(format!(
            "seed {seed}: {}",
            Family::ALL
                .iter()
                .map(|f| format!("{f} {:.2}", rmse_of[f] / base))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    for (i, (h, flat)) in flat_pairs.iter().enumerate() {
        if wins[i] < 2 {
            failures.push(format!("{h} matched {flat} on only {} of 3 seeds", wins[i]));
        }
    }
    ensure(failures.is_empty(), || format!("{}; ratios to persistence {}", failures.join("; "), summary.join(" | ")))?;
    Ok(format!(
        "worst RMSE {:.0}% of persistence; H matches flat on {:?} of 3 seeds; slowest model {:.0}s; ratios {}",
        worst_ratio * 100.0,
        wins,
        slowest.as_secs_f64(),
        summary.join(" | ")
    ))
}

// ---------------------------------------------------------------------------
// 7. Early stopping and plateau

/// Epochs (1-based) at which the learning rate drops, and the epoch at which
/// training stops, from a plain counter over the running best.
fn hand_counter(losses: &[f64], patience: usize, plateau: usize, min_impr: f64) -> (Vec<usize>, Option<usize>) {
    let mut best = f64::INFINITY;
    let (mut bad_stop, mut bad_lr) = (0, 0);
    let mut decays = Vec::new();
    for (i, &l) in losses.iter().enumerate() {
        let epoch = i + 1;
        let improved = best == f64::INFINITY || best - l >= min_impr;
        if improved {
            best = l;
            bad_stop = 0;
            bad_lr = 0;
        } else {
            bad_stop += 1;
            bad_lr += 1;
        }
        if bad_lr == plateau {
            decays.push(epoch + 1);
            bad_lr = 0;
        }
        if bad_stop == patience {
            return (decays, Some(epoch));
        }
    }
    (decays, None)
}

fn scheduler_run(losses: &[f64], patience: usize, plateau: usize, min_impr: f64) -> (Vec<usize>, Option<usize>) {
    let mut s = ReduceOnPlateau::new(1.0, 0.1, plateau, min_impr);
    let mut decays = Vec::new();
    for (i, &l) in losses.iter().enumerate() {
        let before = s.lr;
        if s.step(l) < before {
            decays.push(i + 2);
        }
        if early_stop(&losses[..=i], patience, min_impr) {
            return (decays, Some(i + 1));
        }
    }
    (decays, None)
}

fn early_stopping_and_plateau() -> Outcome {
    let min_impr = 1e-5;
    let above = 1e-5f64.next_up();
    let scripted: Vec<(Vec<f64>, usize, usize)> = vec![
        (vec![1.0, 0.9, 0.8, 0.8, 0.8, 0.8], 3, 2),
        // An improvement of exactly the threshold counts.
        (vec![2e-5, 1e-5, 1e-5, 1e-5], 2, 1),
        // One ulp short of the threshold does not.
        (vec![2e-5, above, above], 2, 1),
        (vec![1.0, 1.0 - 0.5e-5, 1.0 - 0.9e-5, 1.0 - 2e-5, 1.0 - 2e-5], 2, 1),
        (vec![0.5, 0.6, 0.4, 0.45, 0.45, 0.3, 0.31, 0.32, 0.33], 3, 2),
    ];
    let exact = std::hint::black_box(2e-5f64) - 1e-5 == min_impr;
    ensure(exact, || "2e-5 - 1e-5 is not exactly 1e-5".into())?;
    let mut cases = 0;
    for (losses, patience, plateau) in &scripted {
        let a = hand_counter(losses, *patience, *plateau, min_impr);
        let b = scheduler_run(losses, *patience, *plateau, min_impr);
        ensure(a == b, || format!("{losses:?}: counter {a:?}, implementation {b:?}"))?;
        cases += 1;
    }
    ensure(hand_counter(&scripted[1].0, 2, 1, min_impr) == (vec![4, 5], Some(4)), || {
        "an improvement of exactly the threshold must reset the counters".into()
    })?;
    ensure(hand_counter(&scripted[2].0, 2, 1, min_impr) == (vec![3, 4], Some(3)), || {
        "an improvement one ulp short of the threshold must not count".into()
    })?;
    ensure(hand_counter(&[1.0, 1.0 - 0.5e-5, 1.0 - 0.9e-5], 2, 5, min_impr).1 == Some(3), || {
        "sub-threshold improvements must count as bad epochs".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let n = rng.random_range(1..40);
        let mut l = 1.0;
        let losses: Vec<f64> = (0..n)
            .map(|_| {
                l += [-1e-3, -1e-5, -0.5e-5, 0.0, 1e-4][rng.random_range(0..5)];
                l
            })
            .collect();
        let (p, q) = (rng.random_range(1..8), rng.random_range(1..8));
        let a = hand_counter(&losses, p, q, min_impr);
        let b = scheduler_run(&losses, p, q, min_impr);
        ensure(a == b, || format!("{losses:?} p={p} q={q}: counter {a:?}, implementation {b:?}"))?;
        cases += 1;
    }

    // The training loop stops after `patience` epochs without improvement.
    let data = synthetic(7, 1500);
    for patience in [1, 3, 6] {
        let spec = ModelSpec {
            inputs: data.train[0].n_inputs,
            ..ModelSpec::new(Family::Mlp, 1, 4)
        };
        let mut model = ModelState::build(&spec, 7).unwrap();
        let cfg = TrainConfig {
            lr: 0.0,
            lambda: 0.0,
            patience,
            max_epochs: 50,
            ..TrainConfig::reference(Family::Mlp)
        };
        let report = train(&mut model, &data.train, &data.val, &cfg).unwrap();
        ensure(report.epochs() == patience + 1 && report.best_epoch == 1, || {
            format!("patience {patience}: stopped after {} epochs", report.epochs())
        })?;
    }
    Ok(format!("{cases} scripted sequences match the hand counter, boundary included; training loop stops at patience + 1"))
}

// ---------------------------------------------------------------------------
// 8. Determinism

fn determinism() -> Outcome {
    let data = synthetic(8, 2000);
    let sc = &data.prepared.sidecar;
    let run = |seed: u64| -> Vec<(Vec<u8>, Vec<u8>)> {
        Family::ALL
            .iter()
            .map(|&f| {
                let spec = ModelSpec {
                    inputs: data.train[0].n_inputs,
                    ..ModelSpec::new(f, 2, 6)
                };
                let mut model = ModelState::build(&spec, seed).unwrap();
                model.scaler_hash = Some(sc.target_scaler.fingerprint());
                let cfg = TrainConfig {
                    lr: 3e-3,
                    max_epochs: 4,
                    seed,
                    ..TrainConfig::reference(f)
                };
                train(&mut model, &data.train, &data.val, &cfg).unwrap();
                let mut container = Vec::new();
                write_model(&model, &mut container).unwrap();
                let (report, _) = eval::evaluate(&model, &data.test, &sc.target_scaler).unwrap();
                let mut csv = Vec::new();
                write_metrics_csv(&[report], &mut csv, &[("config_hash", "x")]).unwrap();
                (container, csv)
            })
            .collect()
    };
    let (a, b, c) = (run(1), run(1), run(2));
    for (i, f) in Family::ALL.iter().enumerate() {
        ensure(a[i].0 == b[i].0, || format!("{f}: model containers differ"))?;
        ensure(a[i].1 == b[i].1, || format!("{f}: metrics CSVs differ"))?;
        ensure(a[i].0 != c[i].0, || format!("{f}: seed has no effect"))?;
    }
    let bytes: usize = a.iter().map(|(m, _)| m.len()).sum();
    Ok(format!("six families, {bytes} container bytes and metrics CSVs byte-identical across runs"))
}

// ---------------------------------------------------------------------------
// 9. Inference latency

fn inference_latency() -> Outcome {
    let data = synthetic(9, 1500);
    let mut parts = Vec::new();
    for f in Family::ALL {
        let spec = ModelSpec::reference(f);
        let model = ModelState::build(&spec, 9).unwrap();
        let stats = time_inference(&model, &data.test[0], 15).unwrap().unwrap();
        ensure(stats.median_ms < 1000.0, || format!("{f}: median {:.1} ms", stats.median_ms))?;
        let (x, _) = batch_of(&[&data.test[0]]).unwrap();
        ensure(model.forward(&x).unwrap().shape() == [1, 24, 4], || format!("{f}: wrong forecast shape"))?;
        parts.push(format!("{f} {:.2}", stats.median_ms));
    }
    Ok(format!("median ms per 24-hour forecast at reference size: {}", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 10. Cross-validation leakage

fn cv_leakage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut folds = 0;
    let mut geometries = 0;
    while geometries < 500 {
        let n = rng.random_range(2..2000);
        let k = rng.random_range(1..=10);
        let tf: f64 = rng.random_range(0.05..0.9);
        let vf = rng.random_range(0.01..(1.0 - tf).max(0.02));
        let Ok(splits) = sliding_window_splits(n, k, tf, vf) else {
            continue;
        };
        geometries += 1;
        for s in &splits {
            let train_end = *s.train.iter().max().expect("non-empty training window");
            let val_start = *s.validation.iter().min().expect("non-empty validation window");
            ensure(val_start > train_end, || {
                format!("n={n} k={k} tf={tf} vf={vf}: validation starts at {val_start}, training ends at {train_end}")
            })?;
            folds += 1;
        }
    }
    Ok(format!("{geometries} random geometries, {folds} folds, every validation pair after every training pair"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient correctness", gradient_correctness),
        ("parameter counts", parameter_counts),
        ("windowing oracle", windowing),
        ("metric oracles", metric_oracles),
        ("hierarchical training contract", hierarchical_contract),
        ("learning capability", learning_capability),
        ("early stopping and plateau", early_stopping_and_plateau),
        ("determinism", determinism),
        ("inference latency", inference_latency),
        ("cross-validation leakage", cv_leakage),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(out, "[{tag}] {number:>2}. {name} ({secs:.1}s): {detail}").unwrap();
        out.flush().unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
