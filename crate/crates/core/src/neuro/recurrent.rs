//! LSTM and GRU cells with exact backpropagation through time.
//!
//! Both cells follow the common two-bias layout: gate pre-activations are
//! `x · w_ihᵀ + b_ih + h · w_hhᵀ + b_hh`, stacked gate-major.
//!
//! LSTM gates (order i, f, g, o):
//!   c' = σ(f) ⊙ c + σ(i) ⊙ tanh(g),  h' = σ(o) ⊙ tanh(c')
//!
//! GRU gates (order r, z, n):
//!   r = σ(·), z = σ(·), n = tanh(x-part_n + r ⊙ h-part_n),  h' = (1 − z) ⊙ n + z ⊙ h

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{accumulate_affine_grads, affine, backprop_input, sigmoid};
use super::Backprop;
use super::{init_bound, ComponentTag, NeuroError, Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(&self) -> usize {
        match self {
            Self::Lstm => 4,
            Self::Gru => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentCell {
    pub kind: CellKind,
    pub w_ih: Param,
    pub w_hh: Param,
    pub b_ih: Param,
    pub b_hh: Param,
}

/// Hidden state (and LSTM cell state) for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnState {
    pub h: Tensor,
    pub c: Option<Tensor>,
}

#[derive(Debug, Clone)]
enum StepCache {
    Lstm {
        x: Tensor,
        h_prev: Tensor,
        c_prev: Tensor,
        /// Activated gates `[B × 4H]` (σ(i), σ(f), tanh(g), σ(o)).
        gates: Tensor,
        tanh_c: Tensor,
    },
    Gru {
        x: Tensor,
        h_prev: Tensor,
        /// `[B × 3H]` holding r, z, n.
        gates: Tensor,
        /// `h · w_hnᵀ + b_hn`, needed for the reset-gate gradient.
        h_part_n: Tensor,
    },
}

/// Per-step caches of one unrolled sequence.
#[derive(Debug, Clone)]
pub struct SequenceCache {
    steps: Vec<StepCache>,
}

impl RecurrentCell {
    /// Every tensor uniform in `±1/√hidden`, the common recurrent default.
    pub fn new<R: Rng + ?Sized>(
        kind: CellKind,
        inputs: usize,
        hidden: usize,
        tag: ComponentTag,
        name: &str,
        rng: &mut R,
    ) -> Self {
        let b = init_bound(hidden);
        let g = kind.gates() * hidden;
        Self {
            kind,
            w_ih: Param::uniform(format!("{name}.w_ih"), tag, &[g, inputs], b, rng),
            w_hh: Param::uniform(format!("{name}.w_hh"), tag, &[g, hidden], b, rng),
            b_ih: Param::uniform(format!("{name}.b_ih"), tag, &[g], b, rng),
            b_hh: Param::uniform(format!("{name}.b_hh"), tag, &[g], b, rng),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w_ih.value.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.value.cols()
    }

    pub fn zero_state(&self, batch: usize) -> RnnState {
        RnnState {
            h: Tensor::zeros(&[batch, self.hidden()]),
            c: match self.kind {
                CellKind::Lstm => Some(Tensor::zeros(&[batch, self.hidden()])),
                CellKind::Gru => None,
            },
        }
    }

    pub fn params(&self) -> [&Param; 4] {
        [&self.w_ih, &self.w_hh, &self.b_ih, &self.b_hh]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 4] {
        [&mut self.w_ih, &mut self.w_hh, &mut self.b_ih, &mut self.b_hh]
    }

    fn check(&self, x: &Tensor, state: &RnnState) -> Result<(), NeuroError> {
        let batch = x.rows();
        if x.shape().len() != 2 || x.cols() != self.inputs() {
            return Err(NeuroError::ShapeMismatch(format!(
                "cell expects [_, {}], got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        state.h.expect_shape(&[batch, self.hidden()], "hidden state")?;
        match (self.kind, &state.c) {
            (CellKind::Lstm, Some(c)) => c.expect_shape(&[batch, self.hidden()], "cell state"),
            (CellKind::Lstm, None) => Err(NeuroError::ShapeMismatch("LSTM needs a cell state".into())),
            (CellKind::Gru, _) => Ok(()),
        }
    }

    /// One time step. Returns the new hidden vector (the readout input) and
    /// the new state.
    pub fn step(&self, x: &Tensor, state: &RnnState) -> Result<(Tensor, RnnState), NeuroError> {
        self.check(x, state)?;
        let (h, state, _) = self.step_cached(x, state);
        Ok((h, state))
    }

    fn step_cached(&self, x: &Tensor, state: &RnnState) -> (Tensor, RnnState, StepCache) {
        let hs = self.hidden();
        let batch = x.rows();
        let gi = affine(x, &self.w_ih.value, &self.b_ih.value);
        let gh = affine(&state.h, &self.w_hh.value, &self.b_hh.value);
        match self.kind {
            CellKind::Lstm => {
                let c_prev = state.c.clone().expect("checked");
                let mut gates = Tensor::zeros(&[batch, 4 * hs]);
                let mut c = Tensor::zeros(&[batch, hs]);
                let mut tanh_c = Tensor::zeros(&[batch, hs]);
                let mut h = Tensor::zeros(&[batch, hs]);
                for b in 0..batch {
                    let (pi, ph) = (gi.row(b), gh.row(b));
                    let gr = gates.row_mut(b);
                    for k in 0..hs {
                        gr[k] = sigmoid(pi[k] + ph[k]);
                        gr[hs + k] = sigmoid(pi[hs + k] + ph[hs + k]);
                        gr[2 * hs + k] = (pi[2 * hs + k] + ph[2 * hs + k]).tanh();
                        gr[3 * hs + k] = sigmoid(pi[3 * hs + k] + ph[3 * hs + k]);
                    }
                    let gr = gates.row(b);
                    let cp = c_prev.row(b);
                    for k in 0..hs {
                        let cv = gr[hs + k] * cp[k] + gr[k] * gr[2 * hs + k];
                        let tc = cv.tanh();
                        c.row_mut(b)[k] = cv;
                        tanh_c.row_mut(b)[k] = tc;
                        h.row_mut(b)[k] = gr[3 * hs + k] * tc;
                    }
                }
                let cache = StepCache::Lstm {
                    x: x.clone(),
                    h_prev: state.h.clone(),
                    c_prev,
                    gates,
                    tanh_c,
                };
                (h.clone(), RnnState { h, c: Some(c) }, cache)
            }
            CellKind::Gru => {
                let mut gates = Tensor::zeros(&[batch, 3 * hs]);
                let mut h_part_n = Tensor::zeros(&[batch, hs]);
                let mut h = Tensor::zeros(&[batch, hs]);
                for b in 0..batch {
                    let (pi, ph) = (gi.row(b), gh.row(b));
                    let hp = state.h.row(b);
                    let gr = gates.row_mut(b);
                    for k in 0..hs {
                        let r = sigmoid(pi[k] + ph[k]);
                        let z = sigmoid(pi[hs + k] + ph[hs + k]);
                        let n = (pi[2 * hs + k] + r * ph[2 * hs + k]).tanh();
                        gr[k] = r;
                        gr[hs + k] = z;
                        gr[2 * hs + k] = n;
                        h_part_n.row_mut(b)[k] = ph[2 * hs + k];
                        h.row_mut(b)[k] = (1.0 - z) * n + z * hp[k];
                    }
                }
                let cache = StepCache::Gru {
                    x: x.clone(),
                    h_prev: state.h.clone(),
                    gates,
                    h_part_n,
                };
                (h.clone(), RnnState { h, c: None }, cache)
            }
        }
    }

    /// Unrolls over `xs` (each `[B × inputs]`) from a zero state and returns
    /// the hidden vector at every step.
    pub fn forward_sequence(&self, xs: &[Tensor]) -> Result<(Vec<Tensor>, SequenceCache), NeuroError> {
        let first = xs
            .first()
            .ok_or_else(|| NeuroError::ShapeMismatch("empty sequence".into()))?;
        let mut state = self.zero_state(first.rows());
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            self.check(x, &state)?;
            let (h, next, cache) = self.step_cached(x, &state);
            hs.push(h);
            steps.push(cache);
            state = next;
        }
        Ok((hs, SequenceCache { steps }))
    }

    /// Backpropagation through time. `dhs[t]` is the loss gradient with
    /// respect to the hidden output of step `t` (zero where no readout is
    /// taken); earlier steps receive gradient only through the recurrence.
    /// Parameter gradients are accumulated; input gradients are returned.
    pub fn backward_sequence(
        &mut self,
        cache: &SequenceCache,
        dhs: &[Tensor],
    ) -> Result<Vec<Tensor>, NeuroError> {
        self.backward_sequence_with(cache, dhs, Backprop::FULL)
    }

    /// As [`Self::backward_sequence`], optionally skipping parameter or
    /// input gradients. Skipped input gradients are returned as zeros.
    pub fn backward_sequence_with(
        &mut self,
        cache: &SequenceCache,
        dhs: &[Tensor],
        mode: Backprop,
    ) -> Result<Vec<Tensor>, NeuroError> {
        if dhs.len() != cache.steps.len() {
            return Err(NeuroError::ShapeMismatch(format!(
                "{} upstream gradients for {} steps",
                dhs.len(),
                cache.steps.len()
            )));
        }
        let hs = self.hidden();
        let mut dxs = vec![Tensor::zeros(&[0]); dhs.len()];
        let mut dh_next: Option<Tensor> = None;
        let mut dc_next: Option<Tensor> = None;
        for t in (0..dhs.len()).rev() {
            let mut dh = dhs[t].clone();
            if let Some(d) = &dh_next {
                dh.add_assign(d);
            }
            let batch = dh.rows();
            match &cache.steps[t] {
                StepCache::Lstm {
                    x,
                    h_prev,
                    c_prev,
                    gates,
                    tanh_c,
                } => {
                    let mut da = Tensor::zeros(&[batch, 4 * hs]);
                    let mut dc_prev = Tensor::zeros(&[batch, hs]);
                    for b in 0..batch {
                        let g = gates.row(b);
                        let tc = tanh_c.row(b);
                        let cp = c_prev.row(b);
                        let dhb = dh.row(b);
                        let dcn = dc_next.as_ref().map(|d| d.row(b));
                        let dab = da.row_mut(b);
                        let mut dcp = vec![0.0; hs];
                        for k in 0..hs {
                            let (i, f, gg, o) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
                            let d_o = dhb[k] * tc[k];
                            let dc = dcn.map_or(0.0, |d| d[k]) + dhb[k] * o * (1.0 - tc[k] * tc[k]);
                            let d_f = dc * cp[k];
                            let d_i = dc * gg;
                            let d_g = dc * i;
                            dcp[k] = dc * f;
                            dab[k] = d_i * i * (1.0 - i);
                            dab[hs + k] = d_f * f * (1.0 - f);
                            dab[2 * hs + k] = d_g * (1.0 - gg * gg);
                            dab[3 * hs + k] = d_o * o * (1.0 - o);
                        }
                        dc_prev.row_mut(b).copy_from_slice(&dcp);
                    }
                    if mode.params {
                        accumulate_affine_grads(x, &da, &mut self.w_ih.grad, &mut self.b_ih.grad);
                        accumulate_affine_grads(h_prev, &da, &mut self.w_hh.grad, &mut self.b_hh.grad);
                    }
                    dxs[t] = if mode.inputs {
                        backprop_input(&da, &self.w_ih.value)
                    } else {
                        Tensor::zeros(&[batch, self.inputs()])
                    };
                    dh_next = Some(backprop_input(&da, &self.w_hh.value));
                    dc_next = Some(dc_prev);
                }
                StepCache::Gru {
                    x,
                    h_prev,
                    gates,
                    h_part_n,
                } => {
                    let mut dgi = Tensor::zeros(&[batch, 3 * hs]);
                    let mut dgh = Tensor::zeros(&[batch, 3 * hs]);
                    let mut dh_direct = Tensor::zeros(&[batch, hs]);
                    for b in 0..batch {
                        let g = gates.row(b);
                        let hp = h_prev.row(b);
                        let hn = h_part_n.row(b);
                        let dhb = dh.row(b);
                        for k in 0..hs {
                            let (r, z, n) = (g[k], g[hs + k], g[2 * hs + k]);
                            let dn = dhb[k] * (1.0 - z);
                            let dz = dhb[k] * (hp[k] - n);
                            dh_direct.row_mut(b)[k] = dhb[k] * z;
                            let dan = dn * (1.0 - n * n);
                            let dr = dan * hn[k];
                            let dar = dr * r * (1.0 - r);
                            let daz = dz * z * (1.0 - z);
                            let gi = dgi.row_mut(b);
                            gi[k] = dar;
                            gi[hs + k] = daz;
                            gi[2 * hs + k] = dan;
                            let gh = dgh.row_mut(b);
                            gh[k] = dar;
                            gh[hs + k] = daz;
                            gh[2 * hs + k] = dan * r;
                        }
                    }
                    if mode.params {
                        accumulate_affine_grads(x, &dgi, &mut self.w_ih.grad, &mut self.b_ih.grad);
                        accumulate_affine_grads(h_prev, &dgh, &mut self.w_hh.grad, &mut self.b_hh.grad);
                    }
                    dxs[t] = if mode.inputs {
                        backprop_input(&dgi, &self.w_ih.value)
                    } else {
                        Tensor::zeros(&[batch, self.inputs()])
                    };
                    let mut dhp = backprop_input(&dgh, &self.w_hh.value);
                    dhp.add_assign(&dh_direct);
                    dh_next = Some(dhp);
                }
            }
        }
        Ok(dxs)
    }
}
