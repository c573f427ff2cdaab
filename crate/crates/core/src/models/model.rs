use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Family, ModelError, ModelSpec};
use crate::ingest::POLLUTANTS;
use crate::neuro::{Activation, Backprop, ComponentTag, Dense, Layer, LayerCache, NeuroError, Param, RecurrentCell, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Branch {
    pub layers: Vec<Layer>,
    pub readout: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Body {
    Flat { trunk: Vec<Layer>, readout: Dense },
    Hierarchical { shared: Layer, branches: Vec<Branch> },
}

/// A built model: architecture, parameters and per-component freeze flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub spec: ModelSpec,
    pub seed: u64,
    /// Fingerprint of the target scaler the model was trained against.
    pub scaler_hash: Option<String>,
    /// Hash of the run configuration that produced the model.
    pub config_hash: Option<String>,
    pub(crate) body: Body,
    frozen: BTreeSet<ComponentTag>,
}

/// Forward values retained for [`ModelState::backward`].
#[derive(Debug, Clone)]
pub struct ModelCache {
    batch: usize,
    input_len: usize,
    /// First input step fed to the network (MLPs only see the last rows).
    first_step: usize,
    body: BodyCache,
}

#[derive(Debug, Clone)]
enum BodyCache {
    Flat {
        trunk: Vec<LayerCache>,
        readout: Vec<crate::neuro::DenseCache>,
        steps: usize,
    },
    Hierarchical {
        shared: LayerCache,
        branches: Vec<(Vec<LayerCache>, Vec<crate::neuro::DenseCache>)>,
        steps: usize,
    },
}

fn layer(
    spec: &ModelSpec,
    inputs: usize,
    outputs: usize,
    tag: ComponentTag,
    name: &str,
    rng: &mut ChaCha8Rng,
) -> Layer {
    match spec.family.cell() {
        Some(kind) => Layer::Recurrent(RecurrentCell::new(kind, inputs, outputs, tag, name, rng)),
        None => Layer::Dense(Dense::new(inputs, outputs, Activation::Relu, tag, name, rng)),
    }
}

fn set_bias(readout: &mut Dense, bias: Option<f64>) {
    if let Some(b) = bias {
        readout.bias.value.fill(b);
    }
}

/// Splits `[B × T × F]` into `T` step tensors `[B × F]`, from `first` on.
fn steps_of(batch: &Tensor, first: usize) -> Vec<Tensor> {
    let (b, t, f) = (batch.shape()[0], batch.shape()[1], batch.shape()[2]);
    (first..t)
        .map(|s| {
            let mut d = Vec::with_capacity(b * f);
            for row in 0..b {
                let at = (row * t + s) * f;
                d.extend_from_slice(&batch.data()[at..at + f]);
            }
            Tensor::from_vec(&[b, f], d).expect("step shape")
        })
        .collect()
}

impl ModelState {
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = spec.width;
        let body = if spec.family.is_hierarchical() {
            let shared = layer(spec, spec.inputs, w, ComponentTag::Shared, "shared", &mut rng);
            let (bl, bw) = (spec.branch_layers(), spec.branch_width());
            let branches = (0..spec.outputs)
                .map(|b| {
                    let tag = ComponentTag::Branch(b);
                    let prefix = format!("branch.{}", tag.name());
                    let layers: Vec<Layer> = (0..bl)
                        .map(|i| {
                            let fan_in = if i == 0 { w } else { bw };
                            layer(spec, fan_in, bw, tag, &format!("{prefix}.{i}"), &mut rng)
                        })
                        .collect();
                    let last = if bl == 0 { w } else { bw };
                    let mut readout = Dense::new(last, 1, Activation::Relu, tag, &format!("{prefix}.readout"), &mut rng);
                    set_bias(&mut readout, spec.readout_bias);
                    Branch { layers, readout }
                })
                .collect();
            Body::Hierarchical { shared, branches }
        } else {
            let tag = ComponentTag::Monolithic;
            let trunk = match spec.family.cell() {
                Some(_) => (0..spec.layers)
                    .map(|i| {
                        let fan_in = if i == 0 { spec.inputs } else { w };
                        layer(spec, fan_in, w, tag, &format!("trunk.{i}"), &mut rng)
                    })
                    .collect(),
                None => (0..=spec.layers)
                    .map(|i| {
                        let fan_in = if i == 0 { spec.inputs } else { w };
                        layer(spec, fan_in, w, tag, &format!("trunk.{i}"), &mut rng)
                    })
                    .collect(),
            };
            let mut readout = Dense::new(w, spec.outputs, Activation::Relu, tag, "readout", &mut rng);
            set_bias(&mut readout, spec.readout_bias);
            Body::Flat { trunk, readout }
        };
        Ok(Self {
            spec: spec.clone(),
            seed,
            scaler_hash: None,
            config_hash: None,
            body,
            frozen: BTreeSet::new(),
        })
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn params(&self) -> Vec<&Param> {
        match &self.body {
            Body::Flat { trunk, readout } => trunk
                .iter()
                .flat_map(|l| l.params())
                .chain(readout.params())
                .collect(),
            Body::Hierarchical { shared, branches } => shared
                .params()
                .into_iter()
                .chain(
                    branches
                        .iter()
                        .flat_map(|b| b.layers.iter().flat_map(|l| l.params()).chain(b.readout.params())),
                )
                .collect(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match &mut self.body {
            Body::Flat { trunk, readout } => trunk
                .iter_mut()
                .flat_map(|l| l.params_mut())
                .chain(readout.params_mut())
                .collect(),
            Body::Hierarchical { shared, branches } => shared
                .params_mut()
                .into_iter()
                .chain(branches.iter_mut().flat_map(|b| {
                    b.layers
                        .iter_mut()
                        .flat_map(|l| l.params_mut())
                        .chain(b.readout.params_mut())
                }))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Trainable groups in a fixed order: `monolithic`, or `shared` followed
    /// by one branch per pollutant.
    pub fn components(&self) -> Vec<ComponentTag> {
        if self.spec.family.is_hierarchical() {
            std::iter::once(ComponentTag::Shared)
                .chain((0..self.spec.outputs).map(ComponentTag::Branch))
                .collect()
        } else {
            vec![ComponentTag::Monolithic]
        }
    }

    pub fn component_names(&self) -> Vec<String> {
        self.components().iter().map(|c| c.name()).collect()
    }

    pub fn component_param_count(&self, tag: ComponentTag) -> usize {
        self.params()
            .iter()
            .filter(|p| p.tag == tag)
            .map(|p| p.numel())
            .sum()
    }

    pub fn resolve_component(&self, name: &str) -> Result<ComponentTag, ModelError> {
        self.components()
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| ModelError::UnknownGroup(name.to_string()))
    }

    pub fn set_frozen(&mut self, group: &str, frozen: bool) -> Result<(), ModelError> {
        let tag = self.resolve_component(group)?;
        self.set_frozen_tag(tag, frozen);
        Ok(())
    }

    pub fn set_frozen_tag(&mut self, tag: ComponentTag, frozen: bool) {
        if frozen {
            self.frozen.insert(tag);
        } else {
            self.frozen.remove(&tag);
        }
    }

    pub fn is_frozen(&self, tag: ComponentTag) -> bool {
        self.frozen.contains(&tag)
    }

    /// FNV-1a over the value bits of one component.
    pub fn component_digest(&self, tag: ComponentTag) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for p in self.params().iter().filter(|p| p.tag == tag) {
            for v in p.value.data() {
                for byte in v.to_bits().to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }

    fn check_input(&self, batch: &Tensor) -> Result<(usize, usize), ModelError> {
        let s = batch.shape();
        if s.len() != 3 || s[2] != self.spec.inputs || s[1] < self.spec.horizon || s[0] == 0 {
            return Err(NeuroError::ShapeMismatch(format!(
                "model expects [B, >= {}, {}], got {:?}",
                self.spec.horizon, self.spec.inputs, s
            ))
            .into());
        }
        let first = if self.spec.family.is_recurrent() {
            0
        } else {
            s[1] - self.spec.horizon
        };
        Ok((s[1], first))
    }

    fn assemble(&self, batch: usize, per_step: &[Tensor]) -> Result<Tensor, ModelError> {
        let (h, o) = (per_step.len(), self.spec.outputs);
        let mut out = Tensor::zeros(&[batch, h, o]);
        for (s, y) in per_step.iter().enumerate() {
            for b in 0..batch {
                let at = (b * h + s) * o;
                out.data_mut()[at..at + o].copy_from_slice(y.row(b));
            }
        }
        out.ensure_finite("model output")?;
        Ok(out)
    }

    /// Inference: `[B × input_len × inputs]` → `[B × horizon × outputs]`.
    /// Readouts are taken after each of the last `horizon` input steps.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor, ModelError> {
        let (_, first) = self.check_input(batch)?;
        let b = batch.shape()[0];
        let h = self.spec.horizon;
        let xs = steps_of(batch, first);
        let per_step = match &self.body {
            Body::Flat { trunk, readout } => {
                let mut seq = xs;
                for l in trunk {
                    seq = l.infer_sequence(&seq)?;
                }
                seq[seq.len() - h..]
                    .iter()
                    .map(|x| readout.forward(x).map(|(y, _)| y))
                    .collect::<Result<Vec<_>, _>>()?
            }
            Body::Hierarchical { shared, branches } => {
                let base = shared.infer_sequence(&xs)?;
                let mut cols: Vec<Vec<Tensor>> = Vec::with_capacity(branches.len());
                for br in branches {
                    let mut seq = base.clone();
                    for l in &br.layers {
                        seq = l.infer_sequence(&seq)?;
                    }
                    cols.push(
                        seq[seq.len() - h..]
                            .iter()
                            .map(|x| br.readout.forward(x).map(|(y, _)| y))
                            .collect::<Result<Vec<_>, _>>()?,
                    );
                }
                concat_columns(b, h, &cols)
            }
        };
        self.assemble(b, &per_step)
    }

    /// Forward pass that keeps what [`Self::backward`] needs.
    pub fn forward_train(&self, batch: &Tensor) -> Result<(Tensor, ModelCache), ModelError> {
        let (input_len, first) = self.check_input(batch)?;
        let b = batch.shape()[0];
        let h = self.spec.horizon;
        let xs = steps_of(batch, first);
        let steps = xs.len();
        let (per_step, body) = match &self.body {
            Body::Flat { trunk, readout } => {
                let mut seq = xs;
                let mut caches = Vec::with_capacity(trunk.len());
                for l in trunk {
                    let (y, c) = l.forward_sequence(&seq)?;
                    caches.push(c);
                    seq = y;
                }
                let mut outs = Vec::with_capacity(h);
                let mut rc = Vec::with_capacity(h);
                for x in &seq[steps - h..] {
                    let (y, c) = readout.forward(x)?;
                    outs.push(y);
                    rc.push(c);
                }
                (
                    outs,
                    BodyCache::Flat {
                        trunk: caches,
                        readout: rc,
                        steps,
                    },
                )
            }
            Body::Hierarchical { shared, branches } => {
                let (base, sc) = shared.forward_sequence(&xs)?;
                let mut cols = Vec::with_capacity(branches.len());
                let mut bcs = Vec::with_capacity(branches.len());
                for br in branches {
                    let mut seq = base.clone();
                    let mut caches = Vec::with_capacity(br.layers.len());
                    for l in &br.layers {
                        let (y, c) = l.forward_sequence(&seq)?;
                        caches.push(c);
                        seq = y;
                    }
                    let mut outs = Vec::with_capacity(h);
                    let mut rc = Vec::with_capacity(h);
                    for x in &seq[steps - h..] {
                        let (y, c) = br.readout.forward(x)?;
                        outs.push(y);
                        rc.push(c);
                    }
                    cols.push(outs);
                    bcs.push((caches, rc));
                }
                (
                    concat_columns(b, h, &cols),
                    BodyCache::Hierarchical {
                        shared: sc,
                        branches: bcs,
                        steps,
                    },
                )
            }
        };
        let out = self.assemble(b, &per_step)?;
        Ok((
            out,
            ModelCache {
                batch: b,
                input_len,
                first_step: first,
                body,
            },
        ))
    }

    /// Accumulates parameter gradients for upstream gradient `d_out`
    /// (`[B × horizon × outputs]`) and returns the input gradient. Frozen
    /// components still receive gradients; the optimiser skips them.
    pub fn backward(&mut self, cache: &ModelCache, d_out: &Tensor) -> Result<Tensor, ModelError> {
        self.backward_impl(cache, d_out, true)
    }

    /// Parameter gradients only. Frozen components accumulate nothing and
    /// the input gradient is not formed.
    pub fn backward_params(&mut self, cache: &ModelCache, d_out: &Tensor) -> Result<(), ModelError> {
        self.backward_impl(cache, d_out, false).map(|_| ())
    }

    fn backward_impl(&mut self, cache: &ModelCache, d_out: &Tensor, full: bool) -> Result<Tensor, ModelError> {
        let mode = |tag: ComponentTag, inputs: bool| Backprop {
            params: full || !self.frozen.contains(&tag),
            inputs: full || inputs,
        };
        let mono = mode(ComponentTag::Monolithic, true);
        let shared_mode = mode(ComponentTag::Shared, false);
        let branch_modes: Vec<(Backprop, Backprop)> = (0..self.spec.outputs)
            .map(|j| (mode(ComponentTag::Branch(j), true), mode(ComponentTag::Branch(j), shared_mode.params)))
            .collect();
        let (b, h, o) = (cache.batch, self.spec.horizon, self.spec.outputs);
        d_out.expect_shape(&[b, h, o], "output gradient")?;
        let column = |s: usize, range: std::ops::Range<usize>| {
            let w = range.len();
            let mut d = Vec::with_capacity(b * w);
            for row in 0..b {
                let at = (row * h + s) * o;
                d.extend_from_slice(&d_out.data()[at + range.start..at + range.end]);
            }
            Tensor::from_vec(&[b, w], d).expect("column shape")
        };
        let dxs = match (&mut self.body, &cache.body) {
            (
                Body::Flat { trunk, readout },
                BodyCache::Flat {
                    trunk: tc,
                    readout: rc,
                    steps,
                },
            ) => {
                let width = readout.inputs();
                let mut dseq = vec![Tensor::zeros(&[b, width]); *steps];
                for s in 0..h {
                    dseq[steps - h + s] = readout.backward_with(&rc[s], &column(s, 0..o), mono)?;
                }
                for (i, (l, c)) in trunk.iter_mut().zip(tc).enumerate().rev() {
                    let m = if i == 0 { Backprop { inputs: full, ..mono } } else { mono };
                    dseq = l.backward_sequence_with(c, &dseq, m)?;
                }
                dseq
            }
            (
                Body::Hierarchical { shared, branches },
                BodyCache::Hierarchical {
                    shared: sc,
                    branches: bcs,
                    steps,
                },
            ) => {
                let mut dbase = vec![Tensor::zeros(&[b, shared.outputs()]); *steps];
                let need_base = full || shared_mode.params;
                for (j, (br, (lcs, rcs))) in branches.iter_mut().zip(bcs).enumerate() {
                    let (inner, bottom) = branch_modes[j];
                    let width = br.readout.inputs();
                    let mut dseq = vec![Tensor::zeros(&[b, width]); *steps];
                    let last = if br.layers.is_empty() { bottom } else { inner };
                    for s in 0..h {
                        dseq[steps - h + s] = br.readout.backward_with(&rcs[s], &column(s, j..j + 1), last)?;
                    }
                    for (i, (l, c)) in br.layers.iter_mut().zip(lcs).enumerate().rev() {
                        dseq = l.backward_sequence_with(c, &dseq, if i == 0 { bottom } else { inner })?;
                    }
                    if need_base {
                        for (acc, d) in dbase.iter_mut().zip(&dseq) {
                            acc.add_assign(d);
                        }
                    }
                }
                if need_base {
                    shared.backward_sequence_with(sc, &dbase, shared_mode)?
                } else {
                    dbase.iter().map(|_| Tensor::zeros(&[b, self.spec.inputs])).collect()
                }
            }
            _ => return Err(NeuroError::ShapeMismatch("cache does not match model".into()).into()),
        };
        let f = self.spec.inputs;
        let t = cache.input_len;
        let mut dx = Tensor::zeros(&[b, t, f]);
        for (s, d) in dxs.iter().enumerate() {
            let step = cache.first_step + s;
            for row in 0..b {
                let at = (row * t + step) * f;
                dx.data_mut()[at..at + f].copy_from_slice(d.row(row));
            }
        }
        Ok(dx)
    }

    /// Human-readable layer summary.
    pub fn describe(&self) -> String {
        let mut out = format!("{} ({} parameters)\n", self.spec.family, self.param_count());
        for tag in self.components() {
            out.push_str(&format!("  {:<10} {:>8}\n", tag.name(), self.component_param_count(tag)));
        }
        out
    }
}

fn concat_columns(batch: usize, horizon: usize, cols: &[Vec<Tensor>]) -> Vec<Tensor> {
    (0..horizon)
        .map(|s| {
            let mut d = Vec::with_capacity(batch * cols.len());
            for row in 0..batch {
                for c in cols {
                    d.push(c[s].row(row)[0]);
                }
            }
            Tensor::from_vec(&[batch, cols.len()], d).expect("concat shape")
        })
        .collect()
}

/// Output column names in order.
pub fn output_names(outputs: usize) -> Vec<String> {
    (0..outputs)
        .map(|i| POLLUTANTS.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("y{i}")))
        .collect()
}
