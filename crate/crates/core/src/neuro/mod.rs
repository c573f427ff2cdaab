//! Minimal numerical core: tensors, parameters, and dense / LSTM / GRU
//! layers with hand-written backward passes.

mod dense;
mod param;
mod recurrent;
mod tensor;

pub use dense::{Activation, Dense, DenseCache};
pub use param::{init_bound, ComponentTag, Param};
pub use recurrent::{CellKind, RecurrentCell, RnnState, SequenceCache};
pub use tensor::{accumulate_affine_grads, affine, backprop_input, sigmoid, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuroError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
}

/// Which gradients a backward pass produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backprop {
    pub params: bool,
    pub inputs: bool,
}

impl Backprop {
    pub const FULL: Backprop = Backprop {
        params: true,
        inputs: true,
    };
}

/// A layer applied along a sequence of `[B × d]` step tensors. Dense
/// layers act on every step independently with shared weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Recurrent(RecurrentCell),
}

#[derive(Debug, Clone)]
pub enum LayerCache {
    Dense(Vec<DenseCache>),
    Recurrent(SequenceCache),
}

impl Layer {
    pub fn outputs(&self) -> usize {
        match self {
            Self::Dense(d) => d.outputs(),
            Self::Recurrent(c) => c.hidden(),
        }
    }

    pub fn forward_sequence(&self, xs: &[Tensor]) -> Result<(Vec<Tensor>, LayerCache), NeuroError> {
        match self {
            Self::Dense(d) => {
                let mut ys = Vec::with_capacity(xs.len());
                let mut caches = Vec::with_capacity(xs.len());
                for x in xs {
                    let (y, c) = d.forward(x)?;
                    ys.push(y);
                    caches.push(c);
                }
                Ok((ys, LayerCache::Dense(caches)))
            }
            Self::Recurrent(c) => {
                let (ys, cache) = c.forward_sequence(xs)?;
                Ok((ys, LayerCache::Recurrent(cache)))
            }
        }
    }

    /// Inference-only pass without caches.
    pub fn infer_sequence(&self, xs: &[Tensor]) -> Result<Vec<Tensor>, NeuroError> {
        match self {
            Self::Dense(d) => xs.iter().map(|x| d.forward(x).map(|(y, _)| y)).collect(),
            Self::Recurrent(c) => {
                let first = xs
                    .first()
                    .ok_or_else(|| NeuroError::ShapeMismatch("empty sequence".into()))?;
                let mut state = c.zero_state(first.rows());
                let mut ys = Vec::with_capacity(xs.len());
                for x in xs {
                    let (h, next) = c.step(x, &state)?;
                    ys.push(h);
                    state = next;
                }
                Ok(ys)
            }
        }
    }

    pub fn backward_sequence(&mut self, cache: &LayerCache, dys: &[Tensor]) -> Result<Vec<Tensor>, NeuroError> {
        self.backward_sequence_with(cache, dys, Backprop::FULL)
    }

    pub fn backward_sequence_with(
        &mut self,
        cache: &LayerCache,
        dys: &[Tensor],
        mode: Backprop,
    ) -> Result<Vec<Tensor>, NeuroError> {
        match (self, cache) {
            (Self::Dense(d), LayerCache::Dense(caches)) => caches
                .iter()
                .zip(dys)
                .map(|(c, dy)| d.backward_with(c, dy, mode))
                .collect(),
            (Self::Recurrent(c), LayerCache::Recurrent(cache)) => c.backward_sequence_with(cache, dys, mode),
            _ => Err(NeuroError::ShapeMismatch("cache does not belong to this layer".into())),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Self::Dense(d) => d.params().to_vec(),
            Self::Recurrent(c) => c.params().to_vec(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Self::Dense(d) => d.params_mut().into_iter().collect(),
            Self::Recurrent(c) => c.params_mut().into_iter().collect(),
        }
    }
}
