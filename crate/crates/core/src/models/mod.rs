//! Forecasting architectures and their on-disk container.

mod container;
mod model;
mod spec;

pub use container::{load_model, read_model, save_model, write_model, CONTAINER_VERSION, MAGIC};
pub use model::{output_names, ModelCache, ModelState};
pub use spec::{Family, ModelSpec};

use thiserror::Error;

use crate::neuro::NeuroError;
use crate::pipeline::WindowPair;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("unknown parameter group `{0}`")]
    UnknownGroup(String),
    #[error("model file version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Neuro(#[from] NeuroError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Stacks window pairs into `[B × l_in × F]` inputs and `[B × h × outputs]`
/// targets.
pub fn batch_of(pairs: &[&WindowPair]) -> Result<(crate::neuro::Tensor, crate::neuro::Tensor), ModelError> {
    use crate::neuro::Tensor;
    let first = pairs
        .first()
        .ok_or_else(|| ModelError::InvalidSpec("empty batch".into()))?;
    let (f, o) = (first.n_inputs, first.n_targets);
    let l = first.input.len() / f;
    let h = first.target.len() / o;
    let mut x = Vec::with_capacity(pairs.len() * l * f);
    let mut y = Vec::with_capacity(pairs.len() * h * o);
    for p in pairs {
        if p.n_inputs != f || p.n_targets != o || p.input.len() != l * f || p.target.len() != h * o {
            return Err(NeuroError::ShapeMismatch("ragged batch".into()).into());
        }
        x.extend_from_slice(&p.input);
        y.extend_from_slice(&p.target);
    }
    Ok((
        Tensor::from_vec(&[pairs.len(), l, f], x)?,
        Tensor::from_vec(&[pairs.len(), h, o], y)?,
    ))
}
