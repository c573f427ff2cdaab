use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{accumulate_affine_grads, affine, backprop_input};
use super::{init_bound, Backprop, ComponentTag, NeuroError, Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

/// Fully connected layer `y = act(x · wᵀ + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    pub activation: Activation,
}

/// Forward values needed by [`Dense::backward`].
#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    output: Tensor,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        tag: ComponentTag,
        name: &str,
        rng: &mut R,
    ) -> Self {
        let b = init_bound(inputs);
        Self {
            weight: Param::uniform(format!("{name}.weight"), tag, &[outputs, inputs], b, rng),
            bias: Param::uniform(format!("{name}.bias"), tag, &[outputs], b, rng),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DenseCache), NeuroError> {
        if x.shape().len() != 2 || x.cols() != self.inputs() {
            return Err(NeuroError::ShapeMismatch(format!(
                "dense expects [_, {}], got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        let mut y = affine(x, &self.weight.value, &self.bias.value);
        if self.activation == Activation::Relu {
            y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok((
            y.clone(),
            DenseCache {
                input: x.clone(),
                output: y,
            },
        ))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &DenseCache, dy: &Tensor) -> Result<Tensor, NeuroError> {
        self.backward_with(cache, dy, Backprop::FULL)
    }

    pub fn backward_with(&mut self, cache: &DenseCache, dy: &Tensor, mode: Backprop) -> Result<Tensor, NeuroError> {
        dy.expect_shape(cache.output.shape(), "dense upstream gradient")?;
        let mut dpre = dy.clone();
        if self.activation == Activation::Relu {
            for (g, y) in dpre.data_mut().iter_mut().zip(cache.output.data()) {
                if *y <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        if mode.params {
            accumulate_affine_grads(&cache.input, &dpre, &mut self.weight.grad, &mut self.bias.grad);
        }
        if mode.inputs {
            Ok(backprop_input(&dpre, &self.weight.value))
        } else {
            Ok(Tensor::zeros(cache.input.shape()))
        }
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}
