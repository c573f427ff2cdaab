use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NeuroError, Tensor};
use crate::ingest::POLLUTANTS;

/// Which trainable component a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentTag {
    Monolithic,
    Shared,
    /// Branch for the pollutant at this output index.
    Branch(usize),
}

impl ComponentTag {
    pub fn name(&self) -> String {
        match self {
            Self::Monolithic => "monolithic".into(),
            Self::Shared => "shared".into(),
            Self::Branch(i) => POLLUTANTS.get(*i).map(|s| s.to_string()).unwrap_or_else(|| format!("branch{i}")),
        }
    }
}

impl fmt::Display for ComponentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ComponentTag {
    type Err = NeuroError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "monolithic" => Ok(Self::Monolithic),
            "shared" => Ok(Self::Shared),
            other => POLLUTANTS
                .iter()
                .position(|p| *p == other)
                .map(Self::Branch)
                .or_else(|| other.strip_prefix("branch").and_then(|i| i.parse().ok()).map(Self::Branch))
                .ok_or_else(|| NeuroError::UnknownComponent(other.to_string())),
        }
    }
}

/// A trainable tensor with its gradient and Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub tag: ComponentTag,
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, tag: ComponentTag, value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            tag,
            grad: zeros.clone(),
            adam_m: zeros.clone(),
            adam_v: zeros,
            value,
        }
    }

    /// Values drawn from `uniform(-bound, bound)`.
    pub fn uniform<R: Rng + ?Sized>(
        name: impl Into<String>,
        tag: ComponentTag,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        Self::new(name, tag, Tensor::from_vec(shape, data).expect("shape product"))
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Uniform bound used by the default initialiser for a given fan-in.
pub fn init_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_parse_back() {
        for tag in [
            ComponentTag::Monolithic,
            ComponentTag::Shared,
            ComponentTag::Branch(0),
            ComponentTag::Branch(3),
        ] {
            assert_eq!(tag.name().parse::<ComponentTag>().unwrap(), tag);
        }
        assert!("bogus".parse::<ComponentTag>().is_err());
    }

    #[test]
    fn unit_fan_in_bound() {
        assert_eq!(init_bound(1), 1.0);
        assert_eq!(init_bound(64), 0.125);
    }
}
