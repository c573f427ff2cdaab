use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::neuro::CellKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE", try_from = "String")]
pub enum Family {
    Mlp,
    Hmlp,
    Lstm,
    Hlstm,
    Gru,
    Hgru,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Mlp,
        Family::Hmlp,
        Family::Lstm,
        Family::Hlstm,
        Family::Gru,
        Family::Hgru,
    ];

    pub fn is_hierarchical(&self) -> bool {
        matches!(self, Self::Hmlp | Self::Hlstm | Self::Hgru)
    }

    pub fn cell(&self) -> Option<CellKind> {
        match self {
            Self::Lstm | Self::Hlstm => Some(CellKind::Lstm),
            Self::Gru | Self::Hgru => Some(CellKind::Gru),
            Self::Mlp | Self::Hmlp => None,
        }
    }

    pub fn is_recurrent(&self) -> bool {
        self.cell().is_some()
    }

    /// The non-hierarchical family with the same layer type.
    pub fn flat(&self) -> Family {
        match self {
            Self::Hmlp => Self::Mlp,
            Self::Hlstm => Self::Lstm,
            Self::Hgru => Self::Gru,
            other => *other,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mlp => "MLP",
            Self::Hmlp => "HMLP",
            Self::Lstm => "LSTM",
            Self::Hlstm => "HLSTM",
            Self::Gru => "GRU",
            Self::Hgru => "HGRU",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::InvalidSpec(format!("unknown model family `{s}`")))
    }
}

impl TryFrom<String> for Family {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Architecture description.
///
/// Fully connected families: an input layer (`inputs → width`), `layers`
/// hidden layers of `width` units, and a readout (`width → outputs`). For
/// recurrent families the stack is `layers` cells, the first reading the
/// inputs. Hierarchical families have one shared layer (`inputs → width`)
/// followed by one branch per output, each a stack of `branch_layers`
/// layers of `branch_width` units ending in a scalar readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub layers: usize,
    pub width: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Defaults to `layers - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_layers: Option<usize>,
    /// Defaults to `width`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_width: Option<usize>,
    pub input_len: usize,
    pub horizon: usize,
    /// Constant initial bias of the readout units. `None` keeps the default
    /// uniform draw, under which a ReLU readout can start inactive on every
    /// input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_bias: Option<f64>,
}

impl ModelSpec {
    pub fn new(family: Family, layers: usize, width: usize) -> Self {
        Self {
            family,
            layers,
            width,
            inputs: 10,
            outputs: 4,
            branch_layers: None,
            branch_width: None,
            input_len: 72,
            horizon: 24,
            readout_bias: None,
        }
    }

    /// Depth and width selected by the reference grid search.
    pub fn reference(family: Family) -> Self {
        let (k, width) = match family {
            Family::Mlp => (4, 64),
            Family::Hmlp => (7, 64),
            Family::Lstm => (6, 112),
            Family::Hlstm => (7, 48),
            Family::Gru => (4, 128),
            Family::Hgru => (4, 64),
        };
        Self::new(family, k, width)
    }

    pub fn branch_layers(&self) -> usize {
        self.branch_layers.unwrap_or(self.layers.saturating_sub(1))
    }

    pub fn branch_width(&self) -> usize {
        self.branch_width.unwrap_or(self.width)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidSpec(m.to_string()));
        if self.layers == 0 {
            return bad("at least one hidden layer is required");
        }
        if self.width == 0 || self.inputs == 0 || self.outputs == 0 {
            return bad("layer dimensions must be positive");
        }
        if self.horizon == 0 || self.input_len < self.horizon {
            return bad("input_len must be at least horizon, horizon positive");
        }
        if self.readout_bias.is_some_and(|b| !b.is_finite()) {
            return bad("readout bias must be finite");
        }
        if self.family.is_hierarchical() {
            if self.outputs != 4 {
                return bad("hierarchical models have exactly four branches");
            }
            if self.branch_width() == 0 {
                return bad("branch width must be positive");
            }
        }
        Ok(())
    }

    /// Parameter count from the layer arithmetic alone.
    pub fn closed_form_param_count(&self) -> usize {
        let dense = |i: usize, o: usize| i * o + o;
        let cell = |gates: usize, i: usize, h: usize| gates * (i * h + h * h + 2 * h);
        let (w, k) = (self.width, self.layers);
        match (self.family.is_hierarchical(), self.family.cell()) {
            (false, None) => dense(self.inputs, w) + k * dense(w, w) + dense(w, self.outputs),
            (false, Some(kind)) => {
                let g = kind.gates();
                cell(g, self.inputs, w) + (k - 1) * cell(g, w, w) + dense(w, self.outputs)
            }
            (true, kind) => {
                let (bl, bw) = (self.branch_layers(), self.branch_width());
                let layer = |i: usize, o: usize| match kind {
                    None => dense(i, o),
                    Some(c) => cell(c.gates(), i, o),
                };
                let stack = if bl == 0 {
                    0
                } else {
                    layer(w, bw) + (bl - 1) * layer(bw, bw)
                };
                let last = if bl == 0 { w } else { bw };
                layer(self.inputs, w) + self.outputs * (stack + dense(last, 1))
            }
        }
    }
}
