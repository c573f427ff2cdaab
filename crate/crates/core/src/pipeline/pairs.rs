//! Source→target window pairs.
//!
//! Within a chunk, a pair starting at row `n` reads `input_len` source rows
//! `[n, n + input_len)` and `horizon` target rows `[n + offset, n + offset +
//! horizon)` with `offset = input_len - horizon + 1`. The readout taken after
//! source hour `t` is trained against target hour `t + 1`, so the last target
//! row lies one hour beyond the last input row.

use serde::{Deserialize, Serialize};

use super::{Chunk, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGeometry {
    pub input_len: usize,
    pub horizon: usize,
    pub stride: usize,
}

impl Default for WindowGeometry {
    fn default() -> Self {
        Self {
            input_len: 72,
            horizon: 24,
            stride: 24,
        }
    }
}

impl WindowGeometry {
    /// Offset from a pair's first input row to its first target row.
    pub fn target_offset(&self) -> usize {
        self.input_len - self.horizon + 1
    }

    /// Rows a chunk must contain for one pair.
    pub fn span(&self) -> usize {
        self.target_offset() + self.horizon
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.horizon == 0 || self.input_len < self.horizon || self.stride == 0 {
            return Err(PipelineError::InvalidGeometry(*self));
        }
        Ok(())
    }

    /// Valid pair starts inside a chunk of `len` rows.
    pub fn starts(&self, len: usize) -> impl Iterator<Item = usize> {
        let last = len.checked_sub(self.span());
        let stride = self.stride;
        (0..).map(move |i| i * stride).take_while(move |&n| matches!(last, Some(l) if n <= l))
    }
}

/// Boundary-free pair count `floor((N + 1) / stride)` for a series indexed
/// `0..=N`. Reference only; pair generation counts valid starts per chunk.
pub fn reference_pair_count(last_index: usize, stride: usize) -> usize {
    (last_index + 1) / stride
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPair {
    /// Row-major `[input_len × n_inputs]`, scaled.
    pub input: Vec<f64>,
    /// Row-major `[horizon × n_targets]`, scaled.
    pub target: Vec<f64>,
    pub n_inputs: usize,
    pub n_targets: usize,
    /// First input row within its chunk.
    pub start: usize,
    pub chunk_id: usize,
    /// First input row within the full station tables.
    pub abs_start: usize,
}

impl WindowPair {
    pub fn input_len(&self) -> usize {
        self.input.len() / self.n_inputs
    }

    pub fn horizon(&self) -> usize {
        self.target.len() / self.n_targets
    }

    pub fn input_row(&self, t: usize) -> &[f64] {
        &self.input[t * self.n_inputs..(t + 1) * self.n_inputs]
    }

    pub fn target_row(&self, s: usize) -> &[f64] {
        &self.target[s * self.n_targets..(s + 1) * self.n_targets]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSetStats {
    pub pairs: usize,
    pub hrs_total: usize,
    pub n_total: usize,
    pub n_u: usize,
    pub n_y: usize,
}

impl PairSetStats {
    pub fn compute(pairs: usize, input_len: usize, horizon: usize, n_inputs: usize, n_targets: usize) -> Self {
        let n_u = pairs * input_len * n_inputs;
        let n_y = pairs * horizon * n_targets;
        Self {
            pairs,
            hrs_total: pairs * input_len,
            n_total: n_u + n_y,
            n_u,
            n_y,
        }
    }
}

/// Slices every chunk into window pairs. All source columns are inputs and
/// all target columns are targets, in table order. Chunks too short for a
/// single window contribute nothing.
pub fn generate_pairs(
    chunks: &[Chunk],
    geometry: WindowGeometry,
) -> Result<(Vec<WindowPair>, PairSetStats), PipelineError> {
    geometry.validate()?;
    let mut pairs = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for chunk in chunks {
        if chunk.source.len() != chunk.target.len() {
            return Err(PipelineError::LayoutMismatch(format!(
                "chunk {} has {} source rows and {} target rows",
                chunk.id,
                chunk.source.len(),
                chunk.target.len()
            )));
        }
        let n_in = chunk.source.columns.len();
        let n_out = chunk.target.columns.len();
        match dims {
            None => dims = Some((n_in, n_out)),
            Some(d) if d != (n_in, n_out) => {
                return Err(PipelineError::LayoutMismatch(format!(
                    "chunk {} has {n_in} inputs / {n_out} targets, expected {} / {}",
                    chunk.id, d.0, d.1
                )))
            }
            _ => {}
        }
        let offset = geometry.target_offset();
        for n in geometry.starts(chunk.len()) {
            let mut input = Vec::with_capacity(geometry.input_len * n_in);
            for t in n..n + geometry.input_len {
                input.extend(chunk.source.columns.iter().map(|c| c.values[t]));
            }
            let mut target = Vec::with_capacity(geometry.horizon * n_out);
            for t in n + offset..n + offset + geometry.horizon {
                target.extend(chunk.target.columns.iter().map(|c| c.values[t]));
            }
            pairs.push(WindowPair {
                input,
                target,
                n_inputs: n_in,
                n_targets: n_out,
                start: n,
                chunk_id: chunk.id,
                abs_start: chunk.offset + n,
            });
        }
    }
    let (n_in, n_out) = dims.unwrap_or((0, 0));
    let stats = PairSetStats::compute(pairs.len(), geometry.input_len, geometry.horizon, n_in, n_out);
    Ok((pairs, stats))
}
