use serde::{Deserialize, Serialize};

use super::NeuroError;

/// Dense row-major `f64` buffer with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NeuroError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NeuroError::ShapeMismatch(format!(
                "buffer of {} values for shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a 2-D tensor (1 for vectors).
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<(), NeuroError> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(NeuroError::NonFinite(what))
        }
    }

    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<(), NeuroError> {
        if self.shape != shape {
            return Err(NeuroError::ShapeMismatch(format!(
                "{what}: expected {:?}, got {:?}",
                shape, self.shape
            )));
        }
        Ok(())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// `x · wᵀ + b` for `x: [n × in]`, `w: [out × in]`, `b: [out]`.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (n, k) = (x.rows(), x.cols());
    let m = w.rows();
    debug_assert_eq!(w.cols(), k);
    let mut y = Tensor::zeros(&[n, m]);
    for i in 0..n {
        let xi = x.row(i);
        let yi = &mut y.data[i * m..(i + 1) * m];
        for (j, out) in yi.iter_mut().enumerate() {
            let wj = &w.data[j * k..(j + 1) * k];
            *out = b.data[j] + dot(xi, wj);
        }
    }
    y
}

/// Dot product with four independent accumulators.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `dw += dyᵀ · x` and `db += Σ_rows dy`.
pub fn accumulate_affine_grads(x: &Tensor, dy: &Tensor, dw: &mut Tensor, db: &mut Tensor) {
    let (n, k) = (x.rows(), x.cols());
    let m = dy.cols();
    for i in 0..n {
        let xi = x.row(i);
        let dyi = dy.row(i);
        for j in 0..m {
            let g = dyi[j];
            if g == 0.0 {
                continue;
            }
            db.data[j] += g;
            let dwj = &mut dw.data[j * k..(j + 1) * k];
            for (d, a) in dwj.iter_mut().zip(xi) {
                *d += g * a;
            }
        }
    }
}

/// `dy · w` for `dy: [n × out]`, `w: [out × in]`.
pub fn backprop_input(dy: &Tensor, w: &Tensor) -> Tensor {
    let (n, m) = (dy.rows(), dy.cols());
    let k = w.cols();
    let mut dx = Tensor::zeros(&[n, k]);
    for i in 0..n {
        let dyi = dy.row(i);
        let dxi = &mut dx.data[i * k..(i + 1) * k];
        for j in 0..m {
            let g = dyi[j];
            if g == 0.0 {
                continue;
            }
            let wj = &w.data[j * k..(j + 1) * k];
            for (d, c) in dxi.iter_mut().zip(wj) {
                *d += g * c;
            }
        }
    }
    dx
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
