//! Dense row-major tensor values.
//!
//! A [`Tensor`] is a plain value: shape plus a flat `f64` buffer. Tensors do
//! not track gradients themselves; differentiation happens on a [`Tape`]
//! (see the `tape` module), which stores tensor values per node.
//!
//! [`Tape`]: super::tape::Tape

use super::NumericsError;

/// Dense tensor with row-major storage, 64-bit floats throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and flat row-major values.
    pub fn from_vec(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, NumericsError> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(NumericsError::BadShape {
                what: format!("zero-sized dimension in {shape:?}"),
            });
        }
        if numel != values.len() {
            return Err(NumericsError::BadShape {
                what: format!("shape {shape:?} needs {numel} values, got {}", values.len()),
            });
        }
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, values: vec![0.0; numel] }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, values: vec![value; numel] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], values: vec![value] }
    }

    /// Identity matrix of side `n`.
    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            t.values[i * n + i] = 1.0;
        }
        t
    }

    /// 2-D constructor from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let m = rows.len();
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n) {
            return Err(NumericsError::BadShape { what: "ragged rows".into() });
        }
        Tensor::from_vec(vec![m, n], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1
    }

    /// Rows of a 2-D tensor (or the whole buffer if 1-D).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    /// Element access for 2-D tensors.
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let c = self.cols();
        self.values[row * c + col] = value;
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self, NumericsError> {
        let numel: usize = shape.iter().product();
        if numel != self.values.len() {
            return Err(NumericsError::BadShape {
                what: format!("reshape {:?} -> {shape:?}", self.shape),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn transposed_2d(&self) -> Result<Self, NumericsError> {
        if self.shape.len() != 2 {
            return Err(NumericsError::BadShape {
                what: format!("transpose needs a 2-D tensor, got {:?}", self.shape),
            });
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.values[i * n + j];
            }
        }
        Ok(Tensor { shape: vec![n, m], values: out })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn has_non_finite(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }
}

/// Raw row-major matrix product: `a` is m×k, `b` is k×n.
///
/// Loop order is i-k-j so the inner loop walks both `b` and `c` rows
/// contiguously.
pub fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += aip * brow[j];
            }
        }
    }
    c
}
