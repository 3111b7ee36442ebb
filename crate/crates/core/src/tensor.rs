//! Dense row-major matrices and vectors of `f64`.
//!
//! This is the only tensor abstraction in the crate. There are no strides,
//! views or broadcasting; the optimizers only need whole-array passes plus
//! row and column reductions.
//!
//! All reductions accumulate sequentially from left to right, so results are
//! bit-reproducible across runs and platforms with IEEE-754 doubles.
//!
//! Binary elementwise kernels panic on shape mismatch. A mismatch there is a
//! programming error; user-facing entry points (optimizer steps, problem
//! evaluation) validate shapes before calling into this module.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("tensor dimensions must be positive, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("data length {len} does not match shape {rows}x{cols}")]
    LengthMismatch { rows: usize, cols: usize, len: usize },
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },
}

fn check_finite(data: &[f64]) -> Result<(), TensorError> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(TensorError::NonFinite {
            index,
            value: data[index],
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting empty shapes, length
    /// mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if rows == 0 || cols == 0 {
            return Err(TensorError::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(TensorError::LengthMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != m) {
            return Err(TensorError::LengthMismatch {
                rows: n,
                cols: m,
                len: data.len(),
            });
        }
        Self::new(n, m, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix {rows}x{cols}");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix {rows}x{cols}");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Outer product `a bᵀ`.
    pub fn outer(a: &DenseVector, b: &DenseVector) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row_sums(&self) -> DenseVector {
        row_sums(self)
    }

    pub fn col_sums(&self) -> DenseVector {
        col_sums(self)
    }

    pub fn sum(&self) -> f64 {
        sum(&self.data)
    }

    pub fn rms(&self) -> f64 {
        rms(&self.data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self, TensorError> {
        if data.is_empty() {
            return Err(TensorError::EmptyShape { rows: 0, cols: 1 });
        }
        check_finite(&data)?;
        Ok(Self { data })
    }

    /// # Panics
    /// If `len` is zero.
    pub fn zeros(len: usize) -> Self {
        Self::filled(len, 0.0)
    }

    /// # Panics
    /// If `len` is zero.
    pub fn filled(len: usize, value: f64) -> Self {
        assert!(len > 0, "empty vector");
        Self {
            data: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sum(&self) -> f64 {
        sum(&self.data)
    }

    pub fn rms(&self) -> f64 {
        rms(&self.data)
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// `result[i] = Σ_j a[i][j]`, accumulated left to right.
pub fn row_sums(a: &DenseMatrix) -> DenseVector {
    let data = (0..a.rows).map(|i| sum(a.row(i))).collect();
    DenseVector { data }
}

/// `result[j] = Σ_i a[i][j]`, accumulated top to bottom.
pub fn col_sums(a: &DenseMatrix) -> DenseVector {
    let mut data = vec![0.0; a.cols];
    for i in 0..a.rows {
        for (acc, &x) in data.iter_mut().zip(a.row(i)) {
            *acc += x;
        }
    }
    DenseVector { data }
}

pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |acc, &x| acc + x)
}

pub fn sum_of_squares(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |acc, &x| acc + x * x)
}

/// Root-mean-square of the entries.
///
/// # Panics
/// On an empty slice; the tensor types cannot be empty.
pub fn rms(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "rms of an empty tensor");
    (sum_of_squares(xs) / xs.len() as f64).sqrt()
}

fn assert_same_len(a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len(), "shape mismatch: {} vs {}", a.len(), b.len());
}

pub fn square(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| x * x).collect()
}

pub fn sqrt(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| x.sqrt()).collect()
}

pub fn divide(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_same_len(a, b);
    a.iter().zip(b).map(|(x, y)| x / y).collect()
}

pub fn scale_in_place(xs: &mut [f64], factor: f64) {
    xs.iter_mut().for_each(|x| *x *= factor);
}

/// `y ← y + a·x`
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    assert_same_len(y, x);
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Exponential moving average of a single value: `β·acc + (1−β)·x`.
#[inline]
pub fn ema(acc: f64, x: f64, beta: f64) -> f64 {
    beta * acc + (1.0 - beta) * x
}

/// In-place EMA of a whole accumulator.
pub fn ema_in_place(acc: &mut [f64], x: &[f64], beta: f64) {
    assert_same_len(acc, x);
    for (a, &xi) in acc.iter_mut().zip(x) {
        *a = ema(*a, xi, beta);
    }
}
