//! Dense row-major matrices, activation functions and their derivatives, and
//! the central-difference gradient oracle the test suites check analytic
//! gradients against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 2-D array of f64, flat row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dimension("ragged row lengths".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// y = self · x for a column vector x.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matrix-vector: {}x{} times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dot product with four accumulators; fixed association, so results are
/// reproducible run to run.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Standard matrix product.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "matmul: {}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    let bc = b.cols;
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * bc..(i + 1) * bc];
        for (k, &aik) in arow.iter().enumerate() {
            let brow = &b.data[k * bc..(k + 1) * bc];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Activation functions available to the model layers. Softmax is only legal
/// on an output layer and is applied row-wise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    #[serde(rename = "relu")]
    ReLU,
    Softmax,
    Linear,
}

/// Numerically stable logistic function, branched on the sign of `z`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Applies `kind` elementwise, or row-wise with max-subtraction for softmax.
pub fn apply_activation(kind: ActivationKind, m: &Matrix) -> Matrix {
    match kind {
        ActivationKind::Sigmoid => m.map(sigmoid),
        ActivationKind::Tanh => m.map(f64::tanh),
        ActivationKind::ReLU => m.map(|x| if x > 0.0 { x } else { 0.0 }),
        ActivationKind::Linear => m.clone(),
        ActivationKind::Softmax => {
            let mut out = m.clone();
            for r in 0..out.rows() {
                softmax_in_place(out.row_mut(r));
            }
            out
        }
    }
}

/// Row softmax with max shift; the unshifted form overflows for large inputs.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// Elementwise derivative evaluated at the pre-activation values. The softmax
/// derivative is fused with cross-entropy in the training module and is
/// rejected here.
pub fn activation_derivative(kind: ActivationKind, pre_activation: &Matrix) -> Result<Matrix> {
    match kind {
        ActivationKind::Sigmoid => Ok(pre_activation.map(|z| {
            let s = sigmoid(z);
            s * (1.0 - s)
        })),
        ActivationKind::Tanh => Ok(pre_activation.map(|z| {
            let t = z.tanh();
            1.0 - t * t
        })),
        ActivationKind::ReLU => Ok(pre_activation.map(|z| if z > 0.0 { 1.0 } else { 0.0 })),
        ActivationKind::Linear => Ok(pre_activation.map(|_| 1.0)),
        ActivationKind::Softmax => Err(Error::Unsupported(
            "softmax derivative is fused with cross-entropy in the training module".into(),
        )),
    }
}

/// Weighted sum of Eq-1 form: Σ wᵢxᵢ + b, accumulated strictly left to right.
pub fn weighted_sum(weights: &[f64], inputs: &[f64], bias: f64) -> Result<f64> {
    if weights.is_empty() || weights.len() != inputs.len() {
        return Err(Error::Dimension(format!(
            "weighted_sum: {} weights vs {} inputs",
            weights.len(),
            inputs.len()
        )));
    }
    let mut acc = 0.0;
    for (w, x) in weights.iter().zip(inputs) {
        acc += w * x;
    }
    Ok(acc + bias)
}

/// Central-difference gradient of a scalar function: the oracle every
/// analytic backward pass is checked against.
pub fn finite_difference_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    at: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    if eps <= 0.0 {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let mut point = at.to_vec();
    let mut grad = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        let orig = point[i];
        point[i] = orig + eps;
        let up = f(&point);
        point[i] = orig - eps;
        let down = f(&point);
        point[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "function evaluation near coordinate {i}"
            )));
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}
