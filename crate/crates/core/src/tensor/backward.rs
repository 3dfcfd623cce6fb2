//! Reverse-mode rules, one per differentiable operation.
//!
//! Each function takes the forward inputs (or outputs, where cheaper) together
//! with the upstream gradient `d_out` and returns the gradient with respect to
//! each input. Shapes are assumed to have been validated by the forward pass.

use super::Matrix;
use crate::error::Result;

/// `C = A·B`: `dA = dC·Bᵀ`, `dB = Aᵀ·dC`.
pub fn matmul(a: &Matrix, b: &Matrix, d_out: &Matrix) -> Result<(Matrix, Matrix)> {
    Ok((d_out.matmul_t(b)?, a.t_matmul(d_out)?))
}

pub fn matmul_lhs(b: &Matrix, d_out: &Matrix) -> Result<Matrix> {
    d_out.matmul_t(b)
}

pub fn matmul_rhs(a: &Matrix, d_out: &Matrix) -> Result<Matrix> {
    a.t_matmul(d_out)
}

/// Row softmax in terms of its output `y`: `dx = y ∘ (dy − rowsum(dy ∘ y))`.
pub fn softmax_rows(y: &Matrix, d_out: &Matrix) -> Matrix {
    let cols = y.cols();
    let mut dx = Matrix::zeros(y.rows(), cols);
    for r in 0..y.rows() {
        let yr = y.row_slice(r);
        let dr = d_out.row_slice(r);
        let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
        for c in 0..cols {
            dx.set(r, c, yr[c] * (dr[c] - dot));
        }
    }
    dx
}

/// In terms of the output `y = tanh(x)`.
pub fn tanh(y: &Matrix, d_out: &Matrix) -> Result<Matrix> {
    d_out.hadamard(&y.map(|v| 1.0 - v * v))
}

/// In terms of the output `y = σ(x)`.
pub fn sigmoid(y: &Matrix, d_out: &Matrix) -> Result<Matrix> {
    d_out.hadamard(&y.map(|v| v * (1.0 - v)))
}

pub fn hadamard(a: &Matrix, b: &Matrix, d_out: &Matrix) -> Result<(Matrix, Matrix)> {
    Ok((d_out.hadamard(b)?, d_out.hadamard(a)?))
}

pub fn scale(c: f64, d_out: &Matrix) -> Matrix {
    d_out.scale(c)
}

pub fn transpose(d_out: &Matrix) -> Matrix {
    d_out.transpose()
}

/// Bias gradient of [`Matrix::add_row_broadcast`]: column sums of `d_out`.
pub fn row_broadcast_bias(d_out: &Matrix) -> Matrix {
    let mut db = Matrix::zeros(1, d_out.cols());
    for r in 0..d_out.rows() {
        for (acc, v) in db.data_mut().iter_mut().zip(d_out.row_slice(r)) {
            *acc += v;
        }
    }
    db
}

pub fn concat_cols(widths: &[usize], d_out: &Matrix) -> Result<Vec<Matrix>> {
    d_out.split_cols(widths)
}

pub fn concat_rows(heights: &[usize], d_out: &Matrix) -> Result<Vec<Matrix>> {
    let mut start = 0;
    heights
        .iter()
        .map(|&h| {
            let part = d_out.slice_rows(start, h);
            start += h;
            part
        })
        .collect()
}

/// Scatters the gradient of a column slice back into the full-width input.
pub fn slice_cols(input_cols: usize, start: usize, d_out: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(d_out.rows(), input_cols);
    for r in 0..d_out.rows() {
        for c in 0..d_out.cols() {
            dx.set(r, start + c, d_out.get(r, c));
        }
    }
    dx
}

pub fn slice_rows(input_rows: usize, start: usize, d_out: &Matrix) -> Matrix {
    let cols = d_out.cols();
    let mut dx = Matrix::zeros(input_rows, cols);
    dx.data_mut()[start * cols..(start + d_out.rows()) * cols].copy_from_slice(d_out.data());
    dx
}

/// Logit gradient of `Σ_t −log softmax(z_t)[y_t] / denom`, i.e. `(p − onehot) / denom`.
pub fn softmax_cross_entropy(probs: &Matrix, labels: &[usize], denom: f64) -> Matrix {
    let mut dz = probs.clone();
    for (t, &y) in labels.iter().enumerate() {
        let v = dz.get(t, y);
        dz.set(t, y, v - 1.0);
    }
    dz.scale(1.0 / denom)
}
