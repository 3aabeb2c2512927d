//! Dense decompositions for core matrices, backed by nalgebra.
//!
//! Only the Euclidean factorizations live here (SVD, pseudoinverse with
//! singular-value truncation); everything induced-space-aware is built on top
//! of these in [`crate::linearizer`].

use nalgebra::DMatrix;

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Relative truncation threshold for pseudoinversion: singular values below
/// `PINV_RTOL * sigma_max` are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

pub fn to_dmatrix(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_iterator(t.rows(), t.cols(), t.data().iter().copied())
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Tensor {
    let mut out = Tensor::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.set(i, j, m[(i, j)]);
        }
    }
    out
}

/// Thin SVD `A = U diag(sigma) V^T` with singular values in descending order.
/// `u` is `[m, p]`, `v` is `[n, p]` with `p = min(m, n)`.
pub struct Svd {
    pub u: Tensor,
    pub sigma: Vec<f64>,
    pub v: Tensor,
}

pub fn svd(a: &Tensor) -> Result<Svd> {
    let m = to_dmatrix(a);
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Numeric("SVD failed to produce U".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Numeric("SVD failed to produce V^T".into()))?;
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite singular values".into()));
    }
    Ok(Svd { u: from_dmatrix(u), sigma, v: from_dmatrix(&vt.transpose()) })
}

/// Moore-Penrose pseudoinverse via SVD with relative truncation at
/// [`PINV_RTOL`]: `A^+ = V diag(1/sigma_i) U^T` over the retained values.
pub fn pinv(a: &Tensor) -> Result<Tensor> {
    let Svd { u, sigma, v } = svd(a)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cut = PINV_RTOL * smax;
    let inv_sigma: Vec<f64> = sigma
        .iter()
        .map(|&s| if s > cut && s > 0.0 { 1.0 / s } else { 0.0 })
        .collect();
    // A^+ = V * diag(inv_sigma) * U^T
    let vs = v.matmul(&Tensor::diag(&inv_sigma))?;
    vs.matmul(&u.transpose())
}

/// Effective rank at the same truncation threshold used by [`pinv`].
pub fn effective_rank(a: &Tensor) -> Result<usize> {
    let s = svd(a)?.sigma;
    let smax = s.first().copied().unwrap_or(0.0);
    let cut = PINV_RTOL * smax;
    Ok(s.iter().filter(|&&x| x > cut && x > 0.0).count())
}

/// Random matrix with prescribed rank: product of `[m, r]` and `[r, n]`
/// normal factors (full rank `r` with probability 1).
pub fn random_with_rank(rng: &mut crate::rng::RngStream, m: usize, n: usize, r: usize) -> Result<Tensor> {
    let a = rng.normal_tensor(m, r);
    let b = rng.normal_tensor(r, n);
    a.matmul(&b)
}
