//! Linear cores: the matrix `A` at the center of a linearizer.
//!
//! Cores come in several parameterizations (dense, low-rank product,
//! diagonal, binarized diagonal with a straight-through estimator, and a
//! hyper-network evaluated at a fixed conditioning input). Every variant can
//! `materialize` to an explicit `m x n` matrix in the mathematical column
//! convention, and can apply itself to a `[B, n]` batch of row vectors on a
//! tape so gradients reach its parameters.

use std::rc::Rc;

use crate::autodiff::{ParamId, ParamStore, Tape, VarId};
use crate::nets::Mlp;
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub enum LinearCore {
    /// Fixed (non-trainable) matrix; the result type of derived operators
    /// such as transpose, pseudoinverse, composition, and interpolation.
    Raw(Tensor),
    /// Trainable dense `m x n` matrix.
    Dense { w: ParamId },
    /// Product of trainable factors `A = A1 * A2` with `A1: [m, r]`,
    /// `A2: [r, n]`; the rank is bounded by `r`.
    LowRank { a1: ParamId, a2: ParamId },
    /// Trainable diagonal, stored as a `[1, n]` row.
    Diagonal { d: ParamId },
    /// Diagonal of exact zeros/ones: `lambda = binarize(sigmoid(logits))`
    /// with gradients flowing straight through the binarizer. Probability
    /// exactly 0.5 rounds down to 0.
    BinaryDiagonal { logits: ParamId },
    /// Low-rank factors emitted by a hyper network evaluated at a fixed
    /// feature row (e.g. sinusoidal time features); `m = n` here.
    HyperAt { net: Rc<Mlp>, feats: Tensor, n: usize, r: usize },
}

impl LinearCore {
    /// `(m, n)`: output and input dimensions of the underlying matrix.
    pub fn dims(&self, store: &ParamStore) -> (usize, usize) {
        match self {
            LinearCore::Raw(t) => (t.rows(), t.cols()),
            LinearCore::Dense { w } => {
                let t = store.get(*w);
                (t.rows(), t.cols())
            }
            LinearCore::LowRank { a1, a2 } => (store.get(*a1).rows(), store.get(*a2).cols()),
            LinearCore::Diagonal { d } => {
                let n = store.get(*d).cols();
                (n, n)
            }
            LinearCore::BinaryDiagonal { logits } => {
                let n = store.get(*logits).cols();
                (n, n)
            }
            LinearCore::HyperAt { n, .. } => (*n, *n),
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match self {
            LinearCore::Raw(_) => Vec::new(),
            LinearCore::Dense { w } => vec![*w],
            LinearCore::LowRank { a1, a2 } => vec![*a1, *a2],
            LinearCore::Diagonal { d } => vec![*d],
            LinearCore::BinaryDiagonal { logits } => vec![*logits],
            LinearCore::HyperAt { net, .. } => net.param_ids(),
        }
    }

    /// Explicit `m x n` matrix for this core.
    pub fn materialize(&self, store: &ParamStore) -> Result<Tensor> {
        match self {
            LinearCore::Raw(t) => Ok(t.clone()),
            LinearCore::Dense { w } => Ok(store.get(*w).clone()),
            LinearCore::LowRank { a1, a2 } => store.get(*a1).matmul(store.get(*a2)),
            LinearCore::Diagonal { d } => Ok(Tensor::diag(store.get(*d).data())),
            LinearCore::BinaryDiagonal { logits } => {
                let lam: Vec<f64> = store
                    .get(*logits)
                    .data()
                    .iter()
                    .map(|&l| if sigmoid(l) > 0.5 { 1.0 } else { 0.0 })
                    .collect();
                Ok(Tensor::diag(&lam))
            }
            LinearCore::HyperAt { net, feats, n, r } => {
                let mut tape = Tape::new(store);
                let f = tape.constant(feats.clone());
                let out = net.forward(&mut tape, f)?;
                let a1 = tape.slice_cols(out, 0, n * r)?;
                let a2 = tape.slice_cols(out, n * r, r * n)?;
                let m1 = tape.reshape(a1, *n, *r)?;
                let m2 = tape.reshape(a2, *r, *n)?;
                let prod = tape.matmul(m1, m2)?;
                Ok(tape.value(prod).clone())
            }
        }
    }

    /// Apply to a `[B, n]` batch of row vectors on the tape: `out = z A^T`.
    pub fn apply_tape(&self, tape: &mut Tape, z: VarId) -> Result<VarId> {
        match self {
            LinearCore::Raw(t) => {
                let at = tape.constant(t.transpose());
                tape.matmul(z, at)
            }
            LinearCore::Dense { w } => {
                let wv = tape.param(*w);
                let wt = tape.transpose(wv);
                tape.matmul(z, wt)
            }
            LinearCore::LowRank { a1, a2 } => {
                // z A^T = z (A1 A2)^T = (z A2^T) A1^T
                let a2v = tape.param(*a2);
                let a2t = tape.transpose(a2v);
                let mid = tape.matmul(z, a2t)?;
                let a1v = tape.param(*a1);
                let a1t = tape.transpose(a1v);
                tape.matmul(mid, a1t)
            }
            LinearCore::Diagonal { d } => {
                let dv = tape.param(*d);
                tape.mul(z, dv)
            }
            LinearCore::BinaryDiagonal { logits } => {
                let lv = tape.param(*logits);
                let p = tape.sigmoid(lv);
                let lam = tape.ste_binarize(p);
                tape.mul(z, lam)
            }
            LinearCore::HyperAt { net, feats, n, r } => {
                let f = tape.constant(feats.clone());
                let out = net.forward(tape, f)?;
                let a1 = tape.slice_cols(out, 0, n * r)?;
                let a2 = tape.slice_cols(out, n * r, r * n)?;
                let m1 = tape.reshape(a1, *n, *r)?;
                let m2 = tape.reshape(a2, *r, *n)?;
                let a = tape.matmul(m1, m2)?;
                let at = tape.transpose(a);
                tape.matmul(z, at)
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Convex blend of two cores on a shared basis pair:
/// `alpha * A_a + (1 - alpha) * A_b`, materialized dense.
pub fn interpolate_cores(
    store: &ParamStore,
    a: &LinearCore,
    b: &LinearCore,
    alpha: f64,
) -> Result<LinearCore> {
    if !alpha.is_finite() {
        return Err(Error::Contract("interpolation weight must be finite".into()));
    }
    let ma = a.materialize(store)?;
    let mb = b.materialize(store)?;
    if ma.shape() != mb.shape() {
        return Err(Error::shape(
            "interpolate_cores",
            format!("core shapes differ: {:?} vs {:?}", ma.shape(), mb.shape()),
        ));
    }
    let blended = ma.scale(alpha).add(&mb.scale(1.0 - alpha))?;
    Ok(LinearCore::Raw(blended))
}
