//! Invertible coordinate maps `g: R^n -> R^n`.
//!
//! Every map evaluates batches (`[B, n]`, one vector per row) on a [`Tape`],
//! in both directions, so gradients flow through forward *and* inverse
//! applications. Inverses are exact by construction — couplings invert by
//! re-evaluating the same conditioner, ActNorm and affine maps invert in
//! closed form, Householder reflections are involutions — so `g^{-1}(g(v))`
//! reproduces `v` to machine precision rather than to an optimization
//! tolerance.

use crate::autodiff::{ParamId, ParamStore, Tape, VarId};
use crate::nets::{Activation, Mlp};
use crate::rng::RngStream;
use crate::tensor::{ensure_finite, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    /// `y_b = x_b + shift(x_a)`; inversion is exact subtraction.
    Additive,
    /// `y_b = x_b * exp(s) + shift` with `s = 2 * tanh(raw)` keeping the
    /// log-scale inside `[-2, 2]`.
    Affine,
}

impl std::str::FromStr for CouplingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(CouplingKind::Additive),
            "affine" => Ok(CouplingKind::Affine),
            other => Err(Error::Config(format!(
                "unknown coupling '{other}' (expected 'additive' or 'affine')"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum InvertibleMap {
    /// `v -> v^3` componentwise; inverse is the real cube root.
    AnalyticCube { n: usize },
    /// `v -> sinh(alpha * v) / alpha`; inverse `y -> asinh(alpha * y) / alpha`.
    AnalyticSinh { n: usize, alpha: f64 },
    /// `v -> scale * v + shift` with fixed (non-trainable) coefficients.
    AnalyticAffine { scale: Tensor, shift: Tensor },
    /// Trainable per-dimension `y = x * exp(log_scale) + bias`, initialized
    /// to the identity (log_scale = 0, bias = 0).
    ActNorm { n: usize, log_scale: ParamId, bias: ParamId },
    /// Coupling layer: one half of the coordinates conditions a dense network
    /// that transforms the other half. `keep_first` selects which half passes
    /// through unchanged; stacks alternate it.
    Coupling { n: usize, split: usize, kind: CouplingKind, keep_first: bool, cond: Mlp },
    /// Product of `n` Householder reflections (rows of `vecs`), a trainable
    /// orthogonal mixing layer; the inverse applies the reflections in
    /// reverse order.
    Householder { n: usize, vecs: ParamId },
    /// Sequential composition; forward applies parts left to right.
    Composition { n: usize, parts: Vec<InvertibleMap> },
}

impl InvertibleMap {
    // ----- constructors -----

    pub fn identity(n: usize) -> Self {
        InvertibleMap::AnalyticAffine {
            scale: Tensor::full(1, n, 1.0),
            shift: Tensor::zeros(1, n),
        }
    }

    pub fn cube(n: usize) -> Self {
        InvertibleMap::AnalyticCube { n }
    }

    pub fn scaled_sinh(n: usize, alpha: f64) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::Contract("scaled_sinh needs a nonzero finite alpha".into()));
        }
        Ok(InvertibleMap::AnalyticSinh { n, alpha })
    }

    pub fn affine(scale: Tensor, shift: Tensor) -> Result<Self> {
        if scale.rows() != 1 || shift.rows() != 1 || scale.cols() != shift.cols() {
            return Err(Error::shape("affine", "scale and shift must be [1, n]"));
        }
        if scale.data().iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::Contract("affine scale entries must be nonzero and finite".into()));
        }
        Ok(InvertibleMap::AnalyticAffine { scale, shift })
    }

    pub fn act_norm(store: &mut ParamStore, name: &str, n: usize) -> Self {
        let log_scale = store.add(format!("{name}.log_scale"), Tensor::zeros(1, n));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(1, n));
        InvertibleMap::ActNorm { n, log_scale, bias }
    }

    pub fn coupling(
        store: &mut ParamStore,
        rng: &mut RngStream,
        name: &str,
        n: usize,
        kind: CouplingKind,
        keep_first: bool,
        hidden: usize,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Contract("coupling layers need n >= 2".into()));
        }
        let split = n.div_ceil(2);
        let (cond_in, transformed) = if keep_first { (split, n - split) } else { (n - split, split) };
        let cond_out = match kind {
            CouplingKind::Additive => transformed,
            CouplingKind::Affine => 2 * transformed,
        };
        let cond = Mlp::new(
            store,
            rng,
            &format!("{name}.cond"),
            &[cond_in, hidden, hidden, cond_out],
            Activation::Softplus,
        );
        Ok(InvertibleMap::Coupling { n, split, kind, keep_first, cond })
    }

    pub fn householder(store: &mut ParamStore, rng: &mut RngStream, name: &str, n: usize) -> Self {
        // Unit-norm random rows; any nonzero vector defines a reflection.
        let mut vecs = rng.normal_tensor(n, n);
        for i in 0..n {
            let norm = vecs.row_norm(i);
            for j in 0..n {
                let v = vecs.at(i, j) / norm;
                vecs.set(i, j, v);
            }
        }
        let vecs = store.add(format!("{name}.vecs"), vecs);
        InvertibleMap::Householder { n, vecs }
    }

    /// `blocks` repetitions of [ActNorm, coupling (keep first), coupling
    /// (keep second), Householder mixing].
    pub fn coupling_stack(
        store: &mut ParamStore,
        rng: &mut RngStream,
        name: &str,
        n: usize,
        blocks: usize,
        kind: CouplingKind,
        hidden: usize,
    ) -> Result<Self> {
        let mut parts = Vec::with_capacity(blocks * 4);
        for b in 0..blocks {
            parts.push(InvertibleMap::act_norm(store, &format!("{name}.b{b}.an"), n));
            parts.push(InvertibleMap::coupling(
                store,
                rng,
                &format!("{name}.b{b}.c0"),
                n,
                kind,
                true,
                hidden,
            )?);
            parts.push(InvertibleMap::coupling(
                store,
                rng,
                &format!("{name}.b{b}.c1"),
                n,
                kind,
                false,
                hidden,
            )?);
            parts.push(InvertibleMap::householder(store, rng, &format!("{name}.b{b}.hh"), n));
        }
        Ok(InvertibleMap::Composition { n, parts })
    }

    /// Composition applying `first`, then `second`.
    pub fn compose(first: InvertibleMap, second: InvertibleMap) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::shape(
                "compose",
                format!("dims differ: {} vs {}", first.dim(), second.dim()),
            ));
        }
        let n = first.dim();
        Ok(InvertibleMap::Composition { n, parts: vec![first, second] })
    }

    // ----- structure -----

    pub fn dim(&self) -> usize {
        match self {
            InvertibleMap::AnalyticCube { n } => *n,
            InvertibleMap::AnalyticSinh { n, .. } => *n,
            InvertibleMap::AnalyticAffine { scale, .. } => scale.cols(),
            InvertibleMap::ActNorm { n, .. } => *n,
            InvertibleMap::Coupling { n, .. } => *n,
            InvertibleMap::Householder { n, .. } => *n,
            InvertibleMap::Composition { n, .. } => *n,
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match self {
            InvertibleMap::AnalyticCube { .. }
            | InvertibleMap::AnalyticSinh { .. }
            | InvertibleMap::AnalyticAffine { .. } => Vec::new(),
            InvertibleMap::ActNorm { log_scale, bias, .. } => vec![*log_scale, *bias],
            InvertibleMap::Coupling { cond, .. } => cond.param_ids(),
            InvertibleMap::Householder { vecs, .. } => vec![*vecs],
            InvertibleMap::Composition { parts, .. } => {
                parts.iter().flat_map(|p| p.param_ids()).collect()
            }
        }
    }

    // ----- evaluation -----

    fn check_width(&self, got: usize, op: &'static str) -> Result<()> {
        if got != self.dim() {
            Err(Error::shape(op, format!("map dim {} but input width {got}", self.dim())))
        } else {
            Ok(())
        }
    }

    /// Forward pass on a tape; `x` is `[B, n]`.
    pub fn fwd(&self, tape: &mut Tape, x: VarId) -> Result<VarId> {
        self.check_width(tape.value(x).cols(), "map forward")?;
        match self {
            InvertibleMap::AnalyticCube { .. } => {
                let sq = tape.mul(x, x)?;
                tape.mul(sq, x)
            }
            InvertibleMap::AnalyticSinh { alpha, .. } => {
                let ax = tape.scale_const(x, *alpha);
                let s = tape.sinh(ax);
                Ok(tape.scale_const(s, 1.0 / alpha))
            }
            InvertibleMap::AnalyticAffine { scale, shift } => {
                let sc = tape.constant(scale.clone());
                let sh = tape.constant(shift.clone());
                let prod = tape.mul(x, sc)?;
                tape.add(prod, sh)
            }
            InvertibleMap::ActNorm { log_scale, bias, .. } => {
                let ls = tape.param(*log_scale);
                let b = tape.param(*bias);
                let s = tape.exp(ls);
                let prod = tape.mul(x, s)?;
                tape.add(prod, b)
            }
            InvertibleMap::Coupling { .. } => self.coupling_pass(tape, x, true),
            InvertibleMap::Householder { vecs, n } => {
                self.householder_pass(tape, x, *vecs, *n, false)
            }
            InvertibleMap::Composition { parts, .. } => {
                let mut h = x;
                for p in parts {
                    h = p.fwd(tape, h)?;
                }
                Ok(h)
            }
        }
    }

    /// Inverse pass on a tape; `y` is `[B, n]`.
    pub fn inv(&self, tape: &mut Tape, y: VarId) -> Result<VarId> {
        self.check_width(tape.value(y).cols(), "map inverse")?;
        match self {
            InvertibleMap::AnalyticCube { .. } => Ok(tape.cbrt(y)),
            InvertibleMap::AnalyticSinh { alpha, .. } => {
                let ay = tape.scale_const(y, *alpha);
                let s = tape.asinh(ay);
                Ok(tape.scale_const(s, 1.0 / alpha))
            }
            InvertibleMap::AnalyticAffine { scale, shift } => {
                let inv_scale = tape.constant(scale.map(|s| 1.0 / s));
                let sh = tape.constant(shift.clone());
                let centered = tape.sub(y, sh)?;
                tape.mul(centered, inv_scale)
            }
            InvertibleMap::ActNorm { log_scale, bias, .. } => {
                let ls = tape.param(*log_scale);
                let b = tape.param(*bias);
                let nls = tape.neg(ls);
                let s_inv = tape.exp(nls);
                let centered = tape.sub(y, b)?;
                tape.mul(centered, s_inv)
            }
            InvertibleMap::Coupling { .. } => self.coupling_pass(tape, y, false),
            InvertibleMap::Householder { vecs, n } => {
                self.householder_pass(tape, y, *vecs, *n, true)
            }
            InvertibleMap::Composition { parts, .. } => {
                let mut h = y;
                for p in parts.iter().rev() {
                    h = p.inv(tape, h)?;
                }
                Ok(h)
            }
        }
    }

    fn coupling_pass(&self, tape: &mut Tape, x: VarId, forward: bool) -> Result<VarId> {
        let InvertibleMap::Coupling { n, split, kind, keep_first, cond } = self else {
            unreachable!("coupling_pass on non-coupling map")
        };
        let (n, split) = (*n, *split);
        // Kept block conditions the transformed block. With keep_first the
        // kept block is the leading `split` columns, otherwise the trailing
        // `n - split` columns.
        let (keep_start, keep_len, tr_start, tr_len) = if *keep_first {
            (0, split, split, n - split)
        } else {
            (split, n - split, 0, split)
        };
        let kept = tape.slice_cols(x, keep_start, keep_len)?;
        let trans = tape.slice_cols(x, tr_start, tr_len)?;
        let h = cond.forward(tape, kept)?;
        let new_trans = match kind {
            CouplingKind::Additive => {
                if forward {
                    tape.add(trans, h)?
                } else {
                    tape.sub(trans, h)?
                }
            }
            CouplingKind::Affine => {
                let shift = tape.slice_cols(h, 0, tr_len)?;
                let raw = tape.slice_cols(h, tr_len, tr_len)?;
                let th = tape.tanh(raw);
                let log_s = tape.scale_const(th, 2.0);
                if forward {
                    let s = tape.exp(log_s);
                    let scaled = tape.mul(trans, s)?;
                    tape.add(scaled, shift)?
                } else {
                    let neg_log_s = tape.neg(log_s);
                    let s_inv = tape.exp(neg_log_s);
                    let centered = tape.sub(trans, shift)?;
                    tape.mul(centered, s_inv)?
                }
            }
        };
        if *keep_first {
            tape.concat_cols(kept, new_trans)
        } else {
            tape.concat_cols(new_trans, kept)
        }
    }

    fn householder_pass(
        &self,
        tape: &mut Tape,
        x: VarId,
        vecs: ParamId,
        n: usize,
        reverse: bool,
    ) -> Result<VarId> {
        let w_all = tape.param(vecs);
        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        let mut h = x;
        for i in order {
            let w = tape.slice_rows(w_all, i, 1)?; // [1, n]
            let wt = tape.transpose(w); // [n, 1]
            let proj = tape.matmul(h, wt)?; // [B, 1]
            let ww = tape.mul(w, w)?;
            let denom = tape.row_sum(ww); // [1, 1]
            let rd = tape.recip(denom);
            let coef = tape.scale_const(rd, 2.0);
            let outer = tape.matmul(proj, w)?; // [B, n]
            let update = tape.mul(outer, coef)?;
            h = tape.sub(h, update)?;
        }
        Ok(h)
    }

    // ----- tape-free conveniences -----

    /// Evaluate forward on raw data (fresh tape, finiteness-checked).
    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        ensure_finite(x, "map forward input")?;
        let mut tape = Tape::new(store);
        let xv = tape.constant(x.clone());
        let y = self.fwd(&mut tape, xv)?;
        let out = tape.value(y).clone();
        ensure_finite(&out, "map forward output")?;
        Ok(out)
    }

    /// Evaluate the inverse on raw data (fresh tape, finiteness-checked).
    pub fn inverse(&self, store: &ParamStore, y: &Tensor) -> Result<Tensor> {
        ensure_finite(y, "map inverse input")?;
        let mut tape = Tape::new(store);
        let yv = tape.constant(y.clone());
        let x = self.inv(&mut tape, yv)?;
        let out = tape.value(x).clone();
        ensure_finite(&out, "map inverse output")?;
        Ok(out)
    }

    /// Materialize the matrix `M` such that forward(x_row) = x_row * M for
    /// row vectors. Only meaningful for linear maps (used in tests and for
    /// orthogonality checks on Householder mixing).
    pub fn linear_matrix(&self, store: &ParamStore) -> Result<Tensor> {
        self.forward(store, &Tensor::identity(self.dim()))
    }

    /// Largest roundtrip deviation `max |g^{-1}(g(v)) - v|` over the rows of `v`.
    pub fn roundtrip_residual(&self, store: &ParamStore, v: &Tensor) -> Result<f64> {
        let there = self.forward(store, v)?;
        let back = self.inverse(store, &there)?;
        Ok(back.max_abs_diff(v))
    }
}
