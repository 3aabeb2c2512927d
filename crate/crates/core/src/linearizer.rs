//! The linearizer `f(x) = g_y^{-1}(A g_x(x))` and its derived operators.
//!
//! `f` is exactly linear as a map between the vector spaces induced by `g_x`
//! and `g_y`, so classical matrix calculus lifts to the nonlinear map:
//! composition multiplies cores, the transpose/adjoint swaps the bijections
//! and transposes the core, the SVD transports singular vectors through the
//! inverse bijections, and the Moore-Penrose pseudoinverse satisfies the four
//! Penrose identities in the induced geometry.
//!
//! All residual diagnostics report the worst ambient (data-space) deviation
//! `max |lhs - rhs|` over the probe batch; identities that compare induced
//! inner products report a guarded relative error
//! `|a - b| / (1 + max(|a|, |b|))`.

use std::rc::Rc;

use crate::autodiff::{ParamStore, Tape, VarId};
use crate::cores::LinearCore;
use crate::induced::InducedSpace;
use crate::linalg::{self, PINV_RTOL};
use crate::maps::InvertibleMap;
use crate::rng::RngStream;
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone)]
pub struct Linearizer {
    g_x: Rc<InvertibleMap>,
    g_y: Rc<InvertibleMap>,
    core: LinearCore,
}

/// SVD of a linearizer: Euclidean singular values of the core together with
/// the singular vectors transported to data space, `v~_i = g_x^{-1}(v_i)` and
/// `u~_i = g_y^{-1}(u_i)`. Vectors are stored as rows (`tilde_v: [p, n]`,
/// `tilde_u: [p, m]`, `p = min(m, n)`), index-aligned with `sigmas`.
pub struct LinearizerSvd {
    pub sigmas: Vec<f64>,
    pub tilde_u: Tensor,
    pub tilde_v: Tensor,
}

impl Linearizer {
    /// Build `f = g_y^{-1} . A . g_x`, checking that the core is `m x n` for
    /// `g_x` of dimension `n` and `g_y` of dimension `m`.
    pub fn new(
        store: &ParamStore,
        g_x: Rc<InvertibleMap>,
        g_y: Rc<InvertibleMap>,
        core: LinearCore,
    ) -> Result<Self> {
        let (m, n) = core.dims(store);
        if g_x.dim() != n || g_y.dim() != m {
            return Err(Error::shape(
                "linearizer",
                format!(
                    "core is {m}x{n} but g_x has dim {} and g_y has dim {}",
                    g_x.dim(),
                    g_y.dim()
                ),
            ));
        }
        Ok(Linearizer { g_x, g_y, core })
    }

    /// Shared-basis construction `g_x = g_y = g` (same object).
    pub fn from_shared(store: &ParamStore, g: Rc<InvertibleMap>, core: LinearCore) -> Result<Self> {
        Linearizer::new(store, g.clone(), g, core)
    }

    pub fn g_x(&self) -> &Rc<InvertibleMap> {
        &self.g_x
    }

    pub fn g_y(&self) -> &Rc<InvertibleMap> {
        &self.g_y
    }

    pub fn core(&self) -> &LinearCore {
        &self.core
    }

    /// True iff `g_x` and `g_y` are the same map object; required for
    /// powers and idempotency, where the domain and codomain must carry the
    /// identical induced structure.
    pub fn shared_basis(&self) -> bool {
        Rc::ptr_eq(&self.g_x, &self.g_y)
    }

    /// `(m, n)` dimensions of the core.
    pub fn dims(&self, store: &ParamStore) -> (usize, usize) {
        self.core.dims(store)
    }

    /// Induced space on the domain side.
    pub fn x_space(&self) -> InducedSpace {
        InducedSpace::new(self.g_x.clone())
    }

    /// Induced space on the codomain side.
    pub fn y_space(&self) -> InducedSpace {
        InducedSpace::new(self.g_y.clone())
    }

    /// Dense matrix of the core.
    pub fn materialize(&self, store: &ParamStore) -> Result<Tensor> {
        self.core.materialize(store)
    }

    /// Evaluate `f` on a `[B, n]` batch of row vectors: `g_y^{-1}(g_x(x) A^T)`.
    pub fn apply(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let z = self.g_x.forward(store, x)?;
        let a = self.core.materialize(store)?;
        let w = z.matmul(&a.transpose())?;
        self.g_y.inverse(store, &w)
    }

    /// Tape-recorded evaluation for training.
    pub fn apply_tape(&self, tape: &mut Tape, x: VarId) -> Result<VarId> {
        let z = self.g_x.fwd(tape, x)?;
        let w = self.core.apply_tape(tape, z)?;
        self.g_y.inv(tape, w)
    }

    /// `f2 . f1` as a single linearizer with core `A2 A1`. The inner maps
    /// must be the same object: equality of trained networks is otherwise
    /// undecidable.
    pub fn compose(store: &ParamStore, f2: &Linearizer, f1: &Linearizer) -> Result<Linearizer> {
        if !Rc::ptr_eq(&f2.g_x, &f1.g_y) {
            return Err(Error::Contract(
                "compose requires f2.g_x and f1.g_y to be the same map object".into(),
            ));
        }
        let a2 = f2.core.materialize(store)?;
        let a1 = f1.core.materialize(store)?;
        let prod = a2.matmul(&a1)?;
        Linearizer::new(store, f1.g_x.clone(), f2.g_y.clone(), LinearCore::Raw(prod))
    }

    /// N-fold composition with itself: shared basis, core `A^N`.
    pub fn power(&self, store: &ParamStore, n: usize) -> Result<Linearizer> {
        if !self.shared_basis() {
            return Err(Error::Contract("power requires a shared basis (g_x == g_y)".into()));
        }
        let (m, k) = self.dims(store);
        if m != k {
            return Err(Error::shape("power", format!("core must be square, got {m}x{k}")));
        }
        if n == 0 {
            return Err(Error::Contract("power requires a positive exponent".into()));
        }
        let a = self.core.materialize(store)?;
        let mut acc = a.clone();
        for _ in 1..n {
            acc = acc.matmul(&a)?;
        }
        Linearizer::new(store, self.g_x.clone(), self.g_y.clone(), LinearCore::Raw(acc))
    }

    /// Adjoint with respect to the induced inner products:
    /// `f^T(y) = g_x^{-1}(A^T g_y(y))`.
    pub fn transpose(&self, store: &ParamStore) -> Result<Linearizer> {
        let a = self.core.materialize(store)?;
        Linearizer::new(
            store,
            self.g_y.clone(),
            self.g_x.clone(),
            LinearCore::Raw(a.transpose()),
        )
    }

    /// Moore-Penrose pseudoinverse `f^+(y) = g_x^{-1}(A^+ g_y(y))`, with the
    /// core pseudoinverted by SVD truncation.
    pub fn pinv(&self, store: &ParamStore) -> Result<Linearizer> {
        let a = self.core.materialize(store)?;
        let dag = linalg::pinv(&a)?;
        Linearizer::new(store, self.g_y.clone(), self.g_x.clone(), LinearCore::Raw(dag))
    }

    /// SVD with singular vectors transported to data space.
    pub fn svd(&self, store: &ParamStore) -> Result<LinearizerSvd> {
        let a = self.core.materialize(store)?;
        let s = linalg::svd(&a)?;
        let tilde_v = self.g_x.inverse(store, &s.v.transpose())?;
        let tilde_u = self.g_y.inverse(store, &s.u.transpose())?;
        Ok(LinearizerSvd { sigmas: s.sigma, tilde_u, tilde_v })
    }

    /// Worst deviation of the transport identity `f(v~_i) = sigma_i (.) u~_i`
    /// over all singular triples.
    pub fn svd_transport_residual(&self, store: &ParamStore, svd: &LinearizerSvd) -> Result<f64> {
        let fv = self.apply(store, &svd.tilde_v)?;
        let sig = Tensor::col(svd.sigmas.clone());
        let target = self.y_space().odot_rows(store, &sig, &svd.tilde_u)?;
        Ok(fv.max_abs_diff(&target))
    }

    /// Deviation of the induced Gram matrices of the transported singular
    /// vectors from the identity: `(for v~ under g_x, for u~ under g_y)`.
    pub fn svd_gram_residual(&self, store: &ParamStore, svd: &LinearizerSvd) -> Result<(f64, f64)> {
        let zv = self.g_x.forward(store, &svd.tilde_v)?;
        let gv = zv.matmul(&zv.transpose())?;
        let dv = gv.max_abs_diff(&Tensor::identity(gv.rows()));
        let zu = self.g_y.forward(store, &svd.tilde_u)?;
        let gu = zu.matmul(&zu.transpose())?;
        let du = gu.max_abs_diff(&Tensor::identity(gu.rows()));
        Ok((dv, du))
    }

    /// Worst superposition residual
    /// `f(a1 (.) x1 (+) a2 (.) x2)  vs  a1 (.) f(x1) (+) a2 (.) f(x2)`
    /// over a batch: `x1, x2` are `[B, n]` rows, `a1, a2` are `[B, 1]`
    /// coefficient columns. Zero in exact arithmetic for any core and maps.
    pub fn superposition_residual(
        &self,
        store: &ParamStore,
        x1: &Tensor,
        x2: &Tensor,
        a1: &Tensor,
        a2: &Tensor,
    ) -> Result<f64> {
        let sx = self.x_space();
        let sy = self.y_space();
        let u = sx.odot_rows(store, a1, x1)?;
        let v = sx.odot_rows(store, a2, x2)?;
        let lhs = self.apply(store, &sx.oplus(store, &u, &v)?)?;
        let fu = sy.odot_rows(store, a1, &self.apply(store, x1)?)?;
        let fv = sy.odot_rows(store, a2, &self.apply(store, x2)?)?;
        let rhs = sy.oplus(store, &fu, &fv)?;
        Ok(lhs.max_abs_diff(&rhs))
    }

    /// Worst guarded relative error of the adjoint identity
    /// `<f(x), y>_{g_y} = <x, f^T(y)>_{g_x}` over row-paired probes.
    pub fn adjoint_residual(&self, store: &ParamStore, x: &Tensor, y: &Tensor) -> Result<f64> {
        let ft = self.transpose(store)?;
        let fx = self.apply(store, x)?;
        let fty = ft.apply(store, y)?;
        let lhs = self.y_space().inner_rows(store, &fx, y)?;
        let rhs = self.x_space().inner_rows(store, x, &fty)?;
        Ok(max_rel_rows(&lhs, &rhs))
    }

    /// Worst ambient deviation `max |f(f(x)) - f(x)|` over a `[B, n]` batch.
    /// Valid only on a shared basis with a square core, where `f(f(x))` is
    /// well-typed; zero up to roundtrip noise iff `A^2 = A`.
    pub fn idempotency_residual(&self, store: &ParamStore, x: &Tensor) -> Result<f64> {
        if !self.shared_basis() {
            return Err(Error::Contract(
                "idempotency requires a shared basis (g_x == g_y)".into(),
            ));
        }
        let (m, n) = self.dims(store);
        if m != n {
            return Err(Error::shape("idempotency", format!("core must be square, got {m}x{n}")));
        }
        let fx = self.apply(store, x)?;
        let ffx = self.apply(store, &fx)?;
        Ok(ffx.max_abs_diff(&fx))
    }

    /// Null-space property: for `x = g_x^{-1}(z)` with `z` in the null space
    /// of the core, `f(x)` must equal the zero vector `g_y^{-1}(0)`. Returns
    /// the worst ambient deviation over random null-space probes (0 when the
    /// core has full column rank). Null directions are the right singular
    /// vectors whose singular values fall below the pseudoinverse truncation
    /// threshold.
    pub fn nullspace_residual(
        &self,
        store: &ParamStore,
        rng: &mut RngStream,
        trials: usize,
    ) -> Result<f64> {
        let a = self.core.materialize(store)?;
        let s = linalg::svd(&a)?;
        let smax = s.sigma.first().copied().unwrap_or(0.0);
        let cut = PINV_RTOL * smax;
        let null_idx: Vec<usize> = (0..s.sigma.len()).filter(|&i| s.sigma[i] <= cut).collect();
        if null_idx.is_empty() {
            return Ok(0.0);
        }
        let vt = s.v.transpose();
        let basis = vt.gather_rows(&null_idx);
        let coeff = {
            let mut t = Tensor::zeros(trials, null_idx.len());
            for v in t.data_mut() {
                *v = rng.uniform_in(-2.0, 2.0);
            }
            t
        };
        let z = coeff.matmul(&basis)?;
        let x = self.g_x.inverse(store, &z)?;
        let fx = self.apply(store, &x)?;
        let zero = self.y_space().zero_vector(store)?;
        Ok(fx.sub(&zero)?.max_abs())
    }

    /// Residuals of the four Penrose identities for a candidate
    /// pseudoinverse, probed on `trials` random vectors of radius 2:
    /// 1. `f f^+ f = f` (ambient),
    /// 2. `f^+ f f^+ = f^+` (ambient),
    /// 3. self-adjointness of `f f^+` under `<.,.>_{g_y}` (guarded relative),
    /// 4. self-adjointness of `f^+ f` under `<.,.>_{g_x}` (guarded relative).
    pub fn penrose_residuals(
        &self,
        store: &ParamStore,
        f_dag: &Linearizer,
        trials: usize,
        rng: &mut RngStream,
    ) -> Result<[f64; 4]> {
        let (m, n) = self.dims(store);
        let (dm, dn) = f_dag.dims(store);
        if (dm, dn) != (n, m) {
            return Err(Error::shape(
                "penrose_residuals",
                format!("pseudoinverse core must be {n}x{m}, got {dm}x{dn}"),
            ));
        }
        let radius = 2.0;

        let xs = rng.ball_tensor(trials, n, radius);
        let fx = self.apply(store, &xs)?;
        let fdfx = f_dag.apply(store, &fx)?;
        let r1 = self.apply(store, &fdfx)?.max_abs_diff(&fx);

        let ys = rng.ball_tensor(trials, m, radius);
        let fdy = f_dag.apply(store, &ys)?;
        let ffdy = self.apply(store, &fdy)?;
        let r2 = f_dag.apply(store, &ffdy)?.max_abs_diff(&fdy);

        let sy = self.y_space();
        let y1 = rng.ball_tensor(trials, m, radius);
        let y2 = rng.ball_tensor(trials, m, radius);
        let p1 = self.apply(store, &f_dag.apply(store, &y1)?)?;
        let p2 = self.apply(store, &f_dag.apply(store, &y2)?)?;
        let lhs3 = sy.inner_rows(store, &p1, &y2)?;
        let rhs3 = sy.inner_rows(store, &y1, &p2)?;
        let r3 = max_rel_rows(&lhs3, &rhs3);

        let sx = self.x_space();
        let x1 = rng.ball_tensor(trials, n, radius);
        let x2 = rng.ball_tensor(trials, n, radius);
        let q1 = f_dag.apply(store, &self.apply(store, &x1)?)?;
        let q2 = f_dag.apply(store, &self.apply(store, &x2)?)?;
        let lhs4 = sx.inner_rows(store, &q1, &x2)?;
        let rhs4 = sx.inner_rows(store, &x1, &q2)?;
        let r4 = max_rel_rows(&lhs4, &rhs4);

        Ok([r1, r2, r3, r4])
    }
}

/// Worst `|a - b| / (1 + max(|a|, |b|))` over paired `[B, 1]` columns:
/// relative error for large magnitudes, absolute for small ones.
fn max_rel_rows(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| (p - q).abs() / (1.0 + p.abs().max(q.abs())))
        .fold(0.0, f64::max)
}
