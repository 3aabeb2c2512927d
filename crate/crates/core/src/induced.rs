//! The vector space a bijection induces on its domain.
//!
//! An invertible `g: R^n -> R^n` pulls the linear structure of its codomain
//! back onto its domain: `u (+) v = g^{-1}(g(u) + g(v))`,
//! `a (.) v = g^{-1}(a * g(v))`. Under these operations the domain satisfies
//! all vector-space axioms with zero element `g^{-1}(0)`, and
//! `<u, v> = <g(u), g(v)>` is an inner product that makes `g` an isometry by
//! construction. Residuals here (and everywhere downstream) are measured in
//! the ambient Euclidean norm on the data side — the coordinates a user
//! actually observes.

use std::rc::Rc;

use serde::Serialize;

use crate::autodiff::ParamStore;
use crate::maps::InvertibleMap;
use crate::rng::RngStream;
use crate::tensor::{ensure_finite, Tensor};
use crate::Result;

#[derive(Clone)]
pub struct InducedSpace {
    g: Rc<InvertibleMap>,
}

impl InducedSpace {
    pub fn new(g: Rc<InvertibleMap>) -> Self {
        InducedSpace { g }
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn map(&self) -> &Rc<InvertibleMap> {
        &self.g
    }

    /// The induced zero element `g^{-1}(0)` as a `[1, n]` row. This is a
    /// genuine data-space vector and generally *not* the ambient origin.
    pub fn zero_vector(&self, store: &ParamStore) -> Result<Tensor> {
        self.g.inverse(store, &Tensor::zeros(1, self.dim()))
    }

    /// Induced addition, row-wise over batches (shapes broadcast like `add`).
    pub fn oplus(&self, store: &ParamStore, u: &Tensor, v: &Tensor) -> Result<Tensor> {
        let gu = self.g.forward(store, u)?;
        let gv = self.g.forward(store, v)?;
        self.g.inverse(store, &gu.add(&gv)?)
    }

    /// Induced subtraction `u (-) v = g^{-1}(g(u) - g(v))`.
    pub fn ominus(&self, store: &ParamStore, u: &Tensor, v: &Tensor) -> Result<Tensor> {
        let gu = self.g.forward(store, u)?;
        let gv = self.g.forward(store, v)?;
        self.g.inverse(store, &gu.sub(&gv)?)
    }

    /// Induced scalar multiplication with one coefficient for all rows.
    pub fn odot(&self, store: &ParamStore, a: f64, v: &Tensor) -> Result<Tensor> {
        let gv = self.g.forward(store, v)?;
        self.g.inverse(store, &gv.scale(a))
    }

    /// Induced scalar multiplication with per-row coefficients `a: [B, 1]`.
    pub fn odot_rows(&self, store: &ParamStore, a: &Tensor, v: &Tensor) -> Result<Tensor> {
        let gv = self.g.forward(store, v)?;
        self.g.inverse(store, &gv.mul(a)?)
    }

    /// Induced additive inverse `(-1) (.) v`.
    pub fn neg(&self, store: &ParamStore, v: &Tensor) -> Result<Tensor> {
        self.odot(store, -1.0, v)
    }

    /// Induced inner product of two single rows.
    pub fn inner(&self, store: &ParamStore, u: &Tensor, v: &Tensor) -> Result<f64> {
        Ok(self.inner_rows(store, u, v)?.item())
    }

    /// Row-wise induced inner products of two `[B, n]` batches -> `[B, 1]`.
    pub fn inner_rows(&self, store: &ParamStore, u: &Tensor, v: &Tensor) -> Result<Tensor> {
        let gu = self.g.forward(store, u)?;
        let gv = self.g.forward(store, v)?;
        let prod = gu.mul(&gv)?;
        let mut out = Tensor::zeros(prod.rows(), 1);
        for i in 0..prod.rows() {
            out.data_mut()[i] = prod.row_slice(i).iter().sum();
        }
        ensure_finite(&out, "induced inner product")?;
        Ok(out)
    }

    /// Induced norm of a single row.
    pub fn norm(&self, store: &ParamStore, v: &Tensor) -> Result<f64> {
        Ok(self.inner(store, v, v)?.max(0.0).sqrt())
    }

    /// Exercise all nine vector-space axioms on `trials` random vectors and
    /// scalars, returning the worst ambient residual per axiom. Vectors are
    /// drawn inside a ball of the given radius; scalars uniform in [-2, 2].
    pub fn axiom_suite(
        &self,
        store: &ParamStore,
        rng: &mut RngStream,
        trials: usize,
        radius: f64,
    ) -> Result<AxiomReport> {
        let n = self.dim();
        // Rows with direction from a normal draw and norm uniform in [0, radius].
        let draw = |rng: &mut RngStream, rows: usize| -> Tensor {
            let mut t = rng.normal_tensor(rows, n);
            for i in 0..rows {
                let norm = t.row_norm(i);
                if norm > 0.0 {
                    let k = radius * rng.uniform() / norm;
                    for j in 0..n {
                        let v = t.at(i, j) * k;
                        t.set(i, j, v);
                    }
                }
            }
            t
        };
        let u = draw(rng, trials);
        let v = draw(rng, trials);
        let w = draw(rng, trials);
        let a = {
            let mut t = Tensor::zeros(trials, 1);
            for i in 0..trials {
                t.data_mut()[i] = rng.uniform_in(-2.0, 2.0);
            }
            t
        };
        let b = {
            let mut t = Tensor::zeros(trials, 1);
            for i in 0..trials {
                t.data_mut()[i] = rng.uniform_in(-2.0, 2.0);
            }
            t
        };

        let mut residuals = Vec::with_capacity(9);

        // 1. Closure: sums and scalings stay finite vectors of the right width.
        let uv = self.oplus(store, &u, &v)?;
        let au = self.odot_rows(store, &a, &u)?;
        let closure = if uv.all_finite() && au.all_finite() && uv.cols() == n { 0.0 } else { f64::INFINITY };
        residuals.push(("closure", closure));

        // 2. Associativity: (u + v) + w = u + (v + w).
        let lhs = self.oplus(store, &uv, &w)?;
        let vw = self.oplus(store, &v, &w)?;
        let rhs = self.oplus(store, &u, &vw)?;
        residuals.push(("associativity", lhs.max_abs_diff(&rhs)));

        // 3. Commutativity: u + v = v + u.
        let vu = self.oplus(store, &v, &u)?;
        residuals.push(("commutativity", uv.max_abs_diff(&vu)));

        // 4. Identity: u + 0 = u.
        let zero = self.zero_vector(store)?;
        let u0 = self.oplus(store, &u, &zero)?;
        residuals.push(("identity", u0.max_abs_diff(&u)));

        // 5. Inverse: u + (-u) = 0.
        let nu = self.neg(store, &u)?;
        let u_nu = self.oplus(store, &u, &nu)?;
        let inv_res = u_nu.broadcast_zip(&zero, "axiom", |x, z| x - z)?.max_abs();
        residuals.push(("inverse", inv_res));

        // 6. Scalar compatibility: a(bu) = (ab)u.
        let bu = self.odot_rows(store, &b, &u)?;
        let abu = self.odot_rows(store, &a, &bu)?;
        let ab = a.mul(&b)?;
        let ab_u = self.odot_rows(store, &ab, &u)?;
        residuals.push(("scalar_compatibility", abu.max_abs_diff(&ab_u)));

        // 7. Scalar identity: 1 * u = u.
        let one_u = self.odot(store, 1.0, &u)?;
        residuals.push(("scalar_identity", one_u.max_abs_diff(&u)));

        // 8. Distributivity over vector addition: a(u + v) = au + av.
        let a_uv = self.odot_rows(store, &a, &uv)?;
        let av = self.odot_rows(store, &a, &v)?;
        let au_av = self.oplus(store, &au, &av)?;
        residuals.push(("distributivity_vector", a_uv.max_abs_diff(&au_av)));

        // 9. Distributivity over scalar addition: (a + b)u = au + bu.
        let apb = a.add(&b)?;
        let apb_u = self.odot_rows(store, &apb, &u)?;
        let au_bu = self.oplus(store, &au, &bu)?;
        residuals.push(("distributivity_scalar", apb_u.max_abs_diff(&au_bu)));

        let max_residual = residuals.iter().fold(0.0f64, |m, &(_, r)| m.max(r));
        Ok(AxiomReport {
            axioms: residuals
                .into_iter()
                .map(|(name, residual)| AxiomResidual { axiom: name.to_string(), residual })
                .collect(),
            max_residual,
            trials,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomResidual {
    pub axiom: String,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub axioms: Vec<AxiomResidual>,
    pub max_residual: f64,
    pub trials: usize,
}

impl AxiomReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.max_residual < tol
    }
}
