//! Adam optimizer over a [`ParamStore`].
//!
//! State (first/second moments, step count) is kept per parameter in store
//! order, so two runs that see identical gradients produce bit-identical
//! parameter trajectories.

use crate::autodiff::ParamStore;
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let m = store.iter().map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols())).collect();
        let v = store.iter().map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols())).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update. `grads` is indexed like the store; `None` entries
    /// (parameters outside the current graph) are skipped but keep their
    /// moment state.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Tensor>]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::Contract(format!(
                "optimizer got {} gradient slots for {} parameters",
                grads.len(),
                store.len()
            )));
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for (i, grad) in grads.iter().enumerate() {
            let Some(g) = grad else { continue };
            if !g.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient for parameter {}",
                    store.name(crate::autodiff::ParamId(i))
                )));
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = store.get_mut(crate::autodiff::ParamId(i));
            let (pm, pv, pd, gd) = (m.data_mut(), v.data_mut(), p.data_mut(), g.data());
            for k in 0..gd.len() {
                pm[k] = self.beta1 * pm[k] + (1.0 - self.beta1) * gd[k];
                pv[k] = self.beta2 * pv[k] + (1.0 - self.beta2) * gd[k] * gd[k];
                let mhat = pm[k] / bc1;
                let vhat = pv[k] / bc2;
                pd[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
