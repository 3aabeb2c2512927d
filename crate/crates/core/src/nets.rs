//! Dense feed-forward networks used as coupling conditioners and as the
//! hyper-network that emits time-dependent core factors.

use crate::autodiff::{ParamId, ParamStore, Tape, VarId};
use crate::rng::RngStream;
use crate::tensor::Tensor;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Softplus,
    Tanh,
}

#[derive(Clone, Debug)]
struct DenseLayer {
    w: ParamId,
    b: ParamId,
}

/// Fully-connected network: hidden layers use the configured activation, the
/// output layer is linear. The final layer is initialized near zero so
/// freshly built conditioners start close to the identity coupling.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    activation: Activation,
    in_dim: usize,
    out_dim: usize,
}

impl Mlp {
    /// `dims` lists layer sizes `[in, h1, ..., out]`. Hidden weights use
    /// Xavier-style scaling; the output layer gets a small spread so the net
    /// starts near zero without being stuck at an exact saddle.
    pub fn new(
        store: &mut ParamStore,
        rng: &mut RngStream,
        name: &str,
        dims: &[usize],
        activation: Activation,
    ) -> Self {
        assert!(dims.len() >= 2, "Mlp needs at least input and output dims");
        let mut layers = Vec::new();
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let last = i == dims.len() - 2;
            let std = if last { 0.05 } else { (2.0 / (fan_in + fan_out) as f64).sqrt() };
            let w = store.add(
                format!("{name}.l{i}.w"),
                rng.normal_tensor(fan_in, fan_out).scale(std),
            );
            let b = store.add(format!("{name}.l{i}.b"), Tensor::zeros(1, fan_out));
            layers.push(DenseLayer { w, b });
        }
        Mlp { layers, activation, in_dim: dims[0], out_dim: *dims.last().unwrap() }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.w, l.b]).collect()
    }

    /// Forward pass over a `[B, in]` batch.
    pub fn forward(&self, tape: &mut Tape, x: VarId) -> Result<VarId> {
        let mut h = x;
        let n = self.layers.len();
        for (i, layer) in self.layers.iter().enumerate() {
            let w = tape.param(layer.w);
            let b = tape.param(layer.b);
            let lin = tape.matmul(h, w)?;
            h = tape.add(lin, b)?;
            if i + 1 < n {
                h = match self.activation {
                    Activation::Softplus => tape.softplus(h),
                    Activation::Tanh => tape.tanh(h),
                };
            }
        }
        Ok(h)
    }
}
