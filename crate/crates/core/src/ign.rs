//! Idempotent generative network: a shared-basis linearizer whose core is a
//! binary diagonal `Lambda = round(sigmoid(theta))` trained with
//! straight-through estimation. Because `Lambda^2 = Lambda` exactly and both
//! sides share the same bijection `g`, the model `f(x) = g^{-1}(Lambda g(x))`
//! is idempotent by construction at every point of training — the projector
//! property is architectural, not learned. Training shapes *where* the
//! projector maps: reconstruction pulls data points toward fixed points,
//! a rank penalty prunes diagonal entries, and a weak isometry term keeps
//! `g` from hiding distances.

use std::rc::Rc;

use crate::autodiff::{ParamId, ParamStore, Tape, VarId};
use crate::cores::LinearCore;
use crate::linearizer::Linearizer;
use crate::maps::{CouplingKind, InvertibleMap};
use crate::optim::Adam;
use crate::rng::RngStream;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Loss weights: reconstruction, rank sparsity, isometry.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct IgnLossWeights {
    pub rec: f64,
    pub sparse: f64,
    pub iso: f64,
}

impl Default for IgnLossWeights {
    fn default() -> Self {
        IgnLossWeights { rec: 1.0, sparse: 0.75, iso: 0.001 }
    }
}

/// Architecture hyperparameters for [`IgnModel`].
#[derive(Clone, Debug)]
pub struct IgnModelSpec {
    pub dim: usize,
    pub blocks: usize,
    pub hidden: usize,
    pub coupling: CouplingKind,
    pub weights: IgnLossWeights,
}

impl Default for IgnModelSpec {
    fn default() -> Self {
        IgnModelSpec {
            dim: 16,
            blocks: 4,
            hidden: 64,
            coupling: CouplingKind::Additive,
            weights: IgnLossWeights::default(),
        }
    }
}

/// Tape nodes for one batch of the projector loss.
pub struct IgnLossTerms {
    pub rec: VarId,
    pub sparse: VarId,
    pub iso: VarId,
    pub total: VarId,
}

/// Evaluated loss components.
#[derive(Clone, Copy, Debug)]
pub struct IgnLossValues {
    pub rec: f64,
    pub sparse: f64,
    pub iso: f64,
    pub total: f64,
}

/// `f(x) = g^{-1}(Lambda g(x))` with `Lambda = round(sigmoid(logits))`.
pub struct IgnModel {
    g: Rc<InvertibleMap>,
    logits: ParamId,
    n: usize,
    pub weights: IgnLossWeights,
}

impl IgnModel {
    /// Fresh model. The bijection parameters live under `g.*` and the
    /// diagonal logits under `lambda.logits`; logits start at +0.5 so every
    /// diagonal entry is active (the model begins as `g^{-1} . g ~ id`) and
    /// the sparsity pressure prunes from there.
    pub fn new(store: &mut ParamStore, rng: &mut RngStream, spec: &IgnModelSpec) -> Result<Self> {
        if spec.dim == 0 {
            return Err(Error::Config("projector dimension must be positive".into()));
        }
        let g = Rc::new(InvertibleMap::coupling_stack(
            store,
            rng,
            "g",
            spec.dim,
            spec.blocks,
            spec.coupling,
            spec.hidden,
        )?);
        let logits = store.add("lambda.logits", Tensor::full(1, spec.dim, 0.5));
        Ok(IgnModel { g, logits, n: spec.dim, weights: spec.weights })
    }

    /// Wrap existing parameters (used when restoring from a checkpoint).
    pub fn from_parts(
        store: &ParamStore,
        g: Rc<InvertibleMap>,
        logits: ParamId,
        weights: IgnLossWeights,
    ) -> Result<Self> {
        let n = g.dim();
        if store.get(logits).shape() != [1, n] {
            return Err(Error::shape(
                "ign",
                format!("logits are {:?}, map dimension is {n}", store.get(logits).shape()),
            ));
        }
        Ok(IgnModel { g, logits, n, weights })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> &Rc<InvertibleMap> {
        &self.g
    }

    pub fn logits(&self) -> ParamId {
        self.logits
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.g.param_ids();
        ids.push(self.logits);
        ids
    }

    /// The projector as a shared-basis linearizer with the binarized
    /// diagonal core.
    pub fn linearizer(&self, store: &ParamStore) -> Result<Linearizer> {
        Linearizer::from_shared(
            store,
            self.g.clone(),
            LinearCore::BinaryDiagonal { logits: self.logits },
        )
    }

    /// The binarized diagonal as a `[1, n]` row with entries exactly in
    /// `{0, 1}` (ties at `sigmoid = 0.5` round down).
    pub fn lambda(&self, store: &ParamStore) -> Tensor {
        store.get(self.logits).map(|l| if sigmoid(l) > 0.5 { 1.0 } else { 0.0 })
    }

    /// Number of active diagonal entries.
    pub fn rank(&self, store: &ParamStore) -> usize {
        self.lambda(store).data().iter().filter(|v| **v == 1.0).count()
    }

    /// Apply the projector to `[B, n]` rows.
    pub fn project(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let z = self.g.forward(store, x)?;
        let masked = z.mul(&self.lambda(store))?;
        self.g.inverse(store, &masked)
    }

    /// `max_x |f(f(x)) - f(x)|_inf` over the rows of `x`.
    pub fn idempotency_residual(&self, store: &ParamStore, x: &Tensor) -> Result<f64> {
        let once = self.project(store, x)?;
        let twice = self.project(store, &once)?;
        Ok(twice.max_abs_diff(&once))
    }

    /// Build the projector loss on the tape. With `ste` the diagonal is the
    /// binarized `round(sigmoid(logits))` with straight-through gradients —
    /// the training objective. Without it the continuous `sigmoid(logits)`
    /// stands in, which makes the whole loss smooth so finite differences
    /// can validate the gradient path.
    pub fn loss_terms(&self, tape: &mut Tape, x: &Tensor, ste: bool) -> Result<IgnLossTerms> {
        let b = x.rows();
        if b == 0 {
            return Err(Error::Contract("projector batch is empty".into()));
        }
        if x.cols() != self.n {
            return Err(Error::shape(
                "ign_loss",
                format!("batch is {:?}, model dimension is {}", x.shape(), self.n),
            ));
        }
        let logits = tape.param(self.logits);
        let probs = tape.sigmoid(logits);
        let lam = if ste { tape.ste_binarize(probs) } else { probs };

        let xv = tape.constant(x.clone());
        let z = self.g.fwd(tape, xv)?;
        let masked = tape.mul(z, lam)?;
        let fx = self.g.inv(tape, masked)?;

        let rec = {
            let d = tape.sub(fx, xv)?;
            let sq = tape.mul(d, d)?;
            let rs = tape.row_sum(sq);
            tape.mean(rs)
        };

        let sparse = tape.mean(lam);

        // Isometry: per sample | |g(x) - g(0)|^2 - |x|^2 |, averaged. g(0)
        // is computed on the tape so the penalty also shapes g near zero.
        let iso = {
            let zero = tape.constant(Tensor::zeros(1, self.n));
            let g0 = self.g.fwd(tape, zero)?;
            let centered = tape.sub(z, g0)?;
            let zsq = tape.mul(centered, centered)?;
            let znorm = tape.row_sum(zsq);
            let xnorm = {
                let mut norms = Tensor::zeros(b, 1);
                for i in 0..b {
                    let s: f64 = x.row_slice(i).iter().map(|v| v * v).sum();
                    norms.set(i, 0, s);
                }
                tape.constant(norms)
            };
            let d = tape.sub(znorm, xnorm)?;
            let a = tape.abs(d);
            tape.mean(a)
        };

        let total = {
            let wr = tape.scale_const(rec, self.weights.rec);
            let ws = tape.scale_const(sparse, self.weights.sparse);
            let wi = tape.scale_const(iso, self.weights.iso);
            let s = tape.add(wr, ws)?;
            tape.add(s, wi)?
        };
        Ok(IgnLossTerms { rec, sparse, iso, total })
    }

    /// Evaluate the loss components without keeping the tape.
    pub fn loss(&self, store: &ParamStore, x: &Tensor, ste: bool) -> Result<IgnLossValues> {
        let mut tape = Tape::new(store);
        let terms = self.loss_terms(&mut tape, x, ste)?;
        Ok(IgnLossValues {
            rec: tape.value(terms.rec).item(),
            sparse: tape.value(terms.sparse).item(),
            iso: tape.value(terms.iso).item(),
            total: tape.value(terms.total).item(),
        })
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

/// Training hyperparameters for [`train_ign`].
#[derive(Clone, Debug)]
pub struct IgnTrainOptions {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub log_every: usize,
    /// Probes for the per-step idempotency audit, drawn once from
    /// `N(0, 9 I)`; the worst residual across all steps is reported.
    pub idempotency_probes: usize,
}

impl Default for IgnTrainOptions {
    fn default() -> Self {
        IgnTrainOptions { steps: 2_000, batch: 128, lr: 1e-3, log_every: 100, idempotency_probes: 64 }
    }
}

/// One logged training record.
#[derive(Clone, Copy, Debug)]
pub struct IgnLogRecord {
    pub step: usize,
    pub rec: f64,
    pub sparse: f64,
    pub iso: f64,
    pub total: f64,
    pub rank: usize,
}

/// Outcome of a projector training run. `max_idempotency` is the worst
/// `|f(f(x)) - f(x)|_inf` seen on the probe set at *any* step (including
/// before the first update) — the architectural-idempotency audit.
pub struct IgnTrainReport {
    pub initial: IgnLossValues,
    pub final_values: IgnLossValues,
    pub initial_rank: usize,
    pub final_rank: usize,
    pub max_idempotency: f64,
    pub logs: Vec<IgnLogRecord>,
}

/// Adam training loop for the projector on a `[P, n]` dataset.
pub fn train_ign(
    store: &mut ParamStore,
    model: &IgnModel,
    data: &Tensor,
    opts: &IgnTrainOptions,
    rng: &RngStream,
) -> Result<IgnTrainReport> {
    if data.rows() == 0 || data.cols() != model.dim() {
        return Err(Error::shape(
            "train_ign",
            format!("dataset is {:?}, model dimension is {}", data.shape(), model.dim()),
        ));
    }
    if opts.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut batch_rng = rng.substream(0x69676e); // "ign"
    let mut probe_rng = rng.substream(0x70726f6265); // "probe"
    let probes = probe_rng.normal_tensor(opts.idempotency_probes.max(1), model.dim()).scale(3.0);

    let eval_batch = data.gather_rows(&(0..data.rows().min(512)).collect::<Vec<_>>());
    let initial = model.loss(store, &eval_batch, true)?;
    let initial_rank = model.rank(store);
    let mut max_idem = model.idempotency_residual(store, &probes)?;

    let mut adam = Adam::new(store, opts.lr);
    let mut logs = Vec::new();
    if opts.steps == 0 {
        // No-op run: still log the evaluated loss once.
        logs.push(IgnLogRecord {
            step: 0,
            rec: initial.rec,
            sparse: initial.sparse,
            iso: initial.iso,
            total: initial.total,
            rank: initial_rank,
        });
    }
    for step in 1..=opts.steps {
        let idx: Vec<usize> = (0..opts.batch).map(|_| batch_rng.index(data.rows())).collect();
        let x = data.gather_rows(&idx);

        let mut tape = Tape::new(store);
        let terms = model.loss_terms(&mut tape, &x, true)?;
        let record = IgnLogRecord {
            step,
            rec: tape.value(terms.rec).item(),
            sparse: tape.value(terms.sparse).item(),
            iso: tape.value(terms.iso).item(),
            total: tape.value(terms.total).item(),
            rank: model.rank(store),
        };
        if !record.total.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite projector loss at step {step}: rec={} sparse={} iso={}",
                record.rec, record.sparse, record.iso
            )));
        }
        let grads = tape.backward(terms.total)?.into_param_grads();
        adam.step(store, &grads)?;

        max_idem = max_idem.max(model.idempotency_residual(store, &probes)?);
        if step == 1 || step % opts.log_every == 0 || step == opts.steps {
            logs.push(record);
        }
    }
    let final_values = model.loss(store, &eval_batch, true)?;
    Ok(IgnTrainReport {
        initial,
        final_values,
        initial_rank,
        final_rank: model.rank(store),
        max_idempotency: max_idem,
        logs,
    })
}
