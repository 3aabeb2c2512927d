//! Linearizers: nonlinear maps `f(x) = g_y^{-1}(A g_x(x))` built from invertible
//! coordinate maps `g_x`, `g_y` and a linear core `A`. Such maps are exactly
//! linear between the vector spaces induced by `g_x` and `g_y`, which makes
//! linear-algebra tooling (composition, transpose, SVD, pseudoinverse) and
//! one-step flow sampling available for a family of nonlinear functions.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`], [`rng`], [`autodiff`], [`optim`]: a small double-precision
//!   numeric core with a tape-based reverse-mode differentiator,
//! - [`nets`], [`maps`]: dense conditioner networks and invertible maps
//!   (couplings, ActNorm, Householder mixing, analytic bijections),
//! - [`induced`]: the vector-space structure a bijection induces on its domain,
//! - [`cores`], [`linearizer`], [`linalg`]: linear cores and the derived
//!   operator algebra,
//! - [`flow`], [`ign`]: flow-matching training/sampling with operator collapse,
//!   and architecturally idempotent generative projectors,
//! - [`data`], [`config`], [`checkpoint`], [`metrics`], [`tasks`]: datasets,
//!   run configuration, persistence, and the task entry points the CLI wraps.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod cores;
pub mod data;
mod fastmath;
pub mod flow;
pub mod ign;
pub mod induced;
pub mod linalg;
pub mod linearizer;
pub mod maps;
pub mod metrics;
pub mod nets;
pub mod optim;
pub mod rng;
pub mod tasks;
pub mod tensor;

/// Library-wide error type. The CLI maps these onto process exit codes
/// (usage/config -> 1, numeric -> 2, I/O -> 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    /// A precondition of the operator algebra is violated (e.g. composing
    /// through two different bases, or powering a non-shared-basis map).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A numeric failure: non-finite values, failed decomposition, or a
    /// verification residual exceeding its tolerance.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Invalid run configuration (bad field value, unknown key, missing file).
    #[error("config error: {0}")]
    Config(String),
    /// Malformed artifact file (checkpoint/CSV container contents).
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    /// An I/O error annotated with what was being done to which path.
    pub fn io(context: impl AsRef<str>, e: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", context.as_ref())))
    }
}

pub use autodiff::{grad_check, GradCheckReport, ParamId, ParamStore, Tape, VarId};
pub use cores::{interpolate_cores, LinearCore};
pub use flow::{train_flow, CollapsedOperator, FlowModel, FlowModelSpec, Scheme};
pub use ign::{train_ign, IgnModel, IgnModelSpec};
pub use induced::InducedSpace;
pub use linearizer::Linearizer;
pub use maps::InvertibleMap;
pub use rng::RngStream;
pub use tensor::Tensor;
