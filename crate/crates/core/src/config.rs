//! Run configuration: a strict JSON schema shared by every CLI task.
//!
//! Unknown keys are rejected outright so a typo cannot silently fall back to
//! a default. Every field has a default, so `{}` is a valid config and flags
//! can override any subset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DatasetKind;
use crate::flow::{FlowLossWeights, FlowModelSpec, FlowTrainOptions, Scheme};
use crate::ign::{IgnLossWeights, IgnModelSpec, IgnTrainOptions};
use crate::maps::CouplingKind;
use crate::{Error, Result};

/// Environment variable that overrides the output directory (beaten only by
/// an explicit `--out-dir` flag).
pub const OUT_DIR_ENV: &str = "LINEARIZER_OUT_DIR";

/// The default evaluation grid for style interpolation.
pub fn default_alphas() -> Vec<f64> {
    vec![0.0, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Optional task pin; when present it must match the invoked subcommand.
    pub task: Option<String>,

    // Data.
    pub seed: u64,
    pub dataset: DatasetKind,
    pub n_points: usize,

    // Model.
    pub dim: usize,
    pub blocks: usize,
    pub hidden: usize,
    pub rank: usize,
    pub coupling: CouplingKind,

    // Training.
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub log_every: usize,

    // Flow loss.
    pub data_space_loss: bool,
    pub align_weight: f64,
    pub recon_weight: f64,

    // Sampler.
    pub sample_steps: usize,
    pub scheme: Scheme,
    pub n_samples: usize,

    // Projector.
    pub ign_dim: usize,
    pub w_rec: f64,
    pub w_sparse: f64,
    pub w_iso: f64,

    // Interpolation.
    pub alpha: f64,
    pub alphas: Vec<f64>,
    /// Combine inverted codes in plain Euclidean coordinates instead of the
    /// induced space.
    pub euclidean_codes: bool,

    // Paths.
    pub out_dir: String,
    pub checkpoint: Option<String>,
    pub checkpoint_b: Option<String>,
    pub input: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            task: None,
            seed: 7,
            dataset: DatasetKind::TwoMoons,
            n_points: 4000,
            dim: 2,
            blocks: 6,
            hidden: 64,
            rank: 16,
            coupling: CouplingKind::Affine,
            steps: 20_000,
            batch: 128,
            lr: 1e-3,
            log_every: 100,
            data_space_loss: false,
            align_weight: 1.0,
            recon_weight: 0.0,
            sample_steps: 100,
            scheme: Scheme::Euler,
            n_samples: 1000,
            ign_dim: 16,
            w_rec: 1.0,
            w_sparse: 0.75,
            w_iso: 0.001,
            alpha: 0.5,
            alphas: default_alphas(),
            euclidean_codes: false,
            out_dir: "out".into(),
            checkpoint: None,
            checkpoint_b: None,
            input: None,
        }
    }
}

impl Config {
    /// Parse a strict-JSON config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Parse config JSON (strict: unknown fields are errors).
    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    /// Reject values no task could run with.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: usize) -> Result<()> {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
            Ok(())
        }
        // steps = 0 is a valid no-op training run (checkpoint of the
        // initialized model), so it is deliberately not checked here.
        positive("n_points", self.n_points)?;
        positive("dim", self.dim)?;
        positive("blocks", self.blocks)?;
        positive("hidden", self.hidden)?;
        positive("rank", self.rank)?;
        positive("batch", self.batch)?;
        positive("log_every", self.log_every)?;
        positive("sample_steps", self.sample_steps)?;
        positive("n_samples", self.n_samples)?;
        positive("ign_dim", self.ign_dim)?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("lr must be a positive finite number".into()));
        }
        for (name, v) in [
            ("align_weight", self.align_weight),
            ("recon_weight", self.recon_weight),
            ("w_rec", self.w_rec),
            ("w_sparse", self.w_sparse),
            ("w_iso", self.w_iso),
            ("alpha", self.alpha),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("alphas must be a nonempty list of finite numbers".into()));
        }
        Ok(())
    }

    /// Output directory with the documented precedence:
    /// `--out-dir` flag, then `LINEARIZER_OUT_DIR`, then the config value.
    pub fn resolved_out_dir(&self, flag: Option<&str>) -> PathBuf {
        if let Some(f) = flag {
            return PathBuf::from(f);
        }
        if let Ok(env) = std::env::var(OUT_DIR_ENV) {
            if !env.is_empty() {
                return PathBuf::from(env);
            }
        }
        PathBuf::from(&self.out_dir)
    }

    /// Resolve a configured path against the output directory (absolute
    /// paths pass through).
    pub fn resolve_path(&self, out_dir: &Path, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        if p.is_absolute() {
            p
        } else {
            out_dir.join(p)
        }
    }

    pub fn flow_model_spec(&self) -> FlowModelSpec {
        FlowModelSpec {
            dim: self.dim,
            blocks: self.blocks,
            hidden: self.hidden,
            rank: self.rank,
            coupling: self.coupling,
            hyper_hidden: self.hidden,
        }
    }

    pub fn flow_train_options(&self) -> FlowTrainOptions {
        FlowTrainOptions {
            steps: self.steps,
            batch: self.batch,
            lr: self.lr,
            log_every: self.log_every,
            weights: FlowLossWeights {
                data_space: self.data_space_loss,
                align: self.align_weight,
                recon: self.recon_weight,
            },
            eval_batch: 512,
        }
    }

    pub fn ign_model_spec(&self) -> IgnModelSpec {
        IgnModelSpec {
            dim: self.ign_dim,
            blocks: self.blocks,
            hidden: self.hidden,
            coupling: CouplingKind::Additive,
            weights: IgnLossWeights { rec: self.w_rec, sparse: self.w_sparse, iso: self.w_iso },
        }
    }

    pub fn ign_train_options(&self) -> IgnTrainOptions {
        IgnTrainOptions {
            steps: self.steps,
            batch: self.batch,
            lr: self.lr,
            log_every: self.log_every,
            idempotency_probes: 64,
        }
    }

    /// Serialize for embedding into checkpoints and reports.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
