//! `linearizer` — train, sample, verify, and transform models whose
//! nonlinearity lives entirely in a change of coordinates.
//!
//! Every flag mirrors a config-file field; `--config file.json` loads the
//! file first and explicit flags override it. The output directory resolves
//! as `--out-dir` flag, then `LINEARIZER_OUT_DIR`, then the config value.
//! Exit codes: 0 success, 1 usage/config error, 2 numeric or contract
//! failure, 3 I/O or file-format failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linearizer_core::config::Config;
use linearizer_core::tasks::{self, TaskContext};
use linearizer_core::Error;

#[derive(Parser)]
#[command(
    name = "linearizer",
    version,
    about = "Nonlinear maps that are exactly linear between induced vector spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: CommonOpts,
}

#[derive(Subcommand)]
enum Command {
    /// Run the operator-algebra property suite on fresh random models
    Verify,
    /// Train the flow-matching model on a 2D dataset
    TrainFlow,
    /// Draw samples from a trained flow (iterative by default)
    Sample {
        /// Sample through the collapsed one-step operator
        #[arg(long)]
        one_step: bool,
    },
    /// Collapse the velocity schedule into a single linear operator
    Collapse,
    /// Encode points through the collapsed flow and reconstruct them
    Invert,
    /// Interpolate between two points in code space
    Interp,
    /// Train the idempotent projector
    TrainIgn,
    /// Project points through a trained projector
    Project,
    /// Fit (--fit) or apply two style operators over one shared basis
    StyleInterp {
        /// Fit the two style cores instead of applying saved ones
        #[arg(long)]
        fit: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::TrainFlow => "train-flow",
            Command::Sample { .. } => "sample",
            Command::Collapse => "collapse",
            Command::Invert => "invert",
            Command::Interp => "interp",
            Command::TrainIgn => "train-ign",
            Command::Project => "project",
            Command::StyleInterp { .. } => "style-interp",
        }
    }

    /// For tasks that only integrate (no training), a bare `--steps` means
    /// the number of integration steps.
    fn steps_means_integration(&self) -> bool {
        matches!(
            self,
            Command::Sample { .. } | Command::Collapse | Command::Invert | Command::Interp
        )
    }
}

#[derive(Args)]
struct CommonOpts {
    /// JSON config file (strict schema); flags override its fields
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for all artifacts
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<String>,
    /// RNG seed for the whole run
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dataset: two-moons, eight-gaussians, or checkerboard
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Number of dataset points to generate
    #[arg(long, global = true)]
    n_points: Option<usize>,
    /// Data dimension for the flow model
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Coupling blocks in each invertible map
    #[arg(long, global = true)]
    blocks: Option<usize>,
    /// Hidden width of the coupling networks
    #[arg(long, global = true)]
    hidden: Option<usize>,
    /// Rank of the time-dependent core
    #[arg(long, global = true)]
    rank: Option<usize>,
    /// Coupling kind: additive or affine
    #[arg(long, global = true)]
    coupling: Option<String>,
    /// Training steps (for sample/collapse/invert/interp: integration steps)
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Training batch size
    #[arg(long, global = true)]
    batch: Option<usize>,
    /// Adam learning rate
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Log metrics every this many steps
    #[arg(long, global = true)]
    log_every: Option<usize>,
    /// Measure the flow-matching loss in data space instead of latent space
    #[arg(long, global = true)]
    data_space_loss: bool,
    /// Weight of the endpoint-alignment stabilizer
    #[arg(long, global = true)]
    align_weight: Option<f64>,
    /// Weight of the endpoint reconstruction term
    #[arg(long, global = true)]
    recon_weight: Option<f64>,
    /// Integration steps for iterative sampling
    #[arg(long, global = true)]
    sample_steps: Option<usize>,
    /// Integration scheme: euler or rk4
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Number of points to sample, invert, or project
    #[arg(long, global = true)]
    n_samples: Option<usize>,
    /// Ambient dimension of the projector
    #[arg(long, global = true)]
    ign_dim: Option<usize>,
    /// Projector reconstruction weight
    #[arg(long, global = true)]
    w_rec: Option<f64>,
    /// Projector sparsity (rank) weight
    #[arg(long, global = true)]
    w_sparse: Option<f64>,
    /// Projector isometry weight
    #[arg(long, global = true)]
    w_iso: Option<f64>,
    /// Interpolation coefficient for interp
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Comma-separated alpha grid for style-interp
    #[arg(long, global = true)]
    alphas: Option<String>,
    /// Interpolate codes linearly in ambient coordinates
    #[arg(long, global = true)]
    euclidean_codes: bool,
    /// Checkpoint path (read or write, task-dependent)
    #[arg(long, global = true, value_name = "FILE")]
    checkpoint: Option<String>,
    /// Second checkpoint path (style-interp)
    #[arg(long, global = true, value_name = "FILE")]
    checkpoint_b: Option<String>,
    /// Input points CSV
    #[arg(long, global = true, value_name = "FILE")]
    input: Option<String>,
}

impl CommonOpts {
    fn merge_into(&self, cfg: &mut Config) -> linearizer_core::Result<()> {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(s) = &self.dataset {
            cfg.dataset = s.parse()?;
        }
        if let Some(v) = self.n_points {
            cfg.n_points = v;
        }
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.blocks {
            cfg.blocks = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.rank {
            cfg.rank = v;
        }
        if let Some(s) = &self.coupling {
            cfg.coupling = s.parse()?;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.batch {
            cfg.batch = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.log_every {
            cfg.log_every = v;
        }
        if self.data_space_loss {
            cfg.data_space_loss = true;
        }
        if let Some(v) = self.align_weight {
            cfg.align_weight = v;
        }
        if let Some(v) = self.recon_weight {
            cfg.recon_weight = v;
        }
        if let Some(v) = self.sample_steps {
            cfg.sample_steps = v;
        }
        if let Some(s) = &self.scheme {
            cfg.scheme = s.parse()?;
        }
        if let Some(v) = self.n_samples {
            cfg.n_samples = v;
        }
        if let Some(v) = self.ign_dim {
            cfg.ign_dim = v;
        }
        if let Some(v) = self.w_rec {
            cfg.w_rec = v;
        }
        if let Some(v) = self.w_sparse {
            cfg.w_sparse = v;
        }
        if let Some(v) = self.w_iso {
            cfg.w_iso = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(s) = &self.alphas {
            let mut grid = Vec::new();
            for part in s.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let v: f64 = part
                    .parse()
                    .map_err(|_| Error::Config(format!("alphas: '{part}' is not a number")))?;
                grid.push(v);
            }
            cfg.alphas = grid;
        }
        if self.euclidean_codes {
            cfg.euclidean_codes = true;
        }
        if let Some(s) = &self.checkpoint {
            cfg.checkpoint = Some(s.clone());
        }
        if let Some(s) = &self.checkpoint_b {
            cfg.checkpoint_b = Some(s.clone());
        }
        if let Some(s) = &self.input {
            cfg.input = Some(s.clone());
        }
        Ok(())
    }
}

fn run(cli: &Cli) -> linearizer_core::Result<serde_json::Value> {
    let mut cfg = match &cli.opts.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    cli.opts.merge_into(&mut cfg)?;
    if cli.command.steps_means_integration() {
        if let (Some(steps), None) = (cli.opts.steps, cli.opts.sample_steps) {
            cfg.sample_steps = steps;
        }
    }
    cfg.validate()?;
    if let Some(task) = &cfg.task {
        if task != cli.command.name() {
            return Err(Error::Config(format!(
                "task: config names '{task}' but the '{}' subcommand was invoked",
                cli.command.name()
            )));
        }
    }

    let out_dir = cfg.resolved_out_dir(cli.opts.out_dir.as_deref());
    let ctx = TaskContext::new(cfg, out_dir);
    match cli.command {
        Command::Verify => tasks::run_verify(&ctx),
        Command::TrainFlow => tasks::run_train_flow(&ctx),
        Command::Sample { one_step } => tasks::run_sample(&ctx, one_step),
        Command::Collapse => tasks::run_collapse(&ctx),
        Command::Invert => tasks::run_invert(&ctx),
        Command::Interp => tasks::run_interp(&ctx),
        Command::TrainIgn => tasks::run_train_ign(&ctx),
        Command::Project => tasks::run_project(&ctx),
        Command::StyleInterp { fit } => {
            if fit {
                tasks::run_style_fit(&ctx)
            } else {
                tasks::run_style_apply(&ctx)
            }
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Numeric(_) | Error::Contract(_) | Error::Shape { .. } => 2,
        Error::Io(_) | Error::Format(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
