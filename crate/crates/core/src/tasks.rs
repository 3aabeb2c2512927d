//! Task implementations behind the CLI subcommands. Each task reads the
//! merged configuration, writes its artifacts (atomically) under the output
//! directory, and returns a machine-readable JSON summary.

use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde_json::{json, Value};

use crate::autodiff::{ParamStore, Tape};
use crate::checkpoint::{self, LoadedCheckpoint};
use crate::config::Config;
use crate::cores::{interpolate_cores, LinearCore};
use crate::data;
use crate::flow::{self, FlowModel, SamplePath, Scheme, TIME_FEATURES};
use crate::ign::IgnModel;
use crate::linalg;
use crate::linearizer::Linearizer;
use crate::maps::{CouplingKind, InvertibleMap};
use crate::metrics::MetricsFile;
use crate::nets::{Activation, Mlp};
use crate::optim::Adam;
use crate::rng::RngStream;
use crate::tensor::Tensor;
use crate::{Error, Result};

// Substream tags, one per distinct random role.
const TAG_DATA: u64 = 0x64617461; // "data"
const TAG_INIT: u64 = 0x696e6974; // "init"
const TAG_TRAIN: u64 = 0x7472616e; // "tran"
const TAG_PRIOR: u64 = 0x7072696f; // "prio"
const TAG_HELDOUT: u64 = 0x68656c64; // "held"
const TAG_VERIFY: u64 = 0x76657279; // "very"

/// Everything a task needs: the merged config and the resolved output
/// directory.
pub struct TaskContext {
    pub config: Config,
    pub out_dir: PathBuf,
}

impl TaskContext {
    pub fn new(config: Config, out_dir: PathBuf) -> Self {
        TaskContext { config, out_dir }
    }

    fn prepare(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| Error::io(format!("create {}", self.out_dir.display()), e))
    }

    fn rng(&self, tag: u64) -> RngStream {
        RngStream::new(self.config.seed).substream(tag)
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn checkpoint_path(&self, default_name: &str) -> PathBuf {
        match &self.config.checkpoint {
            Some(p) => self.config.resolve_path(&self.out_dir, p),
            None => self.out_path(default_name),
        }
    }

    fn checkpoint_b_path(&self, default_name: &str) -> PathBuf {
        match &self.config.checkpoint_b {
            Some(p) => self.config.resolve_path(&self.out_dir, p),
            None => self.out_path(default_name),
        }
    }

    /// The built-in dataset named by the config (always 2D).
    fn dataset(&self, tag: u64, n: usize) -> Result<Tensor> {
        data::dataset(self.config.dataset, n, &mut self.rng(tag))
    }

    /// Input points: the `input` CSV when configured, otherwise `n` fresh
    /// held-out draws of the configured dataset.
    fn input_points(&self, n: usize, want_cols: usize) -> Result<Tensor> {
        match &self.config.input {
            Some(p) => {
                let path = self.config.resolve_path(&self.out_dir, p);
                let t = data::read_points_csv(&path)?;
                if t.cols() != want_cols {
                    return Err(Error::shape(
                        "input",
                        format!("{} has {} columns, expected {want_cols}", path.display(), t.cols()),
                    ));
                }
                Ok(t)
            }
            None => {
                if want_cols != 2 {
                    return Err(Error::Config(format!(
                        "built-in datasets are 2-dimensional; supply --input for dimension {want_cols}"
                    )));
                }
                self.dataset(TAG_HELDOUT, n)
            }
        }
    }
}

/// Write a CSV with `{:?}`-formatted floats (shortest lossless repr).
fn write_csv(path: &Path, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut text = columns.join(",");
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    checkpoint::atomic_write_bytes(path, text.as_bytes())
}

fn coord_columns(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|j| format!("{prefix}_{j}")).collect()
}

/// Per-row infinity norm of `a - b`.
fn rows_inf_diff(a: &Tensor, b: &Tensor) -> Vec<f64> {
    (0..a.rows())
        .map(|i| {
            a.row_slice(i)
                .iter()
                .zip(b.row_slice(i))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max)
        })
        .collect()
}

/// Rebuild a flow model from a checkpoint: construct the architecture the
/// header describes, then restore every parameter bit-exactly.
pub fn load_flow_model(path: &Path) -> Result<(ParamStore, FlowModel, LoadedCheckpoint)> {
    let loaded = checkpoint::load(path)?;
    if loaded.header.kind != "flow" {
        return Err(Error::Contract(format!(
            "{} is a '{}' checkpoint, expected 'flow'",
            path.display(),
            loaded.header.kind
        )));
    }
    let hcfg = &loaded.header.config;
    let mut store = ParamStore::new();
    // The init stream only shapes placeholder values; restore overwrites all.
    let mut rng = RngStream::new(hcfg.seed).substream(TAG_INIT);
    let model = FlowModel::new(&mut store, &mut rng, &hcfg.flow_model_spec())?;
    loaded.restore_into(&mut store)?;
    Ok((store, model, loaded))
}

/// Rebuild a projector model from a checkpoint.
pub fn load_ign_model(path: &Path) -> Result<(ParamStore, IgnModel, LoadedCheckpoint)> {
    let loaded = checkpoint::load(path)?;
    if loaded.header.kind != "ign" {
        return Err(Error::Contract(format!(
            "{} is a '{}' checkpoint, expected 'ign'",
            path.display(),
            loaded.header.kind
        )));
    }
    let hcfg = &loaded.header.config;
    let mut store = ParamStore::new();
    let mut rng = RngStream::new(hcfg.seed).substream(TAG_INIT);
    let model = IgnModel::new(&mut store, &mut rng, &hcfg.ign_model_spec())?;
    loaded.restore_into(&mut store)?;
    Ok((store, model, loaded))
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(serde::Serialize)]
struct CheckRow {
    name: String,
    residual: f64,
    tolerance: f64,
    pass: bool,
}

fn push_check(checks: &mut Vec<CheckRow>, name: impl Into<String>, residual: f64, tol: f64) {
    let name = name.into();
    checks.push(CheckRow { name, residual, tolerance: tol, pass: residual.is_finite() && residual < tol });
}

/// Run the full property suite on fresh random models and write
/// `verify.json`. Fails (numeric error) iff any residual exceeds tolerance.
pub fn run_verify(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let mut rng = ctx.rng(TAG_VERIFY);
    let mut checks: Vec<CheckRow> = Vec::new();

    // 1. Vector-space axioms for identity, cube, and a 6-block coupling map.
    {
        let mut store = ParamStore::new();
        let maps: Vec<(&str, InvertibleMap)> = vec![
            ("identity", InvertibleMap::identity(2)),
            ("cube", InvertibleMap::cube(2)),
            (
                "coupling",
                InvertibleMap::coupling_stack(
                    &mut store,
                    &mut rng,
                    "vg",
                    2,
                    6,
                    CouplingKind::Affine,
                    64,
                )?,
            ),
        ];
        for (name, map) in maps {
            let space = crate::induced::InducedSpace::new(Rc::new(map));
            let report = space.axiom_suite(&store, &mut rng, 1000, 2.0)?;
            for ax in &report.axioms {
                push_check(&mut checks, format!("axioms.{name}.{}", ax.axiom), ax.residual, 1e-6);
            }
        }
    }

    // Shared fixtures: a coupling pair for the 2D operator checks.
    let mut store = ParamStore::new();
    let gx = Rc::new(InvertibleMap::coupling_stack(
        &mut store,
        &mut rng,
        "gx",
        2,
        2,
        CouplingKind::Affine,
        16,
    )?);
    let gy = Rc::new(InvertibleMap::coupling_stack(
        &mut store,
        &mut rng,
        "gy",
        2,
        2,
        CouplingKind::Additive,
        16,
    )?);

    // 2. Superposition for every core variant.
    {
        let dense_w = store.add("dense.w", rng.normal_tensor(2, 2).scale(0.6));
        let lr_a1 = store.add("lowrank.a1", rng.normal_tensor(2, 1).scale(0.8));
        let lr_a2 = store.add("lowrank.a2", rng.normal_tensor(1, 2).scale(0.8));
        let diag_d = store.add("diag.d", rng.normal_tensor(1, 2));
        let bin_l = store.add("bin.logits", Tensor::row(vec![1.3, -0.7]));
        let hyper = Rc::new(Mlp::new(
            &mut store,
            &mut rng,
            "vhyper",
            &[TIME_FEATURES, 16, 16, 8],
            Activation::Softplus,
        ));
        let feats = flow::time_features(&Tensor::row(vec![0.37]), TIME_FEATURES);
        let cores: Vec<(&str, LinearCore)> = vec![
            ("raw", LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.7))),
            ("dense", LinearCore::Dense { w: dense_w }),
            ("low_rank", LinearCore::LowRank { a1: lr_a1, a2: lr_a2 }),
            ("diagonal", LinearCore::Diagonal { d: diag_d }),
            ("binary_diagonal", LinearCore::BinaryDiagonal { logits: bin_l }),
            ("hyper", LinearCore::HyperAt { net: hyper, feats, n: 2, r: 2 }),
        ];
        for (name, core) in cores {
            let f = Linearizer::new(&store, gx.clone(), gy.clone(), core)?;
            let trials = 1000;
            let x1 = rng.ball_tensor(trials, 2, 2.0);
            let x2 = rng.ball_tensor(trials, 2, 2.0);
            let a1 = rng.uniform_col(trials, -2.0, 2.0);
            let a2 = rng.uniform_col(trials, -2.0, 2.0);
            let r = f.superposition_residual(&store, &x1, &x2, &a1, &a2)?;
            push_check(&mut checks, format!("superposition.{name}"), r, 1e-6);
        }
    }

    // 3. Composition vs sequential application.
    {
        let f1 = Linearizer::new(
            &store,
            gx.clone(),
            gy.clone(),
            LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.7)),
        )?;
        let f2 = Linearizer::new(
            &store,
            gy.clone(),
            gx.clone(),
            LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.7)),
        )?;
        let c = Linearizer::compose(&store, &f2, &f1)?;
        let probes = rng.ball_tensor(100, 2, 2.0);
        let direct = c.apply(&store, &probes)?;
        let seq = f2.apply(&store, &f1.apply(&store, &probes)?)?;
        push_check(&mut checks, "composition", direct.max_abs_diff(&seq), 1e-8);
    }

    // 4. Operator power (shared basis).
    {
        let f = Linearizer::from_shared(
            &store,
            gx.clone(),
            LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.45)),
        )?;
        let p5 = f.power(&store, 5)?;
        let probes = rng.ball_tensor(100, 2, 2.0);
        let direct = p5.apply(&store, &probes)?;
        let mut seq = probes.clone();
        for _ in 0..5 {
            seq = f.apply(&store, &seq)?;
        }
        push_check(&mut checks, "power5", direct.max_abs_diff(&seq), 1e-6);
    }

    // 5-6. Adjoint identity and SVD transport on a fresh operator.
    {
        let f = Linearizer::new(
            &store,
            gx.clone(),
            gy.clone(),
            LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.8)),
        )?;
        let x = rng.ball_tensor(1000, 2, 2.0);
        let y = rng.ball_tensor(1000, 2, 2.0);
        push_check(&mut checks, "adjoint", f.adjoint_residual(&store, &x, &y)?, 1e-8);

        let svd = f.svd(&store)?;
        push_check(&mut checks, "svd.transport", f.svd_transport_residual(&store, &svd)?, 1e-6);
        let (gv, gu) = f.svd_gram_residual(&store, &svd)?;
        push_check(&mut checks, "svd.gram", gv.max(gu), 1e-8);
    }

    // 7. Penrose equations and null space for a rank-2-of-4 core with
    // coupling maps on both sides.
    {
        let gx4 = Rc::new(InvertibleMap::coupling_stack(
            &mut store,
            &mut rng,
            "gx4",
            4,
            2,
            CouplingKind::Affine,
            16,
        )?);
        let gy4 = Rc::new(InvertibleMap::coupling_stack(
            &mut store,
            &mut rng,
            "gy4",
            4,
            2,
            CouplingKind::Additive,
            16,
        )?);
        let a = linalg::random_with_rank(&mut rng, 4, 4, 2)?;
        let f = Linearizer::new(&store, gx4.clone(), gy4.clone(), LinearCore::Raw(a))?;
        let fd = f.pinv(&store)?;
        let pr = f.penrose_residuals(&store, &fd, 250, &mut rng)?;
        for (i, r) in pr.iter().enumerate() {
            push_check(&mut checks, format!("penrose.{}", i + 1), *r, 1e-6);
        }
        push_check(&mut checks, "nullspace", f.nullspace_residual(&store, &mut rng, 200)?, 1e-6);
    }

    let all_pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "task": "verify",
        "seed": ctx.config.seed,
        "pass": all_pass,
        "checks": serde_json::to_value(&checks).expect("checks encode"),
    });
    let path = ctx.out_path("verify.json");
    checkpoint::atomic_write_bytes(
        &path,
        (serde_json::to_string_pretty(&report).expect("report encodes") + "\n").as_bytes(),
    )?;
    if !all_pass {
        let failing: Vec<String> = checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} ({:.3e} >= {:.0e})", c.name, c.residual, c.tolerance))
            .collect();
        return Err(Error::Numeric(format!(
            "verification failed: {} (full report at {})",
            failing.join(", "),
            path.display()
        )));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// train-flow
// ---------------------------------------------------------------------------

pub fn run_train_flow(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    if cfg.dim != 2 && cfg.input.is_none() {
        return Err(Error::Config(format!(
            "built-in datasets are 2-dimensional; dim = {} needs --input",
            cfg.dim
        )));
    }
    let train_data = match &cfg.input {
        Some(p) => {
            let path = cfg.resolve_path(&ctx.out_dir, p);
            let t = data::read_points_csv(&path)?;
            if t.cols() != cfg.dim {
                return Err(Error::shape(
                    "train-flow",
                    format!("{} has {} columns, dim is {}", path.display(), t.cols(), cfg.dim),
                ));
            }
            t
        }
        None => ctx.dataset(TAG_DATA, cfg.n_points)?,
    };

    let mut store = ParamStore::new();
    let mut init_rng = ctx.rng(TAG_INIT);
    let model = FlowModel::new(&mut store, &mut init_rng, &cfg.flow_model_spec())?;
    let train_rng = ctx.rng(TAG_TRAIN);
    let report = flow::train_flow(&mut store, &model, &train_data, &cfg.flow_train_options(), &train_rng)?;

    let mut metrics = MetricsFile::new();
    for l in &report.logs {
        metrics.record(
            l.step as u64,
            &[
                ("main", l.main.into()),
                ("align", l.align.into()),
                ("recon", l.recon.into()),
                ("total", l.total.into()),
            ],
        )?;
    }
    let metrics_path = ctx.out_path("metrics_flow.jsonl");
    metrics.write(&metrics_path)?;

    let ckpt_path = ctx.checkpoint_path("flow.ckpt");
    checkpoint::save(&ckpt_path, "flow", cfg, RngStream::new(cfg.seed).state(), &store)?;

    Ok(json!({
        "task": "train-flow",
        "steps": cfg.steps,
        "initial_main": report.initial_main,
        "final_main": report.final_main,
        "loss_ratio": if report.initial_main > 0.0 { report.final_main / report.initial_main } else { 0.0 },
        "checkpoint": ckpt_path.display().to_string(),
        "metrics": metrics_path.display().to_string(),
        "model_checksum": model.checksum(&store),
    }))
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

pub fn run_sample(ctx: &TaskContext, one_step: bool) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let ckpt_path = ctx.checkpoint_path("flow.ckpt");
    let (store, model, _) = load_flow_model(&ckpt_path)?;

    let x0 = ctx.rng(TAG_PRIOR).normal_tensor(cfg.n_samples, model.dim());
    let n = cfg.sample_steps;
    let x1 = if one_step {
        let op = model.collapse(&store, n, cfg.scheme)?;
        model.one_step_sample(&store, &op.b, &x0)?
    } else {
        match cfg.scheme {
            Scheme::Euler => model.euler_sample(&store, &x0, n, SamplePath::Latent)?,
            Scheme::Rk4 => model.rk4_sample(&store, &x0, n)?,
        }
    };

    let mut columns = coord_columns("prior", model.dim());
    columns.extend(coord_columns("sample", model.dim()));
    let rows: Vec<Vec<f64>> = (0..x0.rows())
        .map(|i| {
            let mut row = x0.row_slice(i).to_vec();
            row.extend_from_slice(x1.row_slice(i));
            row
        })
        .collect();
    let out = ctx.out_path("samples.csv");
    write_csv(&out, &columns, &rows)?;

    Ok(json!({
        "task": "sample",
        "n_samples": cfg.n_samples,
        "steps": n,
        "scheme": cfg.scheme.to_string(),
        "one_step": one_step,
        "output": out.display().to_string(),
    }))
}

// ---------------------------------------------------------------------------
// collapse
// ---------------------------------------------------------------------------

pub fn run_collapse(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let ckpt_path = ctx.checkpoint_path("flow.ckpt");
    let (store, model, _) = load_flow_model(&ckpt_path)?;
    let op = model.collapse(&store, cfg.sample_steps, cfg.scheme)?;

    let matrix: Vec<Vec<f64>> =
        (0..op.b.rows()).map(|i| op.b.row_slice(i).to_vec()).collect();
    let doc = json!({
        "scheme": op.scheme.to_string(),
        "steps": op.steps,
        "dim": model.dim(),
        "model_checksum": op.model_checksum,
        "effective_rank": linalg::effective_rank(&op.b)?,
        "matrix": matrix,
    });
    let out = ctx.out_path("collapsed.json");
    checkpoint::atomic_write_bytes(
        &out,
        (serde_json::to_string_pretty(&doc).expect("operator encodes") + "\n").as_bytes(),
    )?;

    Ok(json!({
        "task": "collapse",
        "steps": op.steps,
        "scheme": op.scheme.to_string(),
        "effective_rank": linalg::effective_rank(&op.b)?,
        "output": out.display().to_string(),
    }))
}

// ---------------------------------------------------------------------------
// invert
// ---------------------------------------------------------------------------

pub fn run_invert(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let ckpt_path = ctx.checkpoint_path("flow.ckpt");
    let (store, model, _) = load_flow_model(&ckpt_path)?;
    let op = model.collapse(&store, cfg.sample_steps, cfg.scheme)?;

    let x = ctx.input_points(cfg.n_samples, model.dim())?;
    let codes = model.encode(&store, &op.b, &x)?;
    let recon = model.one_step_sample(&store, &op.b, &codes)?;
    let residuals = rows_inf_diff(&recon, &x);
    let max_residual = residuals.iter().copied().fold(0.0f64, f64::max);

    let mut columns = coord_columns("x", model.dim());
    columns.extend(coord_columns("code", model.dim()));
    columns.extend(coord_columns("recon", model.dim()));
    columns.push("residual".into());
    let rows: Vec<Vec<f64>> = (0..x.rows())
        .map(|i| {
            let mut row = x.row_slice(i).to_vec();
            row.extend_from_slice(codes.row_slice(i));
            row.extend_from_slice(recon.row_slice(i));
            row.push(residuals[i]);
            row
        })
        .collect();
    let out = ctx.out_path("inverted.csv");
    write_csv(&out, &columns, &rows)?;

    Ok(json!({
        "task": "invert",
        "points": x.rows(),
        "steps": cfg.sample_steps,
        "scheme": cfg.scheme.to_string(),
        "max_residual": max_residual,
        "output": out.display().to_string(),
    }))
}

// ---------------------------------------------------------------------------
// interp
// ---------------------------------------------------------------------------

pub fn run_interp(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let ckpt_path = ctx.checkpoint_path("flow.ckpt");
    let (store, model, _) = load_flow_model(&ckpt_path)?;
    let op = model.collapse(&store, cfg.sample_steps, cfg.scheme)?;

    let pts = ctx.input_points(2, model.dim())?;
    if pts.rows() < 2 {
        return Err(Error::Contract("interpolation needs at least two input points".into()));
    }
    let x1 = pts.gather_rows(&[0]);
    let x2 = pts.gather_rows(&[1]);
    let out_pt =
        model.latent_interpolate(&store, &op.b, &x1, &x2, cfg.alpha, cfg.euclidean_codes)?;

    let mut columns = vec!["alpha".to_string()];
    columns.extend(coord_columns("x1", model.dim()));
    columns.extend(coord_columns("x2", model.dim()));
    columns.extend(coord_columns("out", model.dim()));
    let mut row = vec![cfg.alpha];
    row.extend_from_slice(x1.row_slice(0));
    row.extend_from_slice(x2.row_slice(0));
    row.extend_from_slice(out_pt.row_slice(0));
    let out = ctx.out_path("interp.csv");
    write_csv(&out, &columns, &[row])?;

    Ok(json!({
        "task": "interp",
        "alpha": cfg.alpha,
        "euclidean_codes": cfg.euclidean_codes,
        "output": out.display().to_string(),
    }))
}

// ---------------------------------------------------------------------------
// train-ign
// ---------------------------------------------------------------------------

pub fn run_train_ign(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let raw = ctx.dataset(TAG_DATA, cfg.n_points)?;
    let padded = data::zero_pad(&raw, cfg.ign_dim)?;

    let mut store = ParamStore::new();
    let mut init_rng = ctx.rng(TAG_INIT);
    let model = IgnModel::new(&mut store, &mut init_rng, &cfg.ign_model_spec())?;
    let train_rng = ctx.rng(TAG_TRAIN);
    let report = crate::ign::train_ign(&mut store, &model, &padded, &cfg.ign_train_options(), &train_rng)?;

    let mut metrics = MetricsFile::new();
    for l in &report.logs {
        metrics.record(
            l.step as u64,
            &[
                ("rec", l.rec.into()),
                ("sparse", l.sparse.into()),
                ("iso", l.iso.into()),
                ("total", l.total.into()),
                ("rank", l.rank.into()),
            ],
        )?;
    }
    let metrics_path = ctx.out_path("metrics_ign.jsonl");
    metrics.write(&metrics_path)?;

    let ckpt_path = ctx.checkpoint_path("ign.ckpt");
    checkpoint::save(&ckpt_path, "ign", cfg, RngStream::new(cfg.seed).state(), &store)?;

    Ok(json!({
        "task": "train-ign",
        "steps": cfg.steps,
        "initial_rank": report.initial_rank,
        "final_rank": report.final_rank,
        "max_idempotency": report.max_idempotency,
        "initial_total": report.initial.total,
        "final_total": report.final_values.total,
        "checkpoint": ckpt_path.display().to_string(),
        "metrics": metrics_path.display().to_string(),
    }))
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

pub fn run_project(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let ckpt_path = ctx.checkpoint_path("ign.ckpt");
    let (store, model, _) = load_ign_model(&ckpt_path)?;

    // Accept either native-width points or 2D points to embed.
    let x = match &cfg.input {
        Some(p) => {
            let path = cfg.resolve_path(&ctx.out_dir, p);
            let t = data::read_points_csv(&path)?;
            if t.cols() == model.dim() {
                t
            } else if t.cols() < model.dim() {
                data::zero_pad(&t, model.dim())?
            } else {
                return Err(Error::shape(
                    "project",
                    format!(
                        "{} has {} columns, projector dimension is {}",
                        path.display(),
                        t.cols(),
                        model.dim()
                    ),
                ));
            }
        }
        None => data::zero_pad(&ctx.dataset(TAG_HELDOUT, cfg.n_samples)?, model.dim())?,
    };

    let out_pts = model.project(&store, &x)?;
    let twice = model.project(&store, &out_pts)?;
    let residuals = rows_inf_diff(&twice, &out_pts);
    let moved = rows_inf_diff(&out_pts, &x);
    let max_residual = residuals.iter().copied().fold(0.0f64, f64::max);

    let mut columns = coord_columns("in", model.dim());
    columns.extend(coord_columns("out", model.dim()));
    columns.push("residual".into());
    columns.push("moved".into());
    let rows: Vec<Vec<f64>> = (0..x.rows())
        .map(|i| {
            let mut row = x.row_slice(i).to_vec();
            row.extend_from_slice(out_pts.row_slice(i));
            row.push(residuals[i]);
            row.push(moved[i]);
            row
        })
        .collect();
    let out = ctx.out_path("projected.csv");
    write_csv(&out, &columns, &rows)?;

    Ok(json!({
        "task": "project",
        "points": x.rows(),
        "rank": model.rank(&store),
        "max_idempotency_residual": max_residual,
        "output": out.display().to_string(),
    }))
}

// ---------------------------------------------------------------------------
// style-interp
// ---------------------------------------------------------------------------

/// The two toy "style" targets: a 45-degree rotation and an anisotropic
/// scaling of the plane.
pub fn style_targets() -> (Tensor, Tensor) {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let rot = Tensor::from_rows(&[vec![c, -c], vec![c, c]]).expect("2x2");
    let scale = Tensor::diag(&[1.5, 2.0 / 3.0]);
    (rot, scale)
}

/// Fit two linear cores over one shared basis `g`, regressing two target
/// transformations of the same dataset, and save one checkpoint per style
/// (their `g.*` sections are byte-identical).
pub fn run_style_fit(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let train_data = ctx.dataset(TAG_DATA, cfg.n_points)?;
    let (rot, scale) = style_targets();

    let mut store = ParamStore::new();
    let mut init_rng = ctx.rng(TAG_INIT);
    let g = Rc::new(InvertibleMap::coupling_stack(
        &mut store,
        &mut init_rng,
        "g",
        2,
        cfg.blocks,
        cfg.coupling,
        cfg.hidden,
    )?);
    let wa = store.add("style_a.core", Tensor::identity(2));
    let wb = store.add("style_b.core", Tensor::identity(2));
    let core_a = LinearCore::Dense { w: wa };
    let core_b = LinearCore::Dense { w: wb };

    let mut batch_rng = ctx.rng(TAG_TRAIN);
    let mut adam = Adam::new(&store, cfg.lr);
    let mut metrics = MetricsFile::new();

    let eval_rows: Vec<usize> = (0..train_data.rows().min(512)).collect();
    let eval_batch = train_data.gather_rows(&eval_rows);
    let eval_loss = |store: &ParamStore| -> Result<(f64, f64)> {
        let mut tape = Tape::new(store);
        let (la, lb) =
            style_losses(&mut tape, &g, &core_a, &core_b, &eval_batch, &rot, &scale)?;
        Ok((tape.value(la).item(), tape.value(lb).item()))
    };
    let (init_a, init_b) = eval_loss(&store)?;
    if cfg.steps == 0 {
        metrics.record(0, &[("loss_a", init_a.into()), ("loss_b", init_b.into())])?;
    }

    for step in 1..=cfg.steps {
        let idx: Vec<usize> =
            (0..cfg.batch).map(|_| batch_rng.index(train_data.rows())).collect();
        let x = train_data.gather_rows(&idx);
        let mut tape = Tape::new(&store);
        let (la, lb) = style_losses(&mut tape, &g, &core_a, &core_b, &x, &rot, &scale)?;
        let total = tape.add(la, lb)?;
        let (va, vb) = (tape.value(la).item(), tape.value(lb).item());
        if !(va.is_finite() && vb.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite style loss at step {step}: a={va} b={vb}"
            )));
        }
        let grads = tape.backward(total)?.into_param_grads();
        adam.step(&mut store, &grads)?;
        if step == 1 || step % cfg.log_every == 0 || step == cfg.steps {
            metrics.record(step as u64, &[("loss_a", va.into()), ("loss_b", vb.into())])?;
        }
    }
    let (final_a, final_b) = eval_loss(&store)?;
    let metrics_path = ctx.out_path("metrics_style.jsonl");
    metrics.write(&metrics_path)?;

    // One checkpoint per style: identical g parameters, own core under the
    // common name "core".
    let path_a = ctx.checkpoint_path("style_a.ckpt");
    let path_b = ctx.checkpoint_b_path("style_b.ckpt");
    for (path, core_name) in [(&path_a, "style_a.core"), (&path_b, "style_b.core")] {
        let mut sub = ParamStore::new();
        for (_, name, t) in store.iter() {
            if name.starts_with("g.") {
                sub.add(name.to_string(), t.clone());
            }
        }
        let core_tensor = store
            .iter()
            .find(|(_, name, _)| *name == core_name)
            .map(|(_, _, t)| t.clone())
            .expect("core parameter exists");
        sub.add("core", core_tensor);
        checkpoint::save(path, "style", cfg, RngStream::new(cfg.seed).state(), &sub)?;
    }

    Ok(json!({
        "task": "style-interp",
        "mode": "fit",
        "steps": cfg.steps,
        "initial_loss_a": init_a,
        "initial_loss_b": init_b,
        "final_loss_a": final_a,
        "final_loss_b": final_b,
        "checkpoint_a": path_a.display().to_string(),
        "checkpoint_b": path_b.display().to_string(),
        "metrics": metrics_path.display().to_string(),
    }))
}

fn style_losses(
    tape: &mut Tape,
    g: &Rc<InvertibleMap>,
    core_a: &LinearCore,
    core_b: &LinearCore,
    x: &Tensor,
    rot: &Tensor,
    scale: &Tensor,
) -> Result<(crate::autodiff::VarId, crate::autodiff::VarId)> {
    let xv = tape.constant(x.clone());
    let z = g.fwd(tape, xv)?;
    let mut one = |core: &LinearCore, target: &Tensor| -> Result<crate::autodiff::VarId> {
        let az = core.apply_tape(tape, z)?;
        let y = g.inv(tape, az)?;
        let t = tape.constant(x.matmul(&target.transpose())?);
        let d = tape.sub(y, t)?;
        let sq = tape.mul(d, d)?;
        let rs = tape.row_sum(sq);
        Ok(tape.mean(rs))
    };
    let la = one(core_a, rot)?;
    let lb = one(core_b, scale)?;
    Ok((la, lb))
}

/// Apply interpolated style operators over the alpha grid.
pub fn run_style_apply(ctx: &TaskContext) -> Result<Value> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let path_a = ctx.checkpoint_path("style_a.ckpt");
    let path_b = ctx.checkpoint_b_path("style_b.ckpt");
    let ckpt_a = checkpoint::load(&path_a)?;
    let ckpt_b = checkpoint::load(&path_b)?;
    for (p, c) in [(&path_a, &ckpt_a), (&path_b, &ckpt_b)] {
        if c.header.kind != "style" {
            return Err(Error::Contract(format!(
                "{} is a '{}' checkpoint, expected 'style'",
                p.display(),
                c.header.kind
            )));
        }
    }
    // The interpolation is only meaningful over one shared basis: every g
    // parameter must be byte-identical between the two checkpoints.
    if ckpt_a.namespace_bits("g.") != ckpt_b.namespace_bits("g.") {
        return Err(Error::Contract(
            "style checkpoints do not share a basis (g parameters differ)".into(),
        ));
    }

    // Rebuild the shared g from checkpoint A's architecture.
    let hcfg = &ckpt_a.header.config;
    let mut store = ParamStore::new();
    let mut rng = RngStream::new(hcfg.seed).substream(TAG_INIT);
    let g = Rc::new(InvertibleMap::coupling_stack(
        &mut store,
        &mut rng,
        "g",
        2,
        hcfg.blocks,
        hcfg.coupling,
        hcfg.hidden,
    )?);
    store.add("core", Tensor::zeros(2, 2));
    ckpt_a.restore_into(&mut store)?;

    let mat_a = ckpt_a.tensor("core")?;
    let mat_b = ckpt_b.tensor("core")?;
    let x = ctx.input_points(cfg.n_samples, 2)?;

    let mut columns = vec!["alpha".to_string()];
    columns.extend(coord_columns("in", 2));
    columns.extend(coord_columns("out", 2));
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(cfg.alphas.len() * x.rows());
    for &alpha in &cfg.alphas {
        let core = interpolate_cores(
            &store,
            &LinearCore::Raw(mat_a.clone()),
            &LinearCore::Raw(mat_b.clone()),
            alpha,
        )?;
        let f = Linearizer::from_shared(&store, g.clone(), core)?;
        let y = f.apply(&store, &x)?;
        for i in 0..x.rows() {
            let mut row = vec![alpha];
            row.extend_from_slice(x.row_slice(i));
            row.extend_from_slice(y.row_slice(i));
            rows.push(row);
        }
    }
    let out = ctx.out_path("style_interp.csv");
    write_csv(&out, &columns, &rows)?;

    Ok(json!({
        "task": "style-interp",
        "mode": "apply",
        "alphas": cfg.alphas.clone(),
        "points": x.rows(),
        "output": out.display().to_string(),
    }))
}
