//! End-to-end acceptance suite.
//!
//! Fourteen numbered criteria cover the full surface: induced vector-space
//! axioms, superposition for every core variant, operator algebra
//! (composition, powers, adjoints, SVD, pseudoinverse), collapse equivalence
//! for both integrators, training on two-moons, one-step inversion,
//! idempotent projection, gradient checks, and bitwise determinism. The test
//! prints one PASS/FAIL line per criterion (run with `--nocapture` to see
//! them on success) and fails if any criterion fails. A criterion that errors
//! or panics is reported as its own FAIL line so the remaining lines still
//! print.

use std::rc::Rc;
use std::time::Instant;

use linearizer_core::autodiff::{grad_check, GradCheckOptions, ParamStore};
use linearizer_core::config::Config;
use linearizer_core::cores::LinearCore;
use linearizer_core::data::{self, DatasetKind};
use linearizer_core::flow::{
    self, collapse_rk4_matrix, rk4_step_matrix, ConstantSchedule, FlowLossWeights, FlowModel,
    FlowModelSpec, FlowTrainOptions, SamplePath, Scheme, TIME_FEATURES,
};
use linearizer_core::ign::{self, IgnModel, IgnModelSpec, IgnTrainOptions};
use linearizer_core::induced::InducedSpace;
use linearizer_core::linalg;
use linearizer_core::linearizer::Linearizer;
use linearizer_core::maps::{CouplingKind, InvertibleMap};
use linearizer_core::nets::{Activation, Mlp};
use linearizer_core::rng::RngStream;
use linearizer_core::tasks::{self, TaskContext};
use linearizer_core::tensor::Tensor;
use linearizer_core::{Error, Result};

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn run(id: usize, f: impl FnOnce() -> Result<Outcome>) -> Outcome {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => Outcome { id, pass: false, detail: format!("errored: {e}") },
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "opaque panic".into());
            Outcome { id, pass: false, detail: format!("panicked: {msg}") }
        }
    }
}

/// Worst guarded relative row difference: max over rows of
/// `|a_i - b_i|_inf / (1 + |b_i|_inf)`. Infinite if anything is non-finite.
fn guarded_rel_rows(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape(), "guarded_rel_rows shape mismatch");
    let mut worst = 0.0f64;
    for i in 0..a.rows() {
        let (ra, rb) = (a.row_slice(i), b.row_slice(i));
        let mut diff = 0.0f64;
        let mut mag = 0.0f64;
        for j in 0..ra.len() {
            let d = (ra[j] - rb[j]).abs();
            if !d.is_finite() {
                return f64::INFINITY;
            }
            diff = diff.max(d);
            mag = mag.max(rb[j].abs());
        }
        worst = worst.max(diff / (1.0 + mag));
    }
    worst
}

/// The coupling pair shared by the operator-algebra criteria.
fn coupling_pair(store: &mut ParamStore, rng: &mut RngStream) -> Result<(Rc<InvertibleMap>, Rc<InvertibleMap>)> {
    let gx = Rc::new(InvertibleMap::coupling_stack(store, rng, "gx", 2, 2, CouplingKind::Affine, 16)?);
    let gy = Rc::new(InvertibleMap::coupling_stack(store, rng, "gy", 2, 2, CouplingKind::Additive, 16)?);
    Ok((gx, gy))
}

// -- criterion 1: vector-space axioms -------------------------------------

fn criterion_1() -> Result<Outcome> {
    let t0 = Instant::now();
    let mut rng = RngStream::new(8101);
    let mut store = ParamStore::new();
    let maps: Vec<(&str, InvertibleMap)> = vec![
        ("identity", InvertibleMap::identity(2)),
        ("cube", InvertibleMap::cube(2)),
        (
            "coupling",
            InvertibleMap::coupling_stack(&mut store, &mut rng, "g", 2, 6, CouplingKind::Affine, 64)?,
        ),
    ];
    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    for (name, map) in maps {
        let space = InducedSpace::new(Rc::new(map));
        let report = space.axiom_suite(&store, &mut rng, 1000, 2.0)?;
        for ax in &report.axioms {
            if !(ax.residual <= worst) {
                worst = ax.residual;
                worst_name = format!("{name}.{}", ax.axiom);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok(Outcome {
        id: 1,
        pass: worst.is_finite() && worst < 1e-6 && secs < 30.0,
        detail: format!(
            "axioms on identity/cube/coupling, 1000 vectors each: max residual {worst:.2e} ({worst_name}), tol 1e-6, {secs:.1}s (budget 30s)"
        ),
    })
}

// -- criterion 2: superposition for every core variant ---------------------

fn criterion_2() -> Result<Outcome> {
    let t0 = Instant::now();
    let mut rng = RngStream::new(8202);
    let mut store = ParamStore::new();
    let (gx, gy) = coupling_pair(&mut store, &mut rng)?;

    let dense_w = store.add("dense.w", rng.normal_tensor(2, 2).scale(0.6));
    let lr_a1 = store.add("lowrank.a1", rng.normal_tensor(2, 1).scale(0.8));
    let lr_a2 = store.add("lowrank.a2", rng.normal_tensor(1, 2).scale(0.8));
    let diag_d = store.add("diag.d", rng.normal_tensor(1, 2));
    let bin_l = store.add("bin.logits", Tensor::row(vec![1.3, -0.7]));
    let hyper = Rc::new(Mlp::new(
        &mut store,
        &mut rng,
        "hyper",
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
    let mut worst = 0.0f64;
    let mut worst_name = "";
    let mut n_variants = 0;
    for (name, core) in cores {
        let f = Linearizer::new(&store, gx.clone(), gy.clone(), core)?;
        let x1 = rng.ball_tensor(1000, 2, 2.0);
        let x2 = rng.ball_tensor(1000, 2, 2.0);
        let a1 = rng.uniform_col(1000, -2.0, 2.0);
        let a2 = rng.uniform_col(1000, -2.0, 2.0);
        let r = f.superposition_residual(&store, &x1, &x2, &a1, &a2)?;
        if !(r <= worst) {
            worst = r;
            worst_name = name;
        }
        n_variants += 1;
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok(Outcome {
        id: 2,
        pass: worst.is_finite() && worst < 1e-6 && secs < 30.0,
        detail: format!(
            "superposition over {n_variants} core variants, 1000 tuples each: max residual {worst:.2e} ({worst_name}), tol 1e-6, {secs:.1}s (budget 30s)"
        ),
    })
}

// -- criterion 3: composition ----------------------------------------------

fn criterion_3() -> Result<Outcome> {
    let mut rng = RngStream::new(8303);
    let mut store = ParamStore::new();
    let (gx, gy) = coupling_pair(&mut store, &mut rng)?;
    let f1 = Linearizer::new(&store, gx.clone(), gy.clone(), LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.7)))?;
    let f2 = Linearizer::new(&store, gy.clone(), gx.clone(), LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.7)))?;
    let c = Linearizer::compose(&store, &f2, &f1)?;
    let probes = rng.ball_tensor(100, 2, 2.0);
    let direct = c.apply(&store, &probes)?;
    let seq = f2.apply(&store, &f1.apply(&store, &probes)?)?;
    let worst = direct.max_abs_diff(&seq);
    Ok(Outcome {
        id: 3,
        pass: worst.is_finite() && worst < 1e-8,
        detail: format!("composed operator vs sequential application on 100 probes: max diff {worst:.2e}, tol 1e-8"),
    })
}

// -- criterion 4: operator power -------------------------------------------

fn criterion_4() -> Result<Outcome> {
    let mut rng = RngStream::new(8404);
    let mut store = ParamStore::new();
    let g = Rc::new(InvertibleMap::coupling_stack(&mut store, &mut rng, "g", 2, 2, CouplingKind::Affine, 16)?);
    let f = Linearizer::from_shared(&store, g, LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.45)))?;
    let p5 = f.power(&store, 5)?;
    let probes = rng.ball_tensor(100, 2, 2.0);
    let direct = p5.apply(&store, &probes)?;
    let mut seq = probes;
    for _ in 0..5 {
        seq = f.apply(&store, &seq)?;
    }
    let worst = direct.max_abs_diff(&seq);
    Ok(Outcome {
        id: 4,
        pass: worst.is_finite() && worst < 1e-6,
        detail: format!("power(f, 5) vs five applications on 100 probes: max diff {worst:.2e}, tol 1e-6"),
    })
}

// -- criterion 5: adjoint identity ------------------------------------------

fn criterion_5() -> Result<Outcome> {
    let mut rng = RngStream::new(8505);
    let mut store = ParamStore::new();
    let (gx, gy) = coupling_pair(&mut store, &mut rng)?;
    let f = Linearizer::new(&store, gx, gy, LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.8)))?;
    let x = rng.ball_tensor(1000, 2, 2.0);
    let y = rng.ball_tensor(1000, 2, 2.0);
    let worst = f.adjoint_residual(&store, &x, &y)?;
    Ok(Outcome {
        id: 5,
        pass: worst.is_finite() && worst < 1e-8,
        detail: format!("adjoint inner-product identity on 1000 pairs: max relative residual {worst:.2e}, tol 1e-8"),
    })
}

// -- criterion 6: SVD transport ----------------------------------------------

fn criterion_6() -> Result<Outcome> {
    let mut rng = RngStream::new(8606);
    let mut store = ParamStore::new();
    let (gx, gy) = coupling_pair(&mut store, &mut rng)?;
    let f = Linearizer::new(&store, gx, gy, LinearCore::Raw(rng.normal_tensor(2, 2).scale(0.8)))?;
    let svd = f.svd(&store)?;
    let transport = f.svd_transport_residual(&store, &svd)?;
    let (gv, gu) = f.svd_gram_residual(&store, &svd)?;
    let gram = gv.max(gu);
    let positive = svd.sigmas.iter().filter(|s| **s > 0.0).count();
    Ok(Outcome {
        id: 6,
        pass: transport.is_finite() && transport < 1e-6 && gram.is_finite() && gram < 1e-8,
        detail: format!(
            "singular transport over {positive} positive values: max residual {transport:.2e} (tol 1e-6); Gram vs identity {gram:.2e} (tol 1e-8)"
        ),
    })
}

// -- criterion 7: pseudoinverse (Penrose equations) ---------------------------

fn criterion_7() -> Result<Outcome> {
    let mut rng = RngStream::new(8707);
    let mut store = ParamStore::new();
    let gx4 = Rc::new(InvertibleMap::coupling_stack(&mut store, &mut rng, "gx4", 4, 2, CouplingKind::Affine, 16)?);
    let gy4 = Rc::new(InvertibleMap::coupling_stack(&mut store, &mut rng, "gy4", 4, 2, CouplingKind::Additive, 16)?);
    let a = linalg::random_with_rank(&mut rng, 4, 4, 2)?;
    let f = Linearizer::new(&store, gx4, gy4, LinearCore::Raw(a))?;
    let fd = f.pinv(&store)?;
    let residuals = f.penrose_residuals(&store, &fd, 250, &mut rng)?;
    let worst = residuals.iter().cloned().fold(0.0f64, f64::max);
    Ok(Outcome {
        id: 7,
        pass: residuals.iter().all(|r| r.is_finite() && *r < 1e-6),
        detail: format!(
            "four Penrose identities on a rank-2-of-4 operator, 250 probes: residuals [{:.1e}, {:.1e}, {:.1e}, {:.1e}], max {worst:.2e}, tol 1e-6",
            residuals[0], residuals[1], residuals[2], residuals[3]
        ),
    })
}

// -- trained fixture shared by criteria 8, 10, 11 ------------------------------

struct Trained {
    store: ParamStore,
    model: FlowModel,
    report: flow::FlowTrainReport,
    secs: f64,
}

fn train_default_fixture() -> Result<Trained> {
    let seed = Config::default().seed;
    let mut data_rng = RngStream::new(seed).substream(1);
    let data = data::dataset(DatasetKind::TwoMoons, 4000, &mut data_rng)?;
    let mut store = ParamStore::new();
    let mut init_rng = RngStream::new(seed).substream(2);
    let model = FlowModel::new(&mut store, &mut init_rng, &FlowModelSpec::default())?;
    let train_rng = RngStream::new(seed).substream(3);
    let t0 = Instant::now();
    let report = flow::train_flow(&mut store, &model, &data, &FlowTrainOptions::default(), &train_rng)?;
    let secs = t0.elapsed().as_secs_f64();
    Ok(Trained { store, model, report, secs })
}

// -- criterion 8: Euler collapse equivalence -----------------------------------

fn one_step_residual(store: &ParamStore, model: &FlowModel, x0: &Tensor, n: usize) -> Result<f64> {
    let op = model.collapse(store, n, Scheme::Euler)?;
    let one = model.one_step_sample(store, &op.b, x0)?;
    // The sampler's default integration path; its agreement with the
    // data-space path is covered by the library's unit tests.
    let multi = model.euler_sample(store, x0, n, SamplePath::Latent)?;
    Ok(guarded_rel_rows(&one, &multi))
}

fn criterion_8(trained: &Result<Trained>) -> Result<Outcome> {
    let t0 = Instant::now();
    let mut rng = RngStream::new(8808);
    let mut random_store = ParamStore::new();
    let random_model = FlowModel::new(&mut random_store, &mut rng, &FlowModelSpec::default())?;

    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let x0 = rng.normal_tensor(200, 2);
    for n in [1usize, 10, 100, 1000] {
        let r = one_step_residual(&random_store, &random_model, &x0, n)?;
        if !(r <= worst) {
            worst = r;
            worst_at = format!("random model, N={n}");
        }
        match trained {
            Ok(t) => {
                let r = one_step_residual(&t.store, &t.model, &x0, n)?;
                if !(r <= worst) {
                    worst = r;
                    worst_at = format!("trained model, N={n}");
                }
            }
            Err(e) => {
                return Ok(Outcome {
                    id: 8,
                    pass: false,
                    detail: format!("trained model unavailable: {e}"),
                })
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok(Outcome {
        id: 8,
        pass: worst.is_finite() && worst < 1e-6 && secs < 60.0,
        detail: format!(
            "one-step vs N-step Euler, N in {{1,10,100,1000}}, random and trained models, 200 probes: max relative diff {worst:.2e} ({worst_at}), tol 1e-6, {secs:.1}s (budget 60s)"
        ),
    })
}

// -- criterion 9: RK4 collapse ---------------------------------------------------

/// Matrix exponential by scaling-and-squaring with a long Taylor tail;
/// accurate to machine precision for the small matrices used here.
fn expm(a: &Tensor) -> Result<Tensor> {
    let mut s = 0u32;
    let mut norm = a.frobenius();
    while norm > 0.5 {
        norm *= 0.5;
        s += 1;
    }
    let b = a.scale(0.5f64.powi(s as i32));
    let n = a.rows();
    let mut term = Tensor::identity(n);
    let mut sum = Tensor::identity(n);
    for k in 1..=24 {
        term = term.matmul(&b)?.scale(1.0 / k as f64);
        sum = sum.add(&term)?;
    }
    for _ in 0..s {
        sum = sum.matmul(&sum)?;
    }
    Ok(sum)
}

fn criterion_9() -> Result<Outcome> {
    let mut rng = RngStream::new(8909);
    let empty = ParamStore::new();

    // (a) One constant-core RK4 step over [0, 1] is exactly the degree-4
    // Taylor polynomial of the exponential.
    let a = rng.normal_tensor(2, 2).scale(0.6);
    let m = rk4_step_matrix(&ConstantSchedule(a.clone()), &empty, 0.0, 1.0)?;
    let a2 = a.matmul(&a)?;
    let a3 = a2.matmul(&a)?;
    let a4 = a3.matmul(&a)?;
    let taylor = Tensor::identity(2)
        .add(&a)?
        .add(&a2.scale(0.5))?
        .add(&a3.scale(1.0 / 6.0))?
        .add(&a4.scale(1.0 / 24.0))?;
    let taylor_diff = m.max_abs_diff(&taylor);
    let pass_a = taylor_diff.is_finite() && taylor_diff < 1e-12;

    // (b) The collapsed RK4 product reproduces step-by-step RK4 sampling.
    let mut store = ParamStore::new();
    let spec = FlowModelSpec { blocks: 2, hidden: 16, hyper_hidden: 16, ..Default::default() };
    let model = FlowModel::new(&mut store, &mut rng, &spec)?;
    let x0 = rng.normal_tensor(100, 2);
    let op = model.collapse(&store, 16, Scheme::Rk4)?;
    let one = model.one_step_sample(&store, &op.b, &x0)?;
    let multi = model.rk4_sample(&store, &x0, 16)?;
    let product_diff = guarded_rel_rows(&one, &multi);
    let pass_b = product_diff.is_finite() && product_diff < 1e-8;

    // (c) Fourth-order convergence toward the true exponential.
    let raw = rng.normal_tensor(2, 2);
    let a = raw.scale(1.2 / raw.frobenius());
    let target = expm(&a)?;
    let schedule = ConstantSchedule(a);
    let mut pts = Vec::new();
    for n in [4usize, 8, 16, 32] {
        let b = collapse_rk4_matrix(&schedule, &empty, n)?;
        let err = b.sub(&target)?.frobenius();
        pts.push(((n as f64).ln(), err.ln()));
    }
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum::<f64>();
    let pass_c = slope.is_finite() && (slope + 4.0).abs() < 0.5;

    Ok(Outcome {
        id: 9,
        pass: pass_a && pass_b && pass_c,
        detail: format!(
            "constant-core step vs degree-4 Taylor {taylor_diff:.2e} (tol 1e-12); collapsed product vs 16-step sampling {product_diff:.2e} (tol 1e-8); error slope vs exact exponential {slope:.2} (want -4 +/- 0.5)"
        ),
    })
}

// -- criterion 10: two-moons training ----------------------------------------------

fn criterion_10(trained: &Result<Trained>) -> Result<Outcome> {
    let t = match trained {
        Ok(t) => t,
        Err(e) => {
            return Ok(Outcome { id: 10, pass: false, detail: format!("training failed: {e}") })
        }
    };
    let ratio = t.report.final_main / t.report.initial_main;
    let mut rng = RngStream::new(9010);
    let x0 = rng.normal_tensor(200, 2);
    let one_step = one_step_residual(&t.store, &t.model, &x0, 100)?;
    let pass = ratio.is_finite()
        && ratio <= 0.2
        && one_step.is_finite()
        && one_step < 1e-6
        && t.secs < 600.0;
    Ok(Outcome {
        id: 10,
        pass,
        detail: format!(
            "20000 steps on two-moons: flow-matching loss {:.3} -> {:.3e} (ratio {ratio:.2e}, want <= 0.2); one-step vs 100-step relative diff {one_step:.2e} (tol 1e-6); {:.0}s (budget 600s)",
            t.report.initial_main, t.report.final_main, t.secs
        ),
    })
}

// -- criterion 11: inversion through the pseudoinverse -------------------------------

fn criterion_11(trained: &Result<Trained>) -> Result<Outcome> {
    let t = match trained {
        Ok(t) => t,
        Err(e) => {
            return Ok(Outcome { id: 11, pass: false, detail: format!("training failed: {e}") })
        }
    };
    let mut held_rng = RngStream::new(Config::default().seed).substream(4);
    let held = data::dataset(DatasetKind::TwoMoons, 100, &mut held_rng)?;
    let op = t.model.collapse(&t.store, 100, Scheme::Euler)?;
    let f = t.model.collapsed_linearizer(&t.store, &op.b)?;
    let fd = f.pinv(&t.store)?;
    let recon = f.apply(&t.store, &fd.apply(&t.store, &held)?)?;
    let space = t.model.space();
    let om = space.ominus(&t.store, &recon, &held)?;
    let mut worst = 0.0f64;
    for i in 0..om.rows() {
        let norm = space.norm(&t.store, &Tensor::row(om.row_slice(i).to_vec()))?;
        worst = worst.max(norm);
    }
    Ok(Outcome {
        id: 11,
        pass: worst.is_finite() && worst < 1e-6,
        detail: format!(
            "f(f-dagger(x)) vs x on 100 held-out points through the trained collapsed operator: max induced norm {worst:.2e}, tol 1e-6"
        ),
    })
}

// -- criterion 12: idempotent generative projection -----------------------------------

fn criterion_12() -> Result<Outcome> {
    let mut rng = RngStream::new(9112);
    let mut store = ParamStore::new();
    let spec = IgnModelSpec::default();
    let n = spec.dim;
    let model = IgnModel::new(&mut store, &mut rng, &spec)?;

    let probes = rng.normal_tensor(256, n).scale(3.0);
    let at_init = model.idempotency_residual(&store, &probes)?;

    let mut data_rng = RngStream::new(9113);
    let moons = data::dataset(DatasetKind::TwoMoons, 4000, &mut data_rng)?;
    let padded = data::zero_pad(&moons, n)?;
    let train_rng = RngStream::new(9114);
    let report = ign::train_ign(&mut store, &model, &padded, &IgnTrainOptions::default(), &train_rng)?;

    let fresh = rng.normal_tensor(256, n).scale(3.0);
    let after = model.idempotency_residual(&store, &fresh)?;

    let idempotent = at_init.is_finite()
        && at_init < 1e-6
        && report.max_idempotency.is_finite()
        && report.max_idempotency < 1e-6
        && after.is_finite()
        && after < 1e-6;
    Ok(Outcome {
        id: 12,
        pass: idempotent && report.final_rank < n,
        detail: format!(
            "idempotency on N(0, 9I) probes: {at_init:.2e} at init, {:.2e} during training, {after:.2e} after (tol 1e-6); rank {} -> {} of {n} under sparsity weight {}",
            report.max_idempotency, report.initial_rank, report.final_rank, spec.weights.sparse
        ),
    })
}

// -- criterion 13: gradient checks -----------------------------------------------------

fn criterion_13() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for k in 0..3u64 {
        let mut rng = RngStream::new(9210 + k);
        let mut store = ParamStore::new();
        let spec = FlowModelSpec { blocks: 2, hidden: 8, rank: 3, hyper_hidden: 8, ..Default::default() };
        let model = FlowModel::new(&mut store, &mut rng, &spec)?;
        let x0 = rng.normal_tensor(8, 2);
        let x1 = rng.ball_tensor(8, 2, 2.0);
        let ts = rng.uniform_col(8, 0.0, 1.0);
        let w = FlowLossWeights::default();
        let report = grad_check(
            &store,
            &model.param_ids(),
            |tape| model.fm_loss_terms(tape, &x0, &x1, &ts, &w).map(|t| t.total),
            &GradCheckOptions::default(),
            &mut rng,
        )?;
        if !(report.max_rel_err <= worst) {
            worst = report.max_rel_err;
            worst_at = format!("flow loss, point {}", k + 1);
        }
    }
    for k in 0..3u64 {
        let mut rng = RngStream::new(9220 + k);
        let mut store = ParamStore::new();
        let spec = IgnModelSpec { dim: 6, blocks: 2, hidden: 8, ..Default::default() };
        let model = IgnModel::new(&mut store, &mut rng, &spec)?;
        let x = data::zero_pad(&rng.ball_tensor(8, 2, 2.0), 6)?;
        let report = grad_check(
            &store,
            &model.param_ids(),
            |tape| model.loss_terms(tape, &x, false).map(|t| t.total),
            &GradCheckOptions::default(),
            &mut rng,
        )?;
        if !(report.max_rel_err <= worst) {
            worst = report.max_rel_err;
            worst_at = format!("projector loss, point {}", k + 1);
        }
    }
    Ok(Outcome {
        id: 13,
        pass: worst.is_finite() && worst < 1e-4,
        detail: format!(
            "finite-difference gradient checks at 3 random parameter points per loss: max relative error {worst:.2e} ({worst_at}), tol 1e-4"
        ),
    })
}

// -- criterion 14: bitwise determinism ---------------------------------------------------

fn criterion_14() -> Result<Outcome> {
    let mut cfg = Config::default();
    cfg.steps = 500;
    cfg.n_points = 1000;
    let run_once = |dir: &std::path::Path| -> Result<(Vec<u8>, Vec<u8>)> {
        let ctx = TaskContext::new(cfg.clone(), dir.to_path_buf());
        tasks::run_train_flow(&ctx)?;
        let ckpt = std::fs::read(dir.join("flow.ckpt")).map_err(|e| Error::io("read checkpoint", e))?;
        let metrics =
            std::fs::read(dir.join("metrics_flow.jsonl")).map_err(|e| Error::io("read metrics", e))?;
        Ok((ckpt, metrics))
    };
    let d1 = tempfile::tempdir().map_err(|e| Error::io("create temp dir", e))?;
    let d2 = tempfile::tempdir().map_err(|e| Error::io("create temp dir", e))?;
    let (c1, m1) = run_once(d1.path())?;
    let (c2, m2) = run_once(d2.path())?;
    let ckpt_same = c1 == c2;
    let metrics_same = m1 == m2;
    Ok(Outcome {
        id: 14,
        pass: ckpt_same && metrics_same,
        detail: format!(
            "two identical 500-step runs: checkpoints ({} bytes) byte-identical: {ckpt_same}; metrics logs byte-identical: {metrics_same}",
            c1.len()
        ),
    })
}

// ------------------------------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let mut outcomes = vec![
        run(1, criterion_1),
        run(2, criterion_2),
        run(3, criterion_3),
        run(4, criterion_4),
        run(5, criterion_5),
        run(6, criterion_6),
        run(7, criterion_7),
        run(9, criterion_9),
        run(12, criterion_12),
        run(13, criterion_13),
        run(14, criterion_14),
    ];
    // Criteria 8, 10, and 11 share one trained model; a training failure is
    // reported on each of their lines rather than aborting the suite.
    let trained = train_default_fixture();
    outcomes.push(run(8, || criterion_8(&trained)));
    outcomes.push(run(10, || criterion_10(&trained)));
    outcomes.push(run(11, || criterion_11(&trained)));

    outcomes.sort_by_key(|o| o.id);
    let mut failed = Vec::new();
    for o in &outcomes {
        println!("CRITERION {:2}: {} - {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(o.id);
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
