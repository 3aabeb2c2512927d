//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Tape`] is rebuilt for every forward pass. Creating a tape from a
//! [`ParamStore`] binds every parameter as a leaf node, so model code can
//! address parameters by their [`ParamId`] without threading the store through
//! each call. Operations append nodes; [`Tape::backward`] walks the node list
//! in reverse and accumulates gradients with fixed, deterministic ordering.
//!
//! The op set is deliberately small: elementwise arithmetic with rank-2
//! broadcasting, dense/batched matrix products, column/row slicing and
//! concatenation for coupling layers, reductions, the pointwise
//! nonlinearities the maps need, and a straight-through binarizer.

use crate::rng::RngStream;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Handle to a named parameter tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Ordered, named collection of trainable tensors. The order is the canonical
/// order for optimizer state, checkpoints, and tape leaf binding, so runs are
/// reproducible by construction.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, t)| (ParamId(i), self.names[i].as_str(), t))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|t| t.len()).sum()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(VarId, VarId),
    Sub(VarId, VarId),
    Mul(VarId, VarId),
    MatMul(VarId, VarId),
    Transpose(VarId),
    SliceCols { src: VarId, start: usize, len: usize },
    SliceRows { src: VarId, start: usize, len: usize },
    ConcatCols(VarId, VarId),
    Reshape(VarId),
    /// Per-sample matrix-vector product: `mats` is `[B, r*c]` read as `[r, c]`
    /// blocks, `vecs` is `[B, c]`, output `[B, r]`.
    BatchMatVec { mats: VarId, vecs: VarId, r: usize, c: usize },
    Sum(VarId),
    Mean(VarId),
    RowSum(VarId),
    ScaleConst(VarId, f64),
    AddConst(VarId),
    Exp(VarId),
    Tanh(VarId),
    // Carries the sigmoid of the input, computed from the same exponential
    // as the forward value, so backward needs no second transcendental pass.
    Softplus(VarId, Tensor),
    Sigmoid(VarId),
    Abs(VarId),
    Recip(VarId),
    Cbrt(VarId),
    Sinh(VarId),
    Asinh(VarId),
    /// Forward: 1.0 where input > 0.5, else 0.0 (so exactly 0.5 maps to 0).
    /// Backward: straight-through (gradient passes unchanged).
    SteBinarize(VarId),
    /// Test-only op with a deliberately wrong derivative, used as a negative
    /// control for the gradient checker.
    #[cfg(test)]
    BuggyTanh(VarId),
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    n_params: usize,
}

impl Tape {
    /// Start a fresh tape with every parameter in `store` bound as a leaf.
    pub fn new(store: &ParamStore) -> Self {
        let mut nodes = Vec::with_capacity(store.len() + 64);
        for (_, _, t) in store.iter() {
            nodes.push(Node { value: t.clone(), op: Op::Leaf });
        }
        Tape { nodes, n_params: store.len() }
    }

    /// Tape with no bound parameters (pure-constant computations).
    pub fn without_params() -> Self {
        Tape { nodes: Vec::new(), n_params: 0 }
    }

    /// The leaf variable holding parameter `p`.
    pub fn param(&self, p: ParamId) -> VarId {
        debug_assert!(p.0 < self.n_params, "parameter not bound on this tape");
        VarId(p.0)
    }

    pub fn constant(&mut self, t: Tensor) -> VarId {
        self.push(t, Op::Leaf)
    }

    pub fn value(&self, v: VarId) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> VarId {
        self.nodes.push(Node { value, op });
        VarId(self.nodes.len() - 1)
    }

    // ----- elementwise binary (rank-2 broadcasting) -----

    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = self.value(a).mul(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    // ----- linear algebra -----

    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: VarId) -> VarId {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn slice_cols(&mut self, src: VarId, start: usize, len: usize) -> Result<VarId> {
        let v = self.value(src).slice_cols(start, len)?;
        Ok(self.push(v, Op::SliceCols { src, start, len }))
    }

    pub fn slice_rows(&mut self, src: VarId, start: usize, len: usize) -> Result<VarId> {
        let t = self.value(src);
        if start + len > t.rows() {
            return Err(Error::shape(
                "slice_rows",
                format!("rows {}..{} out of range for {} rows", start, start + len, t.rows()),
            ));
        }
        let c = t.cols();
        let data = t.data()[start * c..(start + len) * c].to_vec();
        let v = Tensor::new(vec![len, c], data)?;
        Ok(self.push(v, Op::SliceRows { src, start, len }))
    }

    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = self.value(a).hcat(self.value(b))?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    /// Reinterpret the row-major data under a new `[rows, cols]` shape.
    pub fn reshape(&mut self, a: VarId, rows: usize, cols: usize) -> Result<VarId> {
        let t = self.value(a);
        if rows * cols != t.len() {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as [{rows}, {cols}]", t.shape()),
            ));
        }
        let v = Tensor::new(vec![rows, cols], t.data().to_vec())?;
        Ok(self.push(v, Op::Reshape(a)))
    }

    pub fn batch_matvec(&mut self, mats: VarId, vecs: VarId, r: usize, c: usize) -> Result<VarId> {
        let m = self.value(mats);
        let x = self.value(vecs);
        let b = m.rows();
        if m.cols() != r * c || x.rows() != b || x.cols() != c {
            return Err(Error::shape(
                "batch_matvec",
                format!(
                    "mats {:?} vecs {:?} incompatible with blocks [{r},{c}]",
                    m.shape(),
                    x.shape()
                ),
            ));
        }
        let mut out = Tensor::zeros(b, r);
        for s in 0..b {
            let mrow = m.row_slice(s);
            let xrow = x.row_slice(s);
            let orow = &mut out.data_mut()[s * r..(s + 1) * r];
            for i in 0..r {
                let block = &mrow[i * c..(i + 1) * c];
                let mut acc = 0.0;
                for j in 0..c {
                    acc += block[j] * xrow[j];
                }
                orow[i] = acc;
            }
        }
        Ok(self.push(out, Op::BatchMatVec { mats, vecs, r, c }))
    }

    // ----- reductions -----

    pub fn sum(&mut self, a: VarId) -> VarId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: VarId) -> VarId {
        let t = self.value(a);
        let v = Tensor::scalar(t.sum() / t.len() as f64);
        self.push(v, Op::Mean(a))
    }

    /// `[B, n] -> [B, 1]` row sums.
    pub fn row_sum(&mut self, a: VarId) -> VarId {
        let t = self.value(a);
        let r = t.rows();
        let mut out = Tensor::zeros(r, 1);
        for i in 0..r {
            out.data_mut()[i] = t.row_slice(i).iter().sum();
        }
        self.push(out, Op::RowSum(a))
    }

    // ----- scalar-constant arithmetic -----

    pub fn scale_const(&mut self, a: VarId, k: f64) -> VarId {
        let v = self.value(a).scale(k);
        self.push(v, Op::ScaleConst(a, k))
    }

    pub fn add_const(&mut self, a: VarId, k: f64) -> VarId {
        let v = self.value(a).map(|x| x + k);
        self.push(v, Op::AddConst(a))
    }

    pub fn neg(&mut self, a: VarId) -> VarId {
        self.scale_const(a, -1.0)
    }

    // ----- pointwise nonlinearities -----

    pub fn exp(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn tanh(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: VarId) -> VarId {
        let x = self.value(a);
        let mut y = vec![0.0; x.len()];
        let mut d = vec![0.0; x.len()];
        crate::fastmath::softplus_with_sigmoid(x.data(), &mut y, &mut d);
        let shape = x.shape().to_vec();
        let v = Tensor::new(shape.clone(), y).expect("same shape");
        let dv = Tensor::new(shape, d).expect("same shape");
        self.push(v, Op::Softplus(a, dv))
    }

    pub fn sigmoid(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn abs(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::abs);
        self.push(v, Op::Abs(a))
    }

    pub fn recip(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(|x| 1.0 / x);
        self.push(v, Op::Recip(a))
    }

    pub fn cbrt(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::cbrt);
        self.push(v, Op::Cbrt(a))
    }

    pub fn sinh(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::sinh);
        self.push(v, Op::Sinh(a))
    }

    pub fn asinh(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::asinh);
        self.push(v, Op::Asinh(a))
    }

    /// Straight-through binarizer: forward is exactly `{0, 1}` with ties at
    /// 0.5 rounding down; backward passes the upstream gradient unchanged.
    pub fn ste_binarize(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(|x| if x > 0.5 { 1.0 } else { 0.0 });
        self.push(v, Op::SteBinarize(a))
    }

    #[cfg(test)]
    pub fn buggy_tanh(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::BuggyTanh(a))
    }

    // ----- backward -----

    /// Reverse-mode sweep from a scalar root. Returns one gradient slot per
    /// node; parameter gradients live in the leading `n_params` slots.
    pub fn backward(&self, root: VarId) -> Result<Gradients> {
        let root_val = self.value(root);
        if root_val.len() != 1 {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got shape {:?}",
                root_val.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..self.nodes.len()).rev() {
            let go = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.accum(&mut grads, *a, go.reduce_to(self.value(*a).shape()));
                    self.accum(&mut grads, *b, go.reduce_to(self.value(*b).shape()));
                }
                Op::Sub(a, b) => {
                    self.accum(&mut grads, *a, go.reduce_to(self.value(*a).shape()));
                    self.accum(&mut grads, *b, go.scale(-1.0).reduce_to(self.value(*b).shape()));
                }
                Op::Mul(a, b) => {
                    let ga = go.mul(self.value(*b))?.reduce_to(self.value(*a).shape());
                    let gb = go.mul(self.value(*a))?.reduce_to(self.value(*b).shape());
                    self.accum(&mut grads, *a, ga);
                    self.accum(&mut grads, *b, gb);
                }
                Op::MatMul(a, b) => {
                    let ga = go.matmul(&self.value(*b).transpose())?;
                    let gb = self.value(*a).transpose().matmul(&go)?;
                    self.accum(&mut grads, *a, ga);
                    self.accum(&mut grads, *b, gb);
                }
                Op::Transpose(a) => {
                    self.accum(&mut grads, *a, go.transpose());
                }
                Op::SliceCols { src, start, len } => {
                    let s = self.value(*src);
                    let mut gin = Tensor::zeros(s.rows(), s.cols());
                    for i in 0..go.rows() {
                        for j in 0..*len {
                            gin.set(i, start + j, go.at(i, j));
                        }
                    }
                    self.accum(&mut grads, *src, gin);
                }
                Op::SliceRows { src, start, len } => {
                    let s = self.value(*src);
                    let mut gin = Tensor::zeros(s.rows(), s.cols());
                    for i in 0..*len {
                        for j in 0..go.cols() {
                            gin.set(start + i, j, go.at(i, j));
                        }
                    }
                    self.accum(&mut grads, *src, gin);
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(*a).cols();
                    let cb = self.value(*b).cols();
                    self.accum(&mut grads, *a, go.slice_cols(0, ca)?);
                    self.accum(&mut grads, *b, go.slice_cols(ca, cb)?);
                }
                Op::Reshape(a) => {
                    let s = self.value(*a);
                    let gin = Tensor::new(s.shape().to_vec(), go.data().to_vec())?;
                    self.accum(&mut grads, *a, gin);
                }
                Op::BatchMatVec { mats, vecs, r, c } => {
                    let m = self.value(*mats);
                    let x = self.value(*vecs);
                    let bsz = m.rows();
                    let mut gm = Tensor::zeros(bsz, r * c);
                    let mut gx = Tensor::zeros(bsz, *c);
                    for s in 0..bsz {
                        let gorow = go.row_slice(s);
                        let mrow = m.row_slice(s);
                        let xrow = x.row_slice(s);
                        for i in 0..*r {
                            let gi = gorow[i];
                            if gi == 0.0 {
                                continue;
                            }
                            for j in 0..*c {
                                gm.data_mut()[s * r * c + i * c + j] += gi * xrow[j];
                                gx.data_mut()[s * c + j] += gi * mrow[i * c + j];
                            }
                        }
                    }
                    self.accum(&mut grads, *mats, gm);
                    self.accum(&mut grads, *vecs, gx);
                }
                Op::Sum(a) => {
                    let t = self.value(*a);
                    self.accum(&mut grads, *a, Tensor::full(t.rows(), t.cols(), go.item()));
                }
                Op::Mean(a) => {
                    let t = self.value(*a);
                    let g = go.item() / t.len() as f64;
                    self.accum(&mut grads, *a, Tensor::full(t.rows(), t.cols(), g));
                }
                Op::RowSum(a) => {
                    let t = self.value(*a);
                    let mut gin = Tensor::zeros(t.rows(), t.cols());
                    for i in 0..t.rows() {
                        let g = go.at(i, 0);
                        for j in 0..t.cols() {
                            gin.set(i, j, g);
                        }
                    }
                    self.accum(&mut grads, *a, gin);
                }
                Op::ScaleConst(a, k) => {
                    self.accum(&mut grads, *a, go.scale(*k));
                }
                Op::AddConst(a) => {
                    self.accum(&mut grads, *a, go.clone());
                }
                Op::Exp(a) => {
                    let g = go.mul(&node.value)?;
                    self.accum(&mut grads, *a, g);
                }
                Op::Tanh(a) => {
                    let d = node.value.map(|y| 1.0 - y * y);
                    self.accum(&mut grads, *a, go.mul(&d)?);
                }
                Op::Softplus(a, d) => {
                    self.accum(&mut grads, *a, go.mul(d)?);
                }
                Op::Sigmoid(a) => {
                    let d = node.value.map(|y| y * (1.0 - y));
                    self.accum(&mut grads, *a, go.mul(&d)?);
                }
                Op::Abs(a) => {
                    let d = self.value(*a).map(|x| {
                        if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    });
                    self.accum(&mut grads, *a, go.mul(&d)?);
                }
                Op::Recip(a) => {
                    let d = node.value.map(|y| -y * y);
                    self.accum(&mut grads, *a, go.mul(&d)?);
                }
                Op::Cbrt(a) => {
                    let d = node.value.map(|y| 1.0 / (3.0 * y * y));
                    self.accum(&mut grads, *a, go.mul(&d)?);
                }
                Op::Sinh(a) => {
                    let d = self.value(*a).map(f64::cosh);
                    self.accum(&mut grads, *a, go.mul(&d)?);
                }
                Op::Asinh(a) => {
                    let d = self.value(*a).map(|x| 1.0 / (1.0 + x * x).sqrt());
                    self.accum(&mut grads, *a, go.mul(&d)?);
                }
                Op::SteBinarize(a) => {
                    self.accum(&mut grads, *a, go.clone());
                }
                #[cfg(test)]
                Op::BuggyTanh(a) => {
                    // Intentionally wrong rule: (1 - y) instead of (1 - y^2).
                    let d = node.value.map(|y| 1.0 - y);
                    self.accum(&mut grads, *a, go.mul(&d)?);
                }
            }
            // Restore the slot so leaf gradients (and any inspected
            // intermediate) survive the sweep.
            grads[idx] = Some(go);
        }
        Ok(Gradients { grads, n_params: self.n_params })
    }

    fn accum(&self, grads: &mut [Option<Tensor>], v: VarId, g: Tensor) {
        match &mut grads[v.0] {
            Some(acc) => {
                let summed = acc.add(&g).expect("gradient shapes agree");
                *acc = summed;
            }
            slot @ None => *slot = Some(g),
        }
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

/// Result of a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    n_params: usize,
}

impl Gradients {
    pub fn wrt(&self, v: VarId) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    pub fn param_grad(&self, p: ParamId) -> Option<&Tensor> {
        self.grads[p.0].as_ref()
    }

    /// Gradients for the first `n_params` slots (the bound parameters), in
    /// store order; `None` where a parameter did not participate.
    pub fn into_param_grads(mut self) -> Vec<Option<Tensor>> {
        self.grads.truncate(self.n_params);
        self.grads
    }
}

/// Options for [`grad_check`]: central differences with step `1e-5` and
/// relative tolerance `1e-4`, sampling at most `max_coords_per_param`
/// coordinates from each parameter tensor.
#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tol: f64,
    pub max_coords_per_param: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-5, tol: 1e-4, max_coords_per_param: 12 }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub coords_checked: usize,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_err: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn failing(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| !e.pass).map(|e| e.name.as_str()).collect()
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Compare reverse-mode parameter gradients of a scalar-valued graph against
/// central finite differences. `build` must deterministically reconstruct the
/// same computation on any tape it is given; it is re-run on perturbed copies
/// of the store.
pub fn grad_check(
    store: &ParamStore,
    params: &[ParamId],
    build: impl Fn(&mut Tape) -> Result<VarId>,
    opts: &GradCheckOptions,
    rng: &mut RngStream,
) -> Result<GradCheckReport> {
    let mut tape = Tape::new(store);
    let root = build(&mut tape)?;
    if tape.value(root).len() != 1 {
        return Err(Error::Contract("grad_check target must be scalar".into()));
    }
    let grads = tape.backward(root)?;

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new(s);
        let r = build(&mut t)?;
        Ok(t.value(r).item())
    };

    let mut work = store.clone();
    let mut entries = Vec::new();
    let mut worst = 0.0f64;
    for &p in params {
        let n = store.get(p).len();
        let coords: Vec<usize> = if n <= opts.max_coords_per_param {
            (0..n).collect()
        } else {
            (0..opts.max_coords_per_param).map(|_| rng.index(n)).collect()
        };
        let mut max_rel = 0.0f64;
        for &c in &coords {
            let ad = grads.param_grad(p).map_or(0.0, |g| g.data()[c]);
            let orig = work.get(p).data()[c];
            work.get_mut(p).data_mut()[c] = orig + opts.step;
            let f_plus = eval(&work)?;
            work.get_mut(p).data_mut()[c] = orig - opts.step;
            let f_minus = eval(&work)?;
            work.get_mut(p).data_mut()[c] = orig;
            let fd = (f_plus - f_minus) / (2.0 * opts.step);
            max_rel = max_rel.max(rel_err(ad, fd));
        }
        worst = worst.max(max_rel);
        entries.push(GradCheckEntry {
            name: store.name(p).to_string(),
            max_rel_err: max_rel,
            coords_checked: coords.len(),
            pass: max_rel < opts.tol,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(GradCheckReport { entries, max_rel_err: worst, pass })
}
