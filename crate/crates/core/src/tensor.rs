//! Dense row-major double-precision tensors.
//!
//! Everything in this crate runs on rank-2 tensors: a batch of vectors is a
//! `[rows, cols]` matrix with one sample per row, a single vector is `[1, n]`,
//! and a scalar is `[1, 1]`. Matrices that act on vectors (linear cores) are
//! stored in the mathematical column convention `m x n`, and batched
//! application multiplies by the transpose from the right.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor from an explicit shape and row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.len() != 2 {
            return Err(Error::shape("Tensor::new", format!("rank-2 shape required, got {shape:?}")));
        }
        if numel != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {shape:?} wants {numel} elements, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { shape: vec![rows, cols], data: vec![0.0; rows * cols] }
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Tensor { shape: vec![rows, cols], data: vec![value; rows * cols] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1, 1], data: vec![value] }
    }

    /// A single vector as a `[1, n]` row.
    pub fn row(values: Vec<f64>) -> Self {
        Tensor { shape: vec![1, values.len()], data: values }
    }

    /// A column vector `[n, 1]`.
    pub fn col(values: Vec<f64>) -> Self {
        Tensor { shape: vec![values.len(), 1], data: values }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Square matrix with `d` on the diagonal.
    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = d[i];
        }
        t
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::shape("Tensor::from_rows", "no rows"));
        }
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::shape(
                    "Tensor::from_rows",
                    format!("row {i} has {} entries, expected {c}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Tensor::new(vec![r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    /// Scalar value of a `[1,1]` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    /// Extract one row as a `[1, n]` tensor.
    pub fn row_tensor(&self, r: usize) -> Tensor {
        Tensor::row(self.row_slice(r).to_vec())
    }

    /// Stack a subset of rows (by index) into a new tensor.
    pub fn gather_rows(&self, idx: &[usize]) -> Tensor {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(self.row_slice(i));
        }
        Tensor { shape: vec![idx.len(), c], data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn scale(&self, a: f64) -> Tensor {
        self.map(|x| a * x)
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = Tensor::zeros(c, r);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        out
    }

    /// Dense matrix product, `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("[{m},{k}] x [{k2},{n}] inner dimensions differ"),
            ));
        }
        let mut out = Tensor::zeros(m, n);
        // i-k-j order keeps the inner loop contiguous in both `other` and `out`.
        for i in 0..m {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        Ok(out)
    }

    /// Elementwise binary op with limited rank-2 broadcasting: each dimension
    /// must either match or be 1 on the smaller operand.
    pub fn broadcast_zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (r, c) = broadcast_shape(self.shape(), other.shape(), op)?;
        let mut out = Tensor::zeros(r, c);
        let (ar, ac) = (self.rows(), self.cols());
        let (br, bc) = (other.rows(), other.cols());
        for i in 0..r {
            let ia = if ar == 1 { 0 } else { i };
            let ib = if br == 1 { 0 } else { i };
            for j in 0..c {
                let ja = if ac == 1 { 0 } else { j };
                let jb = if bc == 1 { 0 } else { j };
                out.data[i * c + j] = f(self.data[ia * ac + ja], other.data[ib * bc + jb]);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.broadcast_zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.broadcast_zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.broadcast_zip(other, "mul", |a, b| a * b)
    }

    /// Sum-reduce `self` down to `target` shape (inverse of broadcasting).
    pub fn reduce_to(&self, target: &[usize]) -> Tensor {
        if self.shape() == target {
            return self.clone();
        }
        let (tr, tc) = (target[0], target[1]);
        let (r, c) = (self.rows(), self.cols());
        let mut out = Tensor::zeros(tr, tc);
        for i in 0..r {
            let oi = if tr == 1 { 0 } else { i };
            for j in 0..c {
                let oj = if tc == 1 { 0 } else { j };
                out.data[oi * tc + oj] += self.data[i * c + j];
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    /// Infinity norm of the elementwise difference.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (&a, &b)| {
                let d = (a - b).abs();
                if d.is_nan() {
                    f64::INFINITY
                } else {
                    m.max(d)
                }
            })
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Euclidean norm of one row.
    pub fn row_norm(&self, r: usize) -> f64 {
        self.row_slice(r).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Horizontal concatenation `[r, a] ++ [r, b] -> [r, a+b]`.
    pub fn hcat(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows() != other.rows() {
            return Err(Error::shape(
                "hcat",
                format!("row counts differ: {} vs {}", self.rows(), other.rows()),
            ));
        }
        let (r, a, b) = (self.rows(), self.cols(), other.cols());
        let mut data = Vec::with_capacity(r * (a + b));
        for i in 0..r {
            data.extend_from_slice(self.row_slice(i));
            data.extend_from_slice(other.row_slice(i));
        }
        Tensor::new(vec![r, a + b], data)
    }

    /// Column slice `[r, n] -> [r, len]` starting at `start`.
    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Tensor> {
        if start + len > self.cols() {
            return Err(Error::shape(
                "slice_cols",
                format!("cols {}..{} out of range for width {}", start, start + len, self.cols()),
            ));
        }
        let r = self.rows();
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            let row = self.row_slice(i);
            data.extend_from_slice(&row[start..start + len]);
        }
        Tensor::new(vec![r, len], data)
    }
}

pub(crate) fn broadcast_shape(a: &[usize], b: &[usize], op: &'static str) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| -> Option<usize> {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    };
    match (dim(a[0], b[0]), dim(a[1], b[1])) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::shape(op, format!("cannot broadcast {a:?} with {b:?}"))),
    }
}

/// Error out on non-finite values; used at library boundaries so NaN/Inf can
/// never propagate silently into artifacts.
pub fn ensure_finite(t: &Tensor, context: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite values in {context}")))
    }
}
