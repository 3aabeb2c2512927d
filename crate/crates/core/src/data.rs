//! Built-in 2D toy datasets and CSV point ingestion.
//!
//! All generators are deterministic functions of the supplied random stream,
//! so a fixed seed reproduces the identical cloud.

use std::f64::consts::PI;
use std::path::Path;

use crate::rng::RngStream;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Built-in dataset names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    TwoMoons,
    EightGaussians,
    Checkerboard,
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetKind::TwoMoons => write!(f, "two-moons"),
            DatasetKind::EightGaussians => write!(f, "eight-gaussians"),
            DatasetKind::Checkerboard => write!(f, "checkerboard"),
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-moons" => Ok(DatasetKind::TwoMoons),
            "eight-gaussians" => Ok(DatasetKind::EightGaussians),
            "checkerboard" => Ok(DatasetKind::Checkerboard),
            other => Err(Error::Config(format!(
                "unknown dataset '{other}' (expected 'two-moons', 'eight-gaussians', or 'checkerboard')"
            ))),
        }
    }
}

/// Generate `n` points of the named dataset.
pub fn dataset(kind: DatasetKind, n: usize, rng: &mut RngStream) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::Config("dataset size must be positive".into()));
    }
    Ok(match kind {
        DatasetKind::TwoMoons => two_moons(n, rng),
        DatasetKind::EightGaussians => eight_gaussians(n, rng),
        DatasetKind::Checkerboard => checkerboard(n, rng),
    })
}

/// Two interleaved half-circles with Gaussian noise (sigma = 0.05),
/// standardized to zero mean and unit variance per coordinate.
pub fn two_moons(n: usize, rng: &mut RngStream) -> Tensor {
    let mut pts = Tensor::zeros(n, 2);
    for i in 0..n {
        let t = rng.uniform_in(0.0, PI);
        let (mut x, mut y) = if i % 2 == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        x += 0.05 * rng.normal();
        y += 0.05 * rng.normal();
        pts.set(i, 0, x);
        pts.set(i, 1, y);
    }
    standardize(&pts)
}

/// Centers of the 8-Gaussian ring: angles `2 pi k / 8` on a radius-2 circle.
pub fn eight_gaussian_centers() -> Tensor {
    let mut c = Tensor::zeros(8, 2);
    for k in 0..8 {
        let a = 2.0 * PI * k as f64 / 8.0;
        c.set(k, 0, 2.0 * a.cos());
        c.set(k, 1, 2.0 * a.sin());
    }
    c
}

/// Mixture of 8 Gaussians (sigma = 0.15) on a radius-2 ring. Not
/// standardized, so the mode centers stay exactly on the ring.
pub fn eight_gaussians(n: usize, rng: &mut RngStream) -> Tensor {
    let centers = eight_gaussian_centers();
    let mut pts = Tensor::zeros(n, 2);
    for i in 0..n {
        let k = rng.index(8);
        pts.set(i, 0, centers.at(k, 0) + 0.15 * rng.normal());
        pts.set(i, 1, centers.at(k, 1) + 0.15 * rng.normal());
    }
    pts
}

/// Uniform samples on the 8 "black" unit cells of a 4x4 checkerboard
/// covering `[-2, 2]^2`.
pub fn checkerboard(n: usize, rng: &mut RngStream) -> Tensor {
    // Cells (i, j) with i + j even, enumerated row-major.
    let cells: Vec<(usize, usize)> = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .filter(|(i, j)| (i + j) % 2 == 0)
        .collect();
    let mut pts = Tensor::zeros(n, 2);
    for i in 0..n {
        let (ci, cj) = cells[rng.index(cells.len())];
        pts.set(i, 0, -2.0 + ci as f64 + rng.uniform());
        pts.set(i, 1, -2.0 + cj as f64 + rng.uniform());
    }
    pts
}

/// Shift and scale each column to zero mean and unit variance.
pub fn standardize(x: &Tensor) -> Tensor {
    let n = x.rows() as f64;
    let mut out = x.clone();
    for j in 0..x.cols() {
        let mean = (0..x.rows()).map(|i| x.at(i, j)).sum::<f64>() / n;
        let var = (0..x.rows()).map(|i| (x.at(i, j) - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-12);
        for i in 0..x.rows() {
            out.set(i, j, (x.at(i, j) - mean) / std);
        }
    }
    out
}

/// Zero-pad `[B, k]` rows into `[B, n]` (embedding 2D data into a larger
/// ambient space for the projector).
pub fn zero_pad(x: &Tensor, n: usize) -> Result<Tensor> {
    if n < x.cols() {
        return Err(Error::shape(
            "zero_pad",
            format!("target width {n} is below input width {}", x.cols()),
        ));
    }
    let mut out = Tensor::zeros(x.rows(), n);
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            out.set(i, j, x.at(i, j));
        }
    }
    Ok(out)
}

/// Count how many rows of `points` fall nearest to each row of `centers`.
pub fn nearest_center_counts(points: &Tensor, centers: &Tensor) -> Result<Vec<usize>> {
    if points.cols() != centers.cols() {
        return Err(Error::shape(
            "nearest_center_counts",
            format!("points are {:?}, centers are {:?}", points.shape(), centers.shape()),
        ));
    }
    let mut counts = vec![0usize; centers.rows()];
    for i in 0..points.rows() {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for c in 0..centers.rows() {
            let d: f64 = (0..points.cols())
                .map(|j| (points.at(i, j) - centers.at(c, j)).powi(2))
                .sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        counts[best] += 1;
    }
    Ok(counts)
}

/// Read a CSV of numeric columns into a `[P, d]` tensor. A non-numeric
/// first line is treated as a header; every other malformed cell or ragged
/// row is an error naming the offending line.
pub fn read_points_csv(path: &Path) -> Result<Tensor> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record =
            record.map_err(|e| Error::Format(format!("{} line {line}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(record.len());
        let mut bad_cell: Option<String> = None;
        for cell in record.iter() {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(v) => {
                    bad_cell = Some(format!("non-finite value {v}"));
                    break;
                }
                Err(_) => {
                    bad_cell = Some(format!("non-numeric cell '{}'", cell.trim()));
                    break;
                }
            }
        }
        if let Some(reason) = bad_cell {
            if line == 1 {
                // Header row; establishes nothing about the width.
                continue;
            }
            return Err(Error::Format(format!("{} line {line}: {reason}", path.display())));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Format(format!(
                    "{} line {line}: expected {w} columns, got {}",
                    path.display(),
                    row.len()
                )));
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| {
        Error::Format(format!("{}: no data rows", path.display()))
    })?;
    if width == 0 {
        return Err(Error::Format(format!("{}: rows have no columns", path.display())));
    }
    let mut t = Tensor::zeros(rows.len(), width);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t.set(i, j, *v);
        }
    }
    Ok(t)
}
