//! Kernel catalog, Gram assembly and positive-definiteness diagnostics.
//!
//! Every kernel in the catalog is singular on the diagonal (`κ(x,x) = ∞`), so
//! distances are regularized as `√(|x−y|² + ε²)`. With `ε > 0` the Riesz
//! family becomes the inverse-multiquadric family, which is strictly positive
//! definite on distinct nodes. A node then behaves like a small charge cell of
//! size `ε` rather than a point mass.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Rⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCondenser(format!("non-finite coordinate in {coords:?}")));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        squared_distance(&self.0, &other.0)
    }

    /// Bitwise identity key; `-0.0` and `0.0` map to the same key.
    pub fn key(&self) -> Vec<u64> {
        self.0
            .iter()
            .map(|&c| if c == 0.0 { 0u64 } else { c.to_bits() })
            .collect()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `|x−y|^(α−n)`, `0 < α < n`.
    Riesz { alpha: f64 },
    /// Riesz with `α = 2`, `n ≥ 3`.
    Newtonian,
    /// `−log|x−y|` restricted to the open unit disk of `R²`.
    LogDisk,
    /// Dense symmetric matrix addressed by node index.
    CustomTable { table: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    /// Diagonal regularization length. Ignored by custom tables.
    #[serde(default)]
    pub epsilon: f64,
}

impl KernelSpec {
    pub fn riesz(alpha: f64, epsilon: f64) -> Self {
        Self {
            family: KernelFamily::Riesz { alpha },
            epsilon,
        }
    }

    pub fn newtonian(epsilon: f64) -> Self {
        Self {
            family: KernelFamily::Newtonian,
            epsilon,
        }
    }

    pub fn log_disk(epsilon: f64) -> Self {
        Self {
            family: KernelFamily::LogDisk,
            epsilon,
        }
    }

    pub fn custom_table(table: Vec<Vec<f64>>) -> Self {
        Self {
            family: KernelFamily::CustomTable { table },
            epsilon: 0.0,
        }
    }

    pub fn is_geometric(&self) -> bool {
        !matches!(self.family, KernelFamily::CustomTable { .. })
    }

    /// Checks the parameter constraints for points of dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        match &self.family {
            KernelFamily::Riesz { alpha } => {
                if !(*alpha > 0.0 && *alpha < dim as f64) {
                    return Err(Error::InvalidKernel(format!(
                        "riesz order must satisfy 0 < alpha < n = {dim}, got {alpha}"
                    )));
                }
            }
            KernelFamily::Newtonian => {
                if dim < 3 {
                    return Err(Error::InvalidKernel(format!(
                        "newtonian kernel needs n >= 3, got n = {dim}"
                    )));
                }
            }
            KernelFamily::LogDisk => {
                if dim != 2 {
                    return Err(Error::InvalidKernel(format!(
                        "log_disk kernel needs n = 2, got n = {dim}"
                    )));
                }
            }
            KernelFamily::CustomTable { table } => validate_table(table)?,
        }
        Ok(())
    }

    /// Exponent applied to `|x−y|² + ε²`, for the power-law families.
    fn half_exponent(&self, dim: usize) -> Option<f64> {
        match self.family {
            KernelFamily::Riesz { alpha } => Some((alpha - dim as f64) / 2.0),
            KernelFamily::Newtonian => Some((2.0 - dim as f64) / 2.0),
            _ => None,
        }
    }

    /// Kernel value between two coordinate slices, assuming a validated spec.
    fn eval_coords(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2 = squared_distance(x, y) + self.epsilon * self.epsilon;
        match self.half_exponent(x.len()) {
            Some(-0.5) => 1.0 / r2.sqrt(),
            Some(e) => r2.powf(e),
            None => -0.5 * r2.ln(),
        }
    }

    pub fn evaluate(&self, x: &Point, y: &Point) -> Result<f64> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        if !self.is_geometric() {
            return Err(Error::TableNeedsIndex);
        }
        self.validate(x.dim())?;
        if self.family == KernelFamily::LogDisk {
            for p in [x, y] {
                check_in_disk(p)?;
            }
        }
        let v = self.eval_coords(x.coords(), y.coords());
        if !v.is_finite() {
            return Err(Error::NonFiniteKernel(x.0.clone(), y.0.clone()));
        }
        Ok(v)
    }

    /// Cross matrix `κ(xs[p], ys[q])` between two point lists.
    pub fn cross_matrix(&self, xs: &[Point], ys: &[Point]) -> Result<DMatrix<f64>> {
        if !self.is_geometric() {
            return Err(Error::TableNeedsIndex);
        }
        let dim = check_points(xs.iter().chain(ys))?;
        self.validate(dim)?;
        if self.family == KernelFamily::LogDisk {
            for p in xs.iter().chain(ys) {
                check_in_disk(p)?;
            }
        }
        let rows: Vec<Vec<f64>> = xs
            .par_iter()
            .map(|x| ys.iter().map(|y| self.eval_coords(x.coords(), y.coords())).collect())
            .collect();
        let m = DMatrix::from_fn(xs.len(), ys.len(), |p, q| rows[p][q]);
        if let Some((p, q)) = first_non_finite(&m) {
            return Err(Error::NonFiniteKernel(xs[p].0.clone(), ys[q].0.clone()));
        }
        Ok(m)
    }
}

fn validate_table(table: &[Vec<f64>]) -> Result<()> {
    let n = table.len();
    if n == 0 {
        return Err(Error::InvalidKernel("custom table is empty".into()));
    }
    for (p, row) in table.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidKernel(format!(
                "custom table row {p} has length {}, expected {n}",
                row.len()
            )));
        }
        for (q, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidKernel(format!(
                    "custom table entry ({p},{q}) is not finite"
                )));
            }
            if *v != table[q][p] {
                return Err(Error::InvalidKernel(format!(
                    "custom table is not symmetric at ({p},{q})"
                )));
            }
        }
    }
    Ok(())
}

fn check_in_disk(p: &Point) -> Result<()> {
    if squared_distance(p.coords(), &[0.0, 0.0]) < 1.0 {
        Ok(())
    } else {
        Err(Error::OutsideUnitDisk(p.0.clone()))
    }
}

fn check_points<'a>(mut points: impl Iterator<Item = &'a Point>) -> Result<usize> {
    let first = points
        .next()
        .ok_or_else(|| Error::EmptyDiscretization("no nodes to assemble a Gram matrix over".into()))?;
    let dim = first.dim();
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
    }
    Ok(dim)
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    m.iter()
        .position(|v| !v.is_finite())
        .map(|i| (i % m.nrows(), i / m.nrows()))
}

/// Free-function form of [`KernelSpec::evaluate`].
pub fn evaluate_kernel(spec: &KernelSpec, x: &Point, y: &Point) -> Result<f64> {
    spec.evaluate(x, y)
}

/// Dense symmetric Gram matrix plus the plate layout of its rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    plate_offsets: Vec<usize>,
}

impl GramMatrix {
    /// Wraps a matrix as a single-block Gram matrix. Fails unless it is square,
    /// finite and exactly symmetric.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        Self::with_layout(entries, vec![0, n])
    }

    /// Principal submatrix on the given global rows, with a new plate layout.
    pub(crate) fn select(&self, rows: &[usize], plate_offsets: Vec<usize>) -> Result<Self> {
        let m = DMatrix::from_fn(rows.len(), rows.len(), |p, q| self.entries[(rows[p], rows[q])]);
        Self::with_layout(m, plate_offsets)
    }

    pub(crate) fn with_layout(entries: DMatrix<f64>, plate_offsets: Vec<usize>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n || n == 0 {
            return Err(Error::ShapeMismatch(format!(
                "Gram matrix must be square and nonempty, got {}x{}",
                n,
                entries.ncols()
            )));
        }
        for p in 0..n {
            for q in 0..=p {
                let v = entries[(p, q)];
                if !v.is_finite() || v != entries[(q, p)] {
                    return Err(Error::InvalidKernel(format!(
                        "Gram entry ({p},{q}) is non-finite or asymmetric"
                    )));
                }
            }
        }
        debug_assert_eq!(plate_offsets.last(), Some(&n));
        Ok(Self { entries, plate_offsets })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn plate_count(&self) -> usize {
        self.plate_offsets.len() - 1
    }

    /// Global row of node `local` on plate `plate`.
    pub fn row(&self, plate: usize, local: usize) -> usize {
        self.plate_offsets[plate] + local
    }

    pub fn plate_rows(&self, plate: usize) -> std::ops::Range<usize> {
        self.plate_offsets[plate]..self.plate_offsets[plate + 1]
    }

    pub fn plate_offsets(&self) -> &[usize] {
        &self.plate_offsets
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.entries[(p, q)]
    }
}

/// Assembles `κ(nodes[p], nodes[q])` for all pairs. Custom tables are taken
/// verbatim and must have one row per node.
pub fn assemble_gram(spec: &KernelSpec, nodes: &[Point]) -> Result<GramMatrix> {
    let n = nodes.len();
    let entries = assemble_entries(spec, nodes)?;
    GramMatrix::with_layout(entries, vec![0, n])
}

pub(crate) fn assemble_entries(spec: &KernelSpec, nodes: &[Point]) -> Result<DMatrix<f64>> {
    let dim = check_points(nodes.iter())?;
    spec.validate(dim)?;
    let n = nodes.len();
    if let KernelFamily::CustomTable { table } = &spec.family {
        if table.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "custom table has {} rows but there are {n} nodes",
                table.len()
            )));
        }
        return Ok(DMatrix::from_fn(n, n, |p, q| table[p][q]));
    }
    if spec.family == KernelFamily::LogDisk {
        for p in nodes {
            check_in_disk(p)?;
        }
    }
    // Upper triangle row by row, mirrored afterwards so symmetry is exact.
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            nodes[p..]
                .iter()
                .map(|y| spec.eval_coords(nodes[p].coords(), y.coords()))
                .collect()
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (p, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let q = p + k;
            if !v.is_finite() {
                return Err(Error::NonFiniteKernel(nodes[p].0.clone(), nodes[q].0.clone()));
            }
            m[(p, q)] = v;
            m[(q, p)] = v;
        }
    }
    Ok(m)
}

/// Half of the minimum distance between distinct points, or `None` when all
/// points coincide.
pub fn default_epsilon(points: &[Point]) -> Option<f64> {
    let min_d2 = (0..points.len())
        .into_par_iter()
        .map(|p| {
            points[p + 1..]
                .iter()
                .map(|q| points[p].dist2(q))
                .filter(|&d2| d2 > 0.0)
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    min_d2.is_finite().then(|| 0.5 * min_d2.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PdDiagnosis {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub pd_tol: f64,
    pub is_pd: bool,
    pub is_strictly_pd: bool,
}

/// Relative tolerance used when no explicit `pd_tol` is given.
pub const DEFAULT_PD_RTOL: f64 = 1e-10;

/// Extreme eigenvalues of a symmetric matrix.
pub fn extreme_eigenvalues(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1)).ok_or(Error::EigenNoConvergence)?;
    let ev = eig.eigenvalues;
    if ev.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNoConvergence);
    }
    Ok((ev.min(), ev.max()))
}

/// `is_pd` means `λ_min ≥ −pd_tol`, `is_strictly_pd` means `λ_min > pd_tol`.
pub fn check_positive_definite(gram: &GramMatrix, pd_tol: f64) -> Result<PdDiagnosis> {
    let (min_eigenvalue, max_eigenvalue) = extreme_eigenvalues(gram.entries())?;
    Ok(PdDiagnosis {
        min_eigenvalue,
        max_eigenvalue,
        pd_tol,
        is_pd: min_eigenvalue >= -pd_tol,
        is_strictly_pd: min_eigenvalue > pd_tol,
    })
}

/// Same as [`check_positive_definite`] with `pd_tol = 1e-10·λ_max`.
pub fn diagnose(gram: &GramMatrix) -> Result<PdDiagnosis> {
    let (min_eigenvalue, max_eigenvalue) = extreme_eigenvalues(gram.entries())?;
    let pd_tol = DEFAULT_PD_RTOL * max_eigenvalue.abs().max(f64::MIN_POSITIVE);
    Ok(PdDiagnosis {
        min_eigenvalue,
        max_eigenvalue,
        pd_tol,
        is_pd: min_eigenvalue >= -pd_tol,
        is_strictly_pd: min_eigenvalue > pd_tol,
    })
}
