//! Signed condensers, vector measures and the energies built on them.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{assemble_entries, GramMatrix, KernelSpec, Point};

/// Relative slack allowed when comparing `a` with `<g,σ>`.
pub const FEASIBILITY_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Sign::Positive),
            -1 => Ok(Sign::Negative),
            _ => Err(Error::InvalidCondenser(format!("sign must be +1 or -1, got {v}"))),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s.value() as i8
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plate {
    pub id: usize,
    pub sign: Sign,
    pub nodes: Vec<Point>,
    /// Weight function `g_i` sampled at the nodes; strictly positive.
    pub g: Vec<f64>,
    /// Prescribed g-mass `a_i > 0`.
    pub mass: f64,
    /// Constraint `σ^i` as per-node upper bounds.
    pub sigma: Vec<f64>,
}

impl Plate {
    pub fn new(id: usize, sign: Sign, nodes: Vec<Point>, g: Vec<f64>, mass: f64, sigma: Vec<f64>) -> Self {
        Self {
            id,
            sign,
            nodes,
            g,
            mass,
            sigma,
        }
    }

    /// Plate with `g ≡ 1` and a constant bound.
    pub fn uniform(id: usize, sign: Sign, nodes: Vec<Point>, mass: f64, sigma: f64) -> Self {
        let n = nodes.len();
        Self::new(id, sign, nodes, vec![1.0; n], mass, vec![sigma; n])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `<g, σ>`.
    pub fn capacity(&self) -> f64 {
        self.g.iter().zip(&self.sigma).map(|(g, s)| g * s).sum()
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCondenser(format!("plate {index}: {msg}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        if self.g.len() != self.nodes.len() || self.sigma.len() != self.nodes.len() {
            return bad(format!(
                "{} nodes but {} g values and {} sigma values",
                self.nodes.len(),
                self.g.len(),
                self.sigma.len()
            ));
        }
        if let Some(p) = self.g.iter().position(|g| !(*g > 0.0 && g.is_finite())) {
            return bad(format!("g must be positive and finite (node {p})"));
        }
        if let Some(p) = self.sigma.iter().position(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad(format!("sigma must be nonnegative and finite (node {p})"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        let mut seen = HashMap::with_capacity(self.nodes.len());
        for (p, node) in self.nodes.iter().enumerate() {
            if let Some(q) = seen.insert(node.key(), p) {
                return bad(format!("nodes {q} and {p} coincide"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condenser {
    plates: Vec<Plate>,
    dim: usize,
    offsets: Vec<usize>,
}

impl Condenser {
    /// Validates plates and the separation of oppositely signed plates.
    /// Equally signed plates may overlap or coincide.
    pub fn new(plates: Vec<Plate>) -> Result<Self> {
        if plates.is_empty() {
            return Err(Error::InvalidCondenser("no plates".into()));
        }
        for (i, p) in plates.iter().enumerate() {
            p.validate(i)?;
        }
        let dim = plates[0].nodes[0].dim();
        for (i, p) in plates.iter().enumerate() {
            if let Some(bad) = p.nodes.iter().find(|x| x.dim() != dim) {
                return Err(Error::InvalidCondenser(format!(
                    "plate {i}: node of dimension {} in a condenser of dimension {dim}",
                    bad.dim()
                )));
            }
        }
        for (i, pi) in plates.iter().enumerate() {
            for (j, pj) in plates.iter().enumerate().skip(i + 1) {
                if pi.sign == pj.sign {
                    continue;
                }
                let min_d2 = pi
                    .nodes
                    .iter()
                    .flat_map(|x| pj.nodes.iter().map(move |y| x.dist2(y)))
                    .fold(f64::INFINITY, f64::min);
                if min_d2 <= 0.0 {
                    return Err(Error::InvalidCondenser(format!(
                        "oppositely signed plates {i} and {j} share a node"
                    )));
                }
            }
        }
        let mut offsets = Vec::with_capacity(plates.len() + 1);
        offsets.push(0);
        for p in &plates {
            offsets.push(offsets.last().unwrap() + p.len());
        }
        Ok(Self { plates, dim, offsets })
    }

    pub fn plates(&self) -> &[Plate] {
        &self.plates
    }

    pub fn plate(&self, i: usize) -> &Plate {
        &self.plates[i]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// All nodes in global row order (plates concatenated).
    pub fn nodes(&self) -> Vec<Point> {
        self.plates.iter().flat_map(|p| p.nodes.iter().cloned()).collect()
    }

    /// Plate sign of every global row.
    pub fn row_signs(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.total_nodes(),
            self.plates
                .iter()
                .flat_map(|p| std::iter::repeat_n(p.sign.value(), p.len())),
        )
    }

    /// Gram matrix over all nodes, with plate blocks laid out in plate order.
    pub fn gram(&self, kernel: &KernelSpec) -> Result<GramMatrix> {
        let entries = assemble_entries(kernel, &self.nodes())?;
        GramMatrix::with_layout(entries, self.offsets.clone())
    }

    /// Returns a copy with every plate restricted to the given local node
    /// indices; `sigma_scale` multiplies the surviving constraint values.
    pub fn restrict(&self, keep: &[Vec<usize>], sigma_scale: f64) -> Result<Condenser> {
        if keep.len() != self.plates.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} selections for {} plates",
                keep.len(),
                self.plates.len()
            )));
        }
        let plates = self
            .plates
            .iter()
            .zip(keep)
            .map(|(p, idx)| {
                if let Some(&bad) = idx.iter().find(|&&k| k >= p.len()) {
                    return Err(Error::ShapeMismatch(format!(
                        "plate {}: node index {bad} out of range",
                        p.id
                    )));
                }
                Ok(Plate {
                    id: p.id,
                    sign: p.sign,
                    nodes: idx.iter().map(|&k| p.nodes[k].clone()).collect(),
                    g: idx.iter().map(|&k| p.g[k]).collect(),
                    mass: p.mass,
                    sigma: idx.iter().map(|&k| p.sigma[k] * sigma_scale).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Condenser::new(plates)
    }

    /// Returns a copy with replaced constraint values.
    pub fn with_sigma(&self, sigma: Vec<Vec<f64>>) -> Result<Condenser> {
        if sigma.len() != self.plates.len() {
            return Err(Error::ShapeMismatch("sigma plate count".into()));
        }
        let plates = self
            .plates
            .iter()
            .zip(sigma)
            .map(|(p, s)| Plate { sigma: s, ..p.clone() })
            .collect();
        Condenser::new(plates)
    }

    /// Splits a flat vector indexed by global rows into per-plate vectors.
    pub fn split(&self, flat: &[f64]) -> Vec<Vec<f64>> {
        self.offsets.windows(2).map(|w| flat[w[0]..w[1]].to_vec()).collect()
    }
}

/// Per-plate nonnegative node weights `μ = (μ^i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorMeasure {
    weights: Vec<Vec<f64>>,
}

impl VectorMeasure {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        for (i, w) in weights.iter().enumerate() {
            if let Some(p) = w.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::ShapeMismatch(format!(
                    "plate {i}: weight {p} must be finite and >= 0, got {}",
                    w[p]
                )));
            }
        }
        Ok(Self { weights })
    }

    pub fn zeros(c: &Condenser) -> Self {
        Self {
            weights: c.plates.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn from_flat(c: &Condenser, flat: &[f64]) -> Result<Self> {
        if flat.len() != c.total_nodes() {
            return Err(Error::ShapeMismatch(format!(
                "flat vector of length {} for {} nodes",
                flat.len(),
                c.total_nodes()
            )));
        }
        Self::new(c.split(flat))
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn plate(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn into_weights(self) -> Vec<Vec<f64>> {
        self.weights
    }

    pub fn check_shape(&self, c: &Condenser) -> Result<()> {
        if self.weights.len() != c.plates.len() || self.weights.iter().zip(&c.plates).any(|(w, p)| w.len() != p.len()) {
            return Err(Error::ShapeMismatch(format!(
                "measure shape {:?} does not match condenser shape {:?}",
                self.weights.iter().map(Vec::len).collect::<Vec<_>>(),
                c.plates.iter().map(Plate::len).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }

    pub fn flat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.weights.iter().map(Vec::len).sum(),
            self.weights.iter().flatten().copied(),
        )
    }

    /// Flat vector with plate signs applied, `S·w`.
    pub fn signed_flat(&self, c: &Condenser) -> Result<DVector<f64>> {
        self.check_shape(c)?;
        Ok(self.flat().component_mul(&c.row_signs()))
    }

    /// `<g_i, μ^i>` per plate.
    pub fn g_masses(&self, c: &Condenser) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&c.plates)
            .map(|(w, p)| w.iter().zip(&p.g).map(|(w, g)| w * g).sum())
            .collect()
    }
}

/// Signed weights on distinct points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarSignedMeasure {
    support: Vec<Point>,
    weights: Vec<f64>,
}

impl ScalarSignedMeasure {
    pub fn new(support: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} support points, {} weights",
                support.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidField("signed measure weights must be finite".into()));
        }
        let mut seen = HashMap::with_capacity(support.len());
        for (p, x) in support.iter().enumerate() {
            if seen.insert(x.key(), p).is_some() {
                return Err(Error::InvalidField(format!(
                    "support point {p} repeats an earlier point"
                )));
            }
        }
        Ok(Self { support, weights })
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted sum `self + scale·other`, merging exactly coincident points.
    pub fn add_scaled(&self, other: &ScalarSignedMeasure, scale: f64) -> ScalarSignedMeasure {
        let mut acc = Accumulator::default();
        for (x, w) in self.support.iter().zip(&self.weights) {
            acc.add(x, *w);
        }
        for (x, w) in other.support.iter().zip(&other.weights) {
            acc.add(x, scale * w);
        }
        acc.finish()
    }
}

#[derive(Default)]
struct Accumulator {
    index: HashMap<Vec<u64>, usize>,
    support: Vec<Point>,
    weights: Vec<f64>,
}

impl Accumulator {
    fn add(&mut self, x: &Point, w: f64) {
        match self.index.get(&x.key()) {
            Some(&k) => self.weights[k] += w,
            None => {
                self.index.insert(x.key(), self.support.len());
                self.support.push(x.clone());
                self.weights.push(w);
            }
        }
    }

    fn finish(self) -> ScalarSignedMeasure {
        ScalarSignedMeasure {
            support: self.support,
            weights: self.weights,
        }
    }
}

/// `Rμ = Σ α_i μ^i`. Coincident node locations are merged by exact
/// coordinate equality; locations whose weights cancel keep weight 0.
pub fn r_map(c: &Condenser, mu: &VectorMeasure) -> Result<ScalarSignedMeasure> {
    mu.check_shape(c)?;
    let mut acc = Accumulator::default();
    for (plate, w) in c.plates.iter().zip(&mu.weights) {
        for (x, wx) in plate.nodes.iter().zip(w) {
            acc.add(x, plate.sign.value() * wx);
        }
    }
    Ok(acc.finish())
}

fn check_gram(c: &Condenser, k: &GramMatrix) -> Result<()> {
    if k.size() != c.total_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "Gram matrix of size {} for {} nodes",
            k.size(),
            c.total_nodes()
        )));
    }
    Ok(())
}

/// `κ(μ,μ) = Σ_{i,j} α_i α_j κ(μ^i, μ^j)`.
pub fn energy(c: &Condenser, k: &GramMatrix, mu: &VectorMeasure) -> Result<f64> {
    mutual_energy(c, k, mu, mu)
}

/// `κ(μ,ν) = Σ_{i,j} α_i α_j κ(μ^i, ν^j)`.
pub fn mutual_energy(c: &Condenser, k: &GramMatrix, mu: &VectorMeasure, nu: &VectorMeasure) -> Result<f64> {
    check_gram(c, k)?;
    let s = mu.signed_flat(c)?;
    let t = nu.signed_flat(c)?;
    Ok(s.dot(&(k.entries() * t)))
}

/// Energy seminorm `‖μ − ν‖`, clamped at zero against rounding.
pub fn semimetric_distance(c: &Condenser, k: &GramMatrix, mu: &VectorMeasure, nu: &VectorMeasure) -> Result<f64> {
    check_gram(c, k)?;
    let d = mu.signed_flat(c)? - nu.signed_flat(c)?;
    Ok(d.dot(&(k.entries() * &d)).max(0.0).sqrt())
}

/// Scalar mutual energy `κ(m1, m2)` evaluated through the kernel.
pub fn scalar_mutual_energy(kernel: &KernelSpec, m1: &ScalarSignedMeasure, m2: &ScalarSignedMeasure) -> Result<f64> {
    if m1.support.is_empty() || m2.support.is_empty() {
        return Ok(0.0);
    }
    let cross = kernel.cross_matrix(&m1.support, &m2.support)?;
    let w1 = DVector::from_column_slice(&m1.weights);
    let w2 = DVector::from_column_slice(&m2.weights);
    Ok(w1.dot(&(cross * w2)))
}

pub fn scalar_energy(kernel: &KernelSpec, m: &ScalarSignedMeasure) -> Result<f64> {
    scalar_mutual_energy(kernel, m, m)
}

/// User-level description of the external field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum FieldSpec {
    /// Arbitrary node values in `(−∞, +∞]` per plate.
    Case1 { values: Vec<Vec<f64>> },
    /// `f_i = α_i κ(·, ζ)`.
    Case2 { zeta: ScalarSignedMeasure },
}

impl FieldSpec {
    pub fn zero(c: &Condenser) -> Self {
        FieldSpec::Case1 {
            values: c.plates.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    /// Samples the field at the condenser nodes.
    pub fn resolve(&self, c: &Condenser, kernel: &KernelSpec) -> Result<Field> {
        match self {
            FieldSpec::Case1 { values } => Field::case1(c, values.clone()),
            FieldSpec::Case2 { zeta } => Field::case2(c, kernel, zeta.clone()),
        }
    }
}

/// Field values sampled at the nodes of a specific condenser.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    values: Vec<Vec<f64>>,
    zeta: Option<(ScalarSignedMeasure, f64)>,
}

impl Field {
    pub fn zero(c: &Condenser) -> Self {
        Self {
            values: c.plates.iter().map(|p| vec![0.0; p.len()]).collect(),
            zeta: None,
        }
    }

    pub fn case1(c: &Condenser, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != c.plates.len() || values.iter().zip(&c.plates).any(|(v, p)| v.len() != p.len()) {
            return Err(Error::ShapeMismatch("field values do not match the condenser".into()));
        }
        if values.iter().flatten().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidField("case1 values must lie in (-inf, +inf]".into()));
        }
        Ok(Self { values, zeta: None })
    }

    pub fn case2(c: &Condenser, kernel: &KernelSpec, zeta: ScalarSignedMeasure) -> Result<Self> {
        let zeta_energy = scalar_energy(kernel, &zeta)?;
        if !zeta_energy.is_finite() {
            return Err(Error::InvalidField("zeta must have finite energy".into()));
        }
        let values = if zeta.support.is_empty() {
            Field::zero(c).values
        } else {
            let cross = kernel.cross_matrix(&c.nodes(), &zeta.support)?;
            let pot = cross * DVector::from_column_slice(&zeta.weights);
            c.plates
                .iter()
                .zip(c.offsets.windows(2))
                .map(|(p, w)| pot.as_slice()[w[0]..w[1]].iter().map(|v| p.sign.value() * v).collect())
                .collect()
        };
        Ok(Self {
            values,
            zeta: Some((zeta, zeta_energy)),
        })
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `ζ` and `‖ζ‖²` for case II fields.
    pub fn zeta(&self) -> Option<(&ScalarSignedMeasure, f64)> {
        self.zeta.as_ref().map(|(z, e)| (z, *e))
    }

    pub fn is_infinite_at(&self, plate: usize, node: usize) -> bool {
        self.values[plate][node] == f64::INFINITY
    }

    /// `<f, μ>` with the convention `0·∞ = 0`.
    pub fn pairing(&self, mu: &VectorMeasure) -> f64 {
        let mut total = 0.0;
        for (f, w) in self.values.iter().zip(mu.weights()) {
            for (fv, wv) in f.iter().zip(w) {
                if *wv == 0.0 {
                    continue;
                }
                if *fv == f64::INFINITY {
                    return f64::INFINITY;
                }
                total += fv * wv;
            }
        }
        total
    }

    /// Flat field vector with `+∞` replaced by 0 (those nodes are pinned to 0
    /// by the solver).
    pub(crate) fn finite_flat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.values.iter().map(Vec::len).sum(),
            self.values
                .iter()
                .flatten()
                .map(|&v| if v == f64::INFINITY { 0.0 } else { v }),
        )
    }

    /// The field on a node subset, as selected by [`Condenser::restrict`].
    pub(crate) fn restrict(&self, keep: &[Vec<usize>]) -> Field {
        Field {
            values: self
                .values
                .iter()
                .zip(keep)
                .map(|(v, idx)| idx.iter().map(|&k| v[k]).collect())
                .collect(),
            zeta: self.zeta.clone(),
        }
    }

    /// Largest finite `|f|` on each plate.
    pub fn max_abs(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.iter().filter(|x| x.is_finite()).fold(0.0f64, |m, x| m.max(x.abs())))
            .collect()
    }
}

/// `G_f(μ) = κ(μ,μ) + 2<f,μ>`; `+∞` when an infinite-field node carries charge.
pub fn weighted_energy(c: &Condenser, k: &GramMatrix, f: &Field, mu: &VectorMeasure) -> Result<f64> {
    mu.check_shape(c)?;
    if f.values.len() != c.plates.len() || f.values.iter().zip(&c.plates).any(|(v, p)| v.len() != p.len()) {
        return Err(Error::ShapeMismatch("field values do not match the condenser".into()));
    }
    let lin = f.pairing(mu);
    if lin == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(energy(c, k, mu)? + 2.0 * lin)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlateFeasibility {
    pub feasible: bool,
    /// `Σ gσ` over finite-field nodes minus `a`.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Feasibility {
    pub plates: Vec<PlateFeasibility>,
    pub feasible: bool,
}

impl Feasibility {
    pub fn first_infeasible(&self) -> Option<(usize, f64)> {
        self.plates
            .iter()
            .enumerate()
            .find(|(_, p)| !p.feasible)
            .map(|(i, p)| (i, p.slack))
    }

    pub fn into_result(self) -> Result<Self> {
        match self.first_infeasible() {
            Some((plate, slack)) => Err(Error::Infeasible { plate, slack }),
            None => Ok(self),
        }
    }
}

/// Plate `i` is feasible iff `a_i ≤ Σ g_i σ_i` over nodes where `f_i < +∞`.
pub fn check_feasibility(c: &Condenser, f: &Field) -> Feasibility {
    let plates: Vec<PlateFeasibility> = c
        .plates
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let cap: f64 = (0..p.len())
                .filter(|&k| !f.is_infinite_at(i, k))
                .map(|k| p.g[k] * p.sigma[k])
                .sum();
            let slack = cap - p.mass;
            PlateFeasibility {
                feasible: slack >= -FEASIBILITY_RTOL * p.mass,
                slack,
            }
        })
        .collect();
    let feasible = plates.iter().all(|p| p.feasible);
    Feasibility { plates, feasible }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn single(sign: Sign, x: &[f64]) -> Plate {
        Plate::uniform(0, sign, vec![pt(x)], 1.0, 1.0)
    }

    #[test]
    fn rejects_touching_opposite_plates() {
        let err = Condenser::new(vec![single(Sign::Positive, &[0.0]), single(Sign::Negative, &[0.0])]);
        assert!(matches!(err, Err(Error::InvalidCondenser(_))));
        // equally signed plates may coincide
        Condenser::new(vec![single(Sign::Positive, &[0.0]), single(Sign::Positive, &[0.0])]).unwrap();
    }

    #[test]
    fn rejects_bad_plates() {
        let mut p = single(Sign::Positive, &[0.0]);
        p.g = vec![0.0];
        assert!(Condenser::new(vec![p]).is_err());
        let mut p = single(Sign::Positive, &[0.0]);
        p.sigma = vec![-1.0];
        assert!(Condenser::new(vec![p]).is_err());
        let mut p = single(Sign::Positive, &[0.0]);
        p.mass = 0.0;
        assert!(Condenser::new(vec![p]).is_err());
        let dup = Plate::uniform(0, Sign::Positive, vec![pt(&[1.0]), pt(&[1.0])], 1.0, 1.0);
        assert!(Condenser::new(vec![dup]).is_err());
        let empty = Plate::uniform(0, Sign::Positive, vec![], 1.0, 1.0);
        assert!(Condenser::new(vec![empty]).is_err());
    }

    #[test]
    fn r_map_merges_equal_sign_charges() {
        let c = Condenser::new(vec![single(Sign::Positive, &[0.0]), single(Sign::Positive, &[0.0])]).unwrap();
        let mu = VectorMeasure::new(vec![vec![2.0], vec![3.0]]).unwrap();
        let r = r_map(&c, &mu).unwrap();
        assert_eq!(r.weights(), &[5.0]);
        assert_eq!(r.support().len(), 1);
    }

    #[test]
    fn r_map_signed_and_zero() {
        let c = Condenser::new(vec![single(Sign::Positive, &[0.0]), single(Sign::Negative, &[1.0])]).unwrap();
        let mu = VectorMeasure::new(vec![vec![0.7], vec![0.4]]).unwrap();
        assert_eq!(r_map(&c, &mu).unwrap().weights(), &[0.7, -0.4]);
        let zero = r_map(&c, &VectorMeasure::zeros(&c)).unwrap();
        assert_eq!(zero.weights(), &[0.0, 0.0]);
        assert_eq!(zero.support().len(), 2);
    }

    #[test]
    fn r_map_keeps_cancelled_locations() {
        // a positive and negative plate cannot share a node, but two positive
        // plates can: weights add, and zero weights are kept
        let c = Condenser::new(vec![single(Sign::Positive, &[0.0]), single(Sign::Positive, &[0.0])]).unwrap();
        let r = r_map(&c, &VectorMeasure::zeros(&c)).unwrap();
        assert_eq!(r.support().len(), 1);
        assert_eq!(r.weights(), &[0.0]);
    }

    #[test]
    fn energy_small_cases() {
        let c = Condenser::new(vec![single(Sign::Positive, &[0.0]), single(Sign::Negative, &[1.0])]).unwrap();
        let k = GramMatrix::with_layout(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]),
            c.offsets().to_vec(),
        )
        .unwrap();
        assert_eq!(energy(&c, &k, &VectorMeasure::zeros(&c)).unwrap(), 0.0);
        let (w1, w2) = (0.3, 0.8);
        let mu = VectorMeasure::new(vec![vec![w1], vec![w2]]).unwrap();
        let expected = 2.0 * w1 * w1 + 3.0 * w2 * w2 - 2.0 * 0.5 * w1 * w2;
        assert_relative_eq!(energy(&c, &k, &mu).unwrap(), expected, max_relative = 1e-15);
        assert_eq!(mutual_energy(&c, &k, &mu, &VectorMeasure::zeros(&c)).unwrap(), 0.0);
        assert_eq!(mutual_energy(&c, &k, &mu, &mu).unwrap(), energy(&c, &k, &mu).unwrap());
    }

    #[test]
    fn energy_single_node() {
        let c = Condenser::new(vec![single(Sign::Negative, &[0.0])]).unwrap();
        let k = GramMatrix::from_matrix(DMatrix::from_element(1, 1, 4.0)).unwrap();
        let mu = VectorMeasure::new(vec![vec![0.5]]).unwrap();
        assert_eq!(energy(&c, &k, &mu).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let c = Condenser::new(vec![single(Sign::Positive, &[0.0])]).unwrap();
        let k = GramMatrix::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let mu = VectorMeasure::new(vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(energy(&c, &k, &mu), Err(Error::ShapeMismatch(_))));
        assert!(matches!(r_map(&c, &mu), Err(Error::ShapeMismatch(_))));
        assert!(VectorMeasure::new(vec![vec![-1.0]]).is_err());
    }

    #[test]
    fn weighted_energy_conventions() {
        let c = Condenser::new(vec![single(Sign::Positive, &[0.0])]).unwrap();
        let k = GramMatrix::from_matrix(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let mu = VectorMeasure::new(vec![vec![0.5]]).unwrap();
        let zero = Field::zero(&c);
        assert_eq!(
            weighted_energy(&c, &k, &zero, &mu).unwrap(),
            energy(&c, &k, &mu).unwrap()
        );
        let inf = Field::case1(&c, vec![vec![f64::INFINITY]]).unwrap();
        assert_eq!(weighted_energy(&c, &k, &inf, &mu).unwrap(), f64::INFINITY);
        // 0·∞ = 0
        let none = VectorMeasure::zeros(&c);
        assert_eq!(weighted_energy(&c, &k, &inf, &none).unwrap(), 0.0);
        assert!(Field::case1(&c, vec![vec![f64::NEG_INFINITY]]).is_err());
    }

    #[test]
    fn feasibility_examples() {
        let two = |sigma: Vec<f64>| {
            Condenser::new(vec![Plate::new(
                0,
                Sign::Positive,
                vec![pt(&[0.0]), pt(&[1.0])],
                vec![1.0, 1.0],
                1.0,
                sigma,
            )])
            .unwrap()
        };
        let c = two(vec![0.0, 0.0]);
        let v = check_feasibility(&c, &Field::zero(&c));
        assert!(!v.feasible);
        assert_eq!(v.plates[0].slack, -1.0);

        let c = two(vec![0.6, 0.6]);
        let v = check_feasibility(&c, &Field::zero(&c));
        assert!(v.feasible);
        assert_relative_eq!(v.plates[0].slack, 0.2, epsilon = 1e-15);

        let c = two(vec![1.0, 1.0]);
        let f = Field::case1(&c, vec![vec![f64::INFINITY, 0.0]]).unwrap();
        let v = check_feasibility(&c, &f);
        assert!(v.feasible);
        assert_eq!(v.plates[0].slack, 0.0);
        let f = Field::case1(&c, vec![vec![f64::INFINITY, f64::INFINITY]]).unwrap();
        assert!(!check_feasibility(&c, &f).feasible);
    }

    #[test]
    fn restrict_scales_sigma() {
        let c = Condenser::new(vec![Plate::uniform(
            0,
            Sign::Positive,
            vec![pt(&[0.0]), pt(&[1.0]), pt(&[2.0])],
            1.0,
            0.5,
        )])
        .unwrap();
        let r = c.restrict(&[vec![0, 2]], 2.0).unwrap();
        assert_eq!(r.plate(0).sigma, vec![1.0, 1.0]);
        assert_eq!(r.plate(0).nodes[1], pt(&[2.0]));
        assert!(c.restrict(&[vec![3]], 1.0).is_err());
    }
}
