//! Equilibrium measures, balayage, and the exhaustion and thin-body
//! experiments built on top of the solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::condenser::{
    check_feasibility, semimetric_distance, Condenser, Field, Plate, ScalarSignedMeasure, Sign, VectorMeasure,
};
use crate::error::{Error, Result};
use crate::geometry::{fibonacci_sphere, RotationalBody};
use crate::kernels::{assemble_entries, default_epsilon, GramMatrix, KernelSpec, Point};
use crate::solver::{minimize_blocks, pd_gate, solve_gated, Block, BlockKind, SolverConfig};

/// Default Frostman tolerance relative to the Robin constant.
pub const DEFAULT_FROSTMAN_RTOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    /// Unit-mass energy minimizer `ν*`.
    pub unit_minimizer: Vec<f64>,
    /// `W = κ(ν*, ν*)`.
    pub robin_constant: f64,
    /// `1/W`.
    pub capacity: f64,
    /// `θ = ν*/W`, with total mass and energy both equal to the capacity.
    pub equilibrium_measure: Vec<f64>,
    /// Worst of `W − κ(x,ν*)` over all nodes and `|κ(x,ν*) − W|` on the support.
    pub frostman_violation: f64,
    pub frostman_tol: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl EquilibriumReport {
    pub fn frostman_ok(&self) -> bool {
        self.frostman_violation <= self.frostman_tol
    }
}

/// Equilibrium measure and capacity of a node set.
///
/// Minimizes `νᵀKν` over probability vectors (a single plate with `g ≡ 1`,
/// `σ ≡ 1`, `a = 1`, no field). `frostman_tol` defaults to `1e-6·W`.
pub fn equilibrium(
    nodes: &[Point],
    k: &GramMatrix,
    frostman_tol: Option<f64>,
    cfg: &SolverConfig,
) -> Result<EquilibriumReport> {
    equilibrium_gated(nodes, k, frostman_tol, cfg, None)
}

fn equilibrium_gated(
    nodes: &[Point],
    k: &GramMatrix,
    frostman_tol: Option<f64>,
    cfg: &SolverConfig,
    lmax: Option<f64>,
) -> Result<EquilibriumReport> {
    let c = Condenser::new(vec![Plate::uniform(0, Sign::Positive, nodes.to_vec(), 1.0, 1.0)])?;
    let rep = solve_gated(&c, k, &Field::zero(&c), cfg, lmax)?;
    let w = rep.value;
    if !(w > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: w,
            pd_tol: 0.0,
        });
    }
    let nu = rep.minimizer.into_weights().remove(0);
    let pot = k.entries() * DVector::from_column_slice(&nu);
    let mut violation = 0.0f64;
    for (&x, &p) in nu.iter().zip(pot.iter()) {
        violation = violation.max(w - p);
        if x > 0.0 {
            violation = violation.max((p - w).abs());
        }
    }
    Ok(EquilibriumReport {
        equilibrium_measure: nu.iter().map(|x| x / w).collect(),
        unit_minimizer: nu,
        robin_constant: w,
        capacity: 1.0 / w,
        frostman_violation: violation,
        frostman_tol: frostman_tol.unwrap_or(DEFAULT_FROSTMAN_RTOL * w),
        iterations: rep.iterations,
        converged: rep.converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalayageReport {
    /// Swept weights on the target nodes.
    pub swept: Vec<f64>,
    /// Worst of `κ(x,source) − κ(x,β)` on the target and `|κ(x,β) − κ(x,source)|`
    /// on `supp β`.
    pub potential_residual: f64,
    pub tol: f64,
    pub source_mass: f64,
    pub swept_mass: f64,
    pub mass_ratio: f64,
    /// `‖source‖_κ`.
    pub source_norm: f64,
    /// `‖β‖_κ`.
    pub swept_norm: f64,
    /// `‖source − β‖²_κ`, the Green energy of the source relative to the target.
    pub green_energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Sweeps a nonnegative node measure onto `target`.
///
/// `β` is the energy-metric projection of the source onto the cone of
/// nonnegative measures on the target. The potential residual tolerance is
/// `cfg.grad_tol`. Source and target nodes may overlap.
pub fn balayage(
    kernel: &KernelSpec,
    source: &ScalarSignedMeasure,
    target: &[Point],
    cfg: &SolverConfig,
) -> Result<BalayageReport> {
    let mut joint: Vec<Point> = target.to_vec();
    let target_rows: Vec<usize> = (0..target.len()).collect();
    {
        let mut seen = std::collections::HashSet::new();
        for (r, p) in target.iter().enumerate() {
            if !seen.insert(p.key()) {
                return Err(Error::InvalidConfig(format!("duplicate target node {r}")));
            }
        }
    }
    let mut source_rows = Vec::with_capacity(source.support().len());
    for x in source.support() {
        match target.iter().position(|y| y.key() == x.key()) {
            Some(r) => source_rows.push(r),
            None => {
                source_rows.push(joint.len());
                joint.push(x.clone());
            }
        }
    }
    let entries = assemble_entries(kernel, &joint)?;
    balayage_rows(&entries, &source_rows, source.weights(), &target_rows, cfg, None)
}

/// Balayage on a precomputed joint Gram matrix, with the source and target
/// given as row indices into it.
pub fn balayage_on_gram(
    joint: &GramMatrix,
    source_rows: &[usize],
    source_weights: &[f64],
    target_rows: &[usize],
    cfg: &SolverConfig,
) -> Result<BalayageReport> {
    balayage_rows(joint.entries(), source_rows, source_weights, target_rows, cfg, None)
}

fn balayage_rows(
    joint: &DMatrix<f64>,
    source_rows: &[usize],
    source_weights: &[f64],
    target_rows: &[usize],
    cfg: &SolverConfig,
    lmax: Option<f64>,
) -> Result<BalayageReport> {
    cfg.validate()?;
    let n = joint.nrows();
    if source_rows.len() != source_weights.len() {
        return Err(Error::ShapeMismatch("source rows and weights differ in length".into()));
    }
    if target_rows.is_empty() {
        return Err(Error::EmptyDiscretization("balayage target has no nodes".into()));
    }
    if source_rows.iter().chain(target_rows).any(|&r| r >= n) {
        return Err(Error::ShapeMismatch("row index outside the joint Gram matrix".into()));
    }
    if source_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidField(
            "balayage source must be nonnegative and finite".into(),
        ));
    }
    let s = DVector::from_column_slice(source_weights);
    let k_tt = DMatrix::from_fn(target_rows.len(), target_rows.len(), |p, q| {
        joint[(target_rows[p], target_rows[q])]
    });
    let k_ts = DMatrix::from_fn(target_rows.len(), source_rows.len(), |p, q| {
        joint[(target_rows[p], source_rows[q])]
    });
    let k_ss = DMatrix::from_fn(source_rows.len(), source_rows.len(), |p, q| {
        joint[(source_rows[p], source_rows[q])]
    });
    let source_pot = &k_ts * &s;
    let nt = target_rows.len();
    let outcome = minimize_blocks(
        k_tt.clone(),
        -source_pot.clone(),
        vec![Block {
            start: 0,
            end: nt,
            kind: BlockKind::Cone,
        }],
        2.0 * cfg.grad_tol,
        cfg.iteration_limit(nt),
        cfg.projection_tol,
        lmax,
    )?;
    let beta = outcome.w;

    // Residual recomputed from the Gram rows, in potential units.
    let diff = &k_tt * &beta - &source_pot;
    let residual = beta.iter().zip(diff.iter()).fold(0.0f64, |m, (&b, &d)| {
        m.max(if b > 0.0 { d.abs() } else { (-d).max(0.0) })
    });
    let source_energy = s.dot(&(&k_ss * &s));
    let swept_energy = beta.dot(&(&k_tt * &beta));
    let source_mass: f64 = s.sum();
    let swept_mass: f64 = beta.sum();
    Ok(BalayageReport {
        potential_residual: residual,
        tol: cfg.grad_tol,
        source_mass,
        swept_mass,
        mass_ratio: if source_mass > 0.0 {
            swept_mass / source_mass
        } else {
            0.0
        },
        source_norm: source_energy.max(0.0).sqrt(),
        swept_norm: swept_energy.max(0.0).sqrt(),
        green_energy: (source_energy - 2.0 * beta.dot(&source_pot) + swept_energy).max(0.0),
        swept: beta.iter().copied().collect(),
        iterations: outcome.iterations,
        converged: residual <= cfg.grad_tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExhaustionStage {
    pub node_fraction: f64,
    pub sigma_scale: f64,
    /// Nodes kept on each plate.
    pub nodes: Vec<usize>,
    pub feasible: bool,
    /// First plate whose mass cannot be carried, for infeasible stages.
    pub infeasible_plate: Option<usize>,
    pub value: Option<f64>,
    /// `‖λ_K − λ‖` to the minimizer of the full problem.
    pub semimetric_gap: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExhaustionTrace {
    pub stages: Vec<ExhaustionStage>,
    pub full_value: f64,
    /// Feasible stage values are nonincreasing within `1e-8`.
    pub monotone: bool,
}

/// Solves the problem on growing node prefixes with inflated constraints.
///
/// Stage `k` keeps the first `⌈fractions[k]·N_i⌉` nodes of every plate and
/// multiplies their constraint by `betas[k]`. Stages that are infeasible are
/// recorded and skipped. The full problem must be feasible.
pub fn exhaustion_experiment(
    c: &Condenser,
    k: &GramMatrix,
    f: &Field,
    fractions: &[f64],
    betas: &[f64],
    cfg: &SolverConfig,
) -> Result<ExhaustionTrace> {
    if fractions.len() != betas.len() || fractions.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} node fractions but {} sigma scales",
            fractions.len(),
            betas.len()
        )));
    }
    if fractions.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
        return Err(Error::InvalidConfig("node fractions must lie in (0, 1]".into()));
    }
    if betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(Error::InvalidConfig("sigma scales must be positive".into()));
    }
    let lmax = pd_gate(k.entries())?;
    let full = solve_gated(c, k, f, cfg, Some(lmax))?;

    let mut stages = Vec::with_capacity(fractions.len());
    for (&frac, &beta) in fractions.iter().zip(betas) {
        let keep: Vec<Vec<usize>> = c
            .plates()
            .iter()
            .map(|p| (0..((frac * p.len() as f64).ceil() as usize).clamp(1, p.len())).collect())
            .collect();
        let sub = c.restrict(&keep, beta)?;
        let sub_f = f.restrict(&keep);
        let mut stage = ExhaustionStage {
            node_fraction: frac,
            sigma_scale: beta,
            nodes: keep.iter().map(Vec::len).collect(),
            feasible: true,
            infeasible_plate: None,
            value: None,
            semimetric_gap: None,
            kkt_residual: None,
            iterations: 0,
            converged: false,
        };
        if let Some((plate, _)) = check_feasibility(&sub, &sub_f).first_infeasible() {
            stage.feasible = false;
            stage.infeasible_plate = Some(plate);
            stages.push(stage);
            continue;
        }
        let rows: Vec<usize> = keep
            .iter()
            .enumerate()
            .flat_map(|(i, idx)| idx.iter().map(move |&p| c.offsets()[i] + p))
            .collect();
        let sub_k = k.select(&rows, sub.offsets().to_vec())?;
        let rep = solve_gated(&sub, &sub_k, &sub_f, cfg, Some(lmax))?;
        let padded = VectorMeasure::new(
            c.plates()
                .iter()
                .zip(rep.minimizer.weights())
                .map(|(p, w)| {
                    let mut v = vec![0.0; p.len()];
                    v[..w.len()].copy_from_slice(w);
                    v
                })
                .collect(),
        )?;
        stage.value = Some(rep.value);
        stage.semimetric_gap = Some(semimetric_distance(c, k, &padded, &full.minimizer)?);
        stage.kkt_residual = Some(rep.kkt_residual);
        stage.iterations = rep.iterations;
        stage.converged = rep.converged;
        stages.push(stage);
    }
    let values: Vec<f64> = stages.iter().filter_map(|s| s.value).collect();
    let monotone = values.windows(2).all(|w| w[1] <= w[0] + 1e-8);
    Ok(ExhaustionTrace {
        stages,
        full_value: full.value,
        monotone,
    })
}

/// Compact companions of the thin body: the positive plate `A₁` and the
/// source set `K`, both Fibonacci spheres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Companions {
    pub a1_center: [f64; 3],
    pub a1_radius: f64,
    pub a1_nodes: usize,
    pub k_center: [f64; 3],
    pub k_radius: f64,
    pub k_nodes: usize,
}

impl Default for Companions {
    fn default() -> Self {
        Self {
            a1_center: [-2.0, 0.0, 0.0],
            a1_radius: 0.5,
            a1_nodes: 48,
            k_center: [-2.0, 1.5, 0.0],
            k_radius: 0.25,
            k_nodes: 24,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinnessConfig {
    pub body: RotationalBody,
    pub radii: Vec<f64>,
    /// Newtonian regularization; defaults to half the minimum spacing of all
    /// nodes at the largest radius.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub companions: Companions,
    /// Also solve the constrained problem and measure the gap to the
    /// balayage candidate.
    #[serde(default = "yes")]
    pub with_gap: bool,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn yes() -> bool {
    true
}

impl ThinnessConfig {
    pub fn new(body: RotationalBody, radii: Vec<f64>) -> Self {
        Self {
            body,
            radii,
            epsilon: None,
            companions: Companions::default(),
            with_gap: true,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThinnessRow {
    pub radius: f64,
    pub nodes: usize,
    /// Where the body first becomes thinner than the resolution floor.
    pub unresolved_from: Option<f64>,
    pub capacity: f64,
    pub capacity_converged: bool,
    /// `θ(A₁ ∪ K)` swept onto the body, total mass.
    pub swept_mass: Option<f64>,
    /// `1 − β θ(A₂)`.
    pub mass_deficit: Option<f64>,
    /// Minimal value of the constrained problem.
    pub value: Option<f64>,
    /// `‖θ − βθ‖² − ‖θ_K‖²`, the lower bound the candidate attains.
    pub lower_bound: Option<f64>,
    /// Centre of mass of the negative plate's minimizer.
    pub minimizer_mass_center: Option<[f64; 3]>,
    pub gap_to_balayage_candidate: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThinnessReport {
    pub epsilon: f64,
    pub rows: Vec<ThinnessRow>,
    pub note: &'static str,
}

const THINNESS_NOTE: &str = "capacity trend only; at finite truncation an escaping minimizing sequence \
     and slow convergence look alike, so non-existence of minimizers is not certified";

/// Capacity of a truncated thin rotational body at several radii, and the
/// gap between the constrained minimizer and the balayage candidate.
///
/// Node sets are nested across radii and share one Newtonian kernel, so the
/// capacity sequence is nondecreasing up to solver tolerance.
pub fn thinness_demo(cfg: &ThinnessConfig) -> Result<ThinnessReport> {
    cfg.body.profile.validate(cfg.body.s)?;
    if cfg.radii.is_empty() {
        return Err(Error::InvalidConfig("no truncation radii".into()));
    }
    if cfg.radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("truncation radii must increase".into()));
    }
    let r_max = *cfg.radii.last().expect("nonempty");
    let body = cfg.body.nodes(r_max)?;
    let counts = cfg
        .radii
        .iter()
        .map(|&r| cfg.body.nodes(r).map(|v| v.len()))
        .collect::<Result<Vec<_>>>()?;
    let comp = &cfg.companions;
    let a1 = fibonacci_sphere(comp.a1_center, comp.a1_radius, comp.a1_nodes);
    let kset = fibonacci_sphere(comp.k_center, comp.k_radius, comp.k_nodes);
    let (na1, nk) = (a1.len(), kset.len());
    let mut all = Vec::with_capacity(na1 + nk + body.len());
    if cfg.with_gap {
        all.extend(a1.iter().cloned());
        all.extend(kset.iter().cloned());
    }
    let off = all.len();
    all.extend(body.iter().cloned());

    let eps = match cfg.epsilon {
        Some(e) => e,
        None => default_epsilon(&all)
            .ok_or_else(|| Error::EmptyDiscretization("need two distinct nodes for a default epsilon".into()))?,
    };
    let kernel = KernelSpec::newtonian(eps);
    let gram = GramMatrix::from_matrix(assemble_entries(&kernel, &all)?)?;
    let lmax = pd_gate(gram.entries())?;
    let solver = &cfg.solver;

    let mut rows = Vec::with_capacity(cfg.radii.len());
    for (&radius, &n) in cfg.radii.iter().zip(&counts) {
        let body_rows: Vec<usize> = (off..off + n).collect();
        let k_body = gram.select(&body_rows, vec![0, n])?;
        let eq = equilibrium_gated(&body[..n], &k_body, None, solver, Some(lmax))?;
        let mut row = ThinnessRow {
            radius,
            nodes: n,
            unresolved_from: cfg.body.unresolved_from(radius),
            capacity: eq.capacity,
            capacity_converged: eq.converged,
            swept_mass: None,
            mass_deficit: None,
            value: None,
            lower_bound: None,
            minimizer_mass_center: None,
            gap_to_balayage_candidate: None,
            converged: eq.converged,
        };
        if cfg.with_gap {
            let gap = candidate_gap(&gram, lmax, &kernel, (&a1, &kset, &body[..n]), &cfg.radii, solver)?;
            row.swept_mass = Some(gap.swept_mass);
            row.mass_deficit = Some(1.0 - gap.swept_mass);
            row.value = Some(gap.value);
            row.lower_bound = Some(gap.lower_bound);
            row.minimizer_mass_center = gap.center;
            row.gap_to_balayage_candidate = Some(gap.distance);
            row.converged &= gap.converged;
        }
        rows.push(row);
    }
    Ok(ThinnessReport {
        epsilon: eps,
        rows,
        note: THINNESS_NOTE,
    })
}

struct CandidateGap {
    swept_mass: f64,
    value: f64,
    lower_bound: f64,
    center: Option<[f64; 3]>,
    distance: f64,
    converged: bool,
}

/// Builds the constrained two-plate problem on `(A₁, A₂)` with field
/// `κ(·, θ_K)` and solves it; `gram` is laid out as `A₁, K, A₂(max radius)`.
fn candidate_gap(
    gram: &GramMatrix,
    lmax: f64,
    kernel: &KernelSpec,
    (a1, kset, body): (&[Point], &[Point], &[Point]),
    radii: &[f64],
    solver: &SolverConfig,
) -> Result<CandidateGap> {
    let (na1, nk, nb) = (a1.len(), kset.len(), body.len());
    let ns = na1 + nk;
    let g = gram.entries();

    // θ: probability on A₁ ∪ K of least Green energy, found jointly with its
    // balayage β ≥ 0 on the body.
    let joint: Vec<usize> = (0..ns + nb).collect();
    let sign = |p: usize| if p < ns { 1.0 } else { -1.0 };
    let q = DMatrix::from_fn(joint.len(), joint.len(), |p, r| sign(p) * sign(r) * g[(p, r)]);
    let theta_qp = minimize_blocks(
        q,
        DVector::zeros(joint.len()),
        vec![
            Block {
                start: 0,
                end: ns,
                kind: BlockKind::Mass {
                    g: vec![1.0; ns],
                    sigma: vec![1.0; ns],
                    a: 1.0,
                },
            },
            Block {
                start: ns,
                end: ns + nb,
                kind: BlockKind::Cone,
            },
        ],
        2.0 * solver.grad_tol,
        solver.iteration_limit(joint.len()),
        solver.projection_tol,
        Some(lmax),
    )?;
    let theta: Vec<f64> = theta_qp.w.as_slice()[..ns].to_vec();
    let theta_a1 = theta[..na1].to_vec();
    let theta_k = theta[na1..].to_vec();

    let source_rows: Vec<usize> = (0..ns).collect();
    let body_rows: Vec<usize> = (ns..ns + nb).collect();
    let swept = balayage_rows(g, &source_rows, &theta, &body_rows, solver, Some(lmax))?;
    let deficit = (1.0 - swept.swept_mass).max(0.0);

    // σ² = βθ + c·Σ ω_k, with ω_k the equilibrium measures of the pieces of
    // the body between consecutive radii.
    let mut sigma2 = swept.swept.clone();
    if deficit > 0.0 {
        let mut bounds = vec![0.0];
        bounds.extend(radii.iter().copied());
        bounds.push(f64::INFINITY);
        for w in bounds.windows(2) {
            let piece: Vec<usize> = (0..nb)
                .filter(|&p| {
                    let r = body[p].coords().iter().map(|x| x * x).sum::<f64>().sqrt();
                    r >= w[0] && r < w[1]
                })
                .collect();
            if piece.is_empty() {
                continue;
            }
            let rows: Vec<usize> = piece.iter().map(|&p| ns + p).collect();
            let k_piece = gram.select(&rows, vec![0, rows.len()])?;
            let nodes: Vec<Point> = piece.iter().map(|&p| body[p].clone()).collect();
            let omega = equilibrium_gated(&nodes, &k_piece, None, solver, Some(lmax))?;
            for (&p, &x) in piece.iter().zip(&omega.unit_minimizer) {
                sigma2[p] += deficit * x;
            }
        }
    }

    let a1_mass: f64 = theta_a1.iter().sum();
    if !(a1_mass > 0.0) {
        return Err(Error::InvalidConfig(
            "the Green equilibrium measure puts no mass on A1; move the companions".into(),
        ));
    }
    let c = Condenser::new(vec![
        Plate::new(
            0,
            Sign::Positive,
            a1.to_vec(),
            vec![1.0; na1],
            a1_mass,
            theta_a1.clone(),
        ),
        Plate::new(1, Sign::Negative, body.to_vec(), vec![1.0; nb], 1.0, sigma2),
    ])?;
    let zeta = ScalarSignedMeasure::new(kset.to_vec(), theta_k)?;
    let field = Field::case2(&c, kernel, zeta)?;
    let zeta_energy = field.zeta().map(|(_, e)| e).unwrap_or(0.0);
    let rows: Vec<usize> = (0..na1).chain(ns..ns + nb).collect();
    let k_c = gram.select(&rows, c.offsets().to_vec())?;
    let rep = solve_gated(&c, &k_c, &field, solver, Some(lmax))?;

    let candidate = VectorMeasure::new(vec![theta_a1, swept.swept.clone()])?;
    let mu2 = rep.minimizer.plate(1);
    let m: f64 = mu2.iter().sum();
    let center = (m > 0.0).then(|| {
        let mut c3 = [0.0; 3];
        for (p, &w) in body.iter().zip(mu2) {
            for (c, x) in c3.iter_mut().zip(p.coords()) {
                *c += w * x / m;
            }
        }
        c3
    });
    Ok(CandidateGap {
        swept_mass: swept.swept_mass,
        value: rep.value,
        lower_bound: swept.green_energy - zeta_energy,
        center,
        distance: semimetric_distance(&c, &k_c, &rep.minimizer, &candidate)?,
        converged: rep.converged && swept.converged && theta_qp.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Profile;
    use approx::assert_relative_eq;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn tight() -> SolverConfig {
        SolverConfig {
            grad_tol: 1e-11,
            max_iters: Some(100_000),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn single_node_capacity() {
        let nodes = vec![pt(&[0.0, 0.0, 0.0])];
        let k = GramMatrix::from_matrix(DMatrix::from_element(1, 1, 4.0)).unwrap();
        let eq = equilibrium(&nodes, &k, None, &tight()).unwrap();
        assert_eq!(eq.unit_minimizer, vec![1.0]);
        assert_eq!(eq.robin_constant, 4.0);
        assert_eq!(eq.capacity, 0.25);
        assert!(eq.frostman_ok());
    }

    #[test]
    fn two_node_capacity() {
        let nodes = vec![pt(&[0.0]), pt(&[1.0])];
        let (d, c) = (3.0, 1.0);
        let k = GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[d, c, c, d])).unwrap();
        let eq = equilibrium(&nodes, &k, None, &tight()).unwrap();
        assert_relative_eq!(eq.unit_minimizer[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(eq.robin_constant, (d + c) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn equilibrium_normalization() {
        let nodes = fibonacci_sphere([0.0; 3], 1.0, 60);
        let k = assemble_entries(&KernelSpec::newtonian(0.1), &nodes).unwrap();
        let k = GramMatrix::from_matrix(k).unwrap();
        let eq = equilibrium(&nodes, &k, None, &tight()).unwrap();
        assert!(eq.converged && eq.frostman_ok(), "{}", eq.frostman_violation);
        let theta = DVector::from_column_slice(&eq.equilibrium_measure);
        let mass = theta.sum();
        let energy = theta.dot(&(k.entries() * &theta));
        assert_relative_eq!(mass, eq.capacity, max_relative = 1e-8);
        assert_relative_eq!(energy, eq.capacity, max_relative = 1e-8);
    }

    #[test]
    fn balayage_onto_single_node() {
        let kernel = KernelSpec::newtonian(0.5);
        let source = ScalarSignedMeasure::new(vec![pt(&[0., 0., 0.]), pt(&[1., 1., 0.])], vec![0.7, 0.2]).unwrap();
        let y = pt(&[2.0, 0.0, 0.0]);
        let rep = balayage(&kernel, &source, std::slice::from_ref(&y), &tight()).unwrap();
        let pot: f64 = source
            .support()
            .iter()
            .zip(source.weights())
            .map(|(x, w)| w * kernel.evaluate(&y, x).unwrap())
            .sum();
        let expect = (pot / kernel.evaluate(&y, &y).unwrap()).max(0.0);
        assert_relative_eq!(rep.swept[0], expect, max_relative = 1e-10);
    }

    #[test]
    fn balayage_fixes_measures_on_target() {
        let kernel = KernelSpec::newtonian(0.3);
        let target = fibonacci_sphere([0.0; 3], 1.0, 20);
        let source = ScalarSignedMeasure::new(target[3..6].to_vec(), vec![0.5, 0.25, 0.25]).unwrap();
        let rep = balayage(&kernel, &source, &target, &tight()).unwrap();
        for (p, &b) in rep.swept.iter().enumerate() {
            let expect = if (3..6).contains(&p) {
                source.weights()[p - 3]
            } else {
                0.0
            };
            assert!((b - expect).abs() < 1e-8, "{p}: {b} vs {expect}");
        }
        assert!(rep.green_energy < 1e-12);
    }

    #[test]
    fn balayage_rejects_negative_source() {
        let source = ScalarSignedMeasure::new(vec![pt(&[0., 0., 0.])], vec![-1.0]).unwrap();
        let err = balayage(&KernelSpec::newtonian(0.1), &source, &[pt(&[1., 0., 0.])], &tight());
        assert!(matches!(err, Err(Error::InvalidField(_))));
    }

    fn two_plate(n: usize, sigma: f64) -> Condenser {
        let left: Vec<Point> = (0..n).map(|k| pt(&[-1.0, k as f64 * 0.2, 0.0])).collect();
        let right: Vec<Point> = (0..n).map(|k| pt(&[1.0, k as f64 * 0.2, 0.3])).collect();
        Condenser::new(vec![
            Plate::uniform(0, Sign::Positive, left, 1.0, sigma),
            Plate::uniform(1, Sign::Negative, right, 0.5, sigma),
        ])
        .unwrap()
    }

    #[test]
    fn single_stage_exhaustion_is_the_full_solve() {
        let c = two_plate(8, 0.4);
        let k = c.gram(&KernelSpec::newtonian(0.1)).unwrap();
        let f = Field::zero(&c);
        let trace = exhaustion_experiment(&c, &k, &f, &[1.0], &[1.0], &tight()).unwrap();
        assert_eq!(trace.stages.len(), 1);
        let st = &trace.stages[0];
        assert_relative_eq!(st.value.unwrap(), trace.full_value, max_relative = 1e-12);
        assert!(st.semimetric_gap.unwrap() < 1e-9);
    }

    #[test]
    fn inflated_constraints_restore_feasibility() {
        // 8 nodes with sigma 0.2 carry 1.6; a quarter carries 0.4 < 1 even
        // when inflated, half carries 0.8·1.5 = 1.2.
        let c = two_plate(8, 0.2);
        let k = c.gram(&KernelSpec::newtonian(0.1)).unwrap();
        let f = Field::zero(&c);
        let trace = exhaustion_experiment(&c, &k, &f, &[0.25, 0.5, 1.0], &[1.5, 1.5, 1.0], &tight()).unwrap();
        assert!(!trace.stages[0].feasible);
        assert_eq!(trace.stages[0].infeasible_plate, Some(0));
        assert!(trace.stages[1].feasible && trace.stages[2].feasible);
        let plain = exhaustion_experiment(&c, &k, &f, &[0.5], &[1.0], &tight()).unwrap();
        assert!(!plain.stages[0].feasible);
    }

    #[test]
    fn exhaustion_schedule_is_validated() {
        let c = two_plate(4, 1.0);
        let k = c.gram(&KernelSpec::newtonian(0.1)).unwrap();
        let f = Field::zero(&c);
        assert!(exhaustion_experiment(&c, &k, &f, &[0.5, 1.0], &[1.0], &tight()).is_err());
        assert!(exhaustion_experiment(&c, &k, &f, &[1.5], &[1.0], &tight()).is_err());
    }

    #[test]
    fn thinness_single_radius() {
        let body = RotationalBody::new(Profile::PowerS, 1.0, 1.0);
        let rep = thinness_demo(&ThinnessConfig::new(body, vec![3.0])).unwrap();
        assert_eq!(rep.rows.len(), 1);
        let row = &rep.rows[0];
        assert!(row.capacity > 0.0);
        assert!(row.converged);
        let lb = row.lower_bound.unwrap();
        assert!(row.value.unwrap() >= lb - 1e-6, "{} < {lb}", row.value.unwrap());
    }

    #[test]
    fn thinness_radii_must_increase() {
        let body = RotationalBody::new(Profile::PowerS, 1.0, 1.0);
        assert!(thinness_demo(&ThinnessConfig::new(body, vec![3.0, 2.0])).is_err());
    }
}
