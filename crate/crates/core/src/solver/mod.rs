//! Minimization of `G_f` over `{0 ≤ μ^i ≤ σ^i, <g_i,μ^i> = a_i}`.
//!
//! With a positive semidefinite Gram matrix the objective
//! `G_f(μ) = (Sw)ᵀK(Sw) + 2fᵀw` is convex, so a first-order KKT point is a
//! global minimizer. Two independent algorithms are provided so one can be
//! checked against the other.

mod projection;
pub(crate) mod qp;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use projection::project_plate;

use crate::condenser::{check_feasibility, weighted_energy, Condenser, Field, VectorMeasure};
use crate::error::{Error, Result};
use crate::kernels::{extreme_eigenvalues, GramMatrix, DEFAULT_PD_RTOL};
pub(crate) use qp::{Block, BlockKind};
use qp::{Qp, Step};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ProjectedGradient,
    FrankWolfe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `η = 1/λ_max(2·SKS)`.
    FixedLipschitz,
    /// Barzilai–Borwein trial step, halved until the projected step gives
    /// sufficient decrease.
    Backtracking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// `None` means `50·N` for `N` total nodes.
    pub max_iters: Option<usize>,
    pub grad_tol: f64,
    pub step_rule: StepRule,
    pub projection_tol: f64,
    /// 0 starts from the scaled constraint; any other value draws a random
    /// feasible start.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::ProjectedGradient,
            max_iters: None,
            grad_tol: 1e-8,
            step_rule: StepRule::Backtracking,
            projection_tol: 1e-14,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn frank_wolfe() -> Self {
        Self {
            algorithm: Algorithm::FrankWolfe,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == Some(0) {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.projection_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be > 0".into()));
        }
        Ok(())
    }

    pub(crate) fn iteration_limit(&self, n: usize) -> usize {
        self.max_iters.unwrap_or(50 * n.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub minimizer: VectorMeasure,
    /// `G_f` at the minimizer, recomputed from scratch.
    pub value: f64,
    pub kkt_residual: f64,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktCertificate {
    pub ok: bool,
    pub max_residual: f64,
    pub multipliers: Vec<f64>,
}

/// Largest eigenvalue of a PSD matrix; exact for small sizes, power
/// iteration (inflated by 1%) otherwise.
pub(crate) fn lambda_max(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if n <= 400 {
        return Ok(extreme_eigenvalues(m)?.1);
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 1e-3 * ((i * 7919) % 101) as f64);
    v.normalize_mut();
    let mut est = 0.0;
    for _ in 0..1000 {
        let mv = m * &v;
        let next = v.dot(&mv);
        let norm = mv.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = mv / norm;
        if (next - est).abs() <= 1e-12 * next.abs() {
            est = next;
            break;
        }
        est = next;
    }
    Ok(1.01 * est)
}

/// Refuses matrices with `λ_min < −1e-10·λ_max`. Returns `λ_max`.
pub(crate) fn pd_gate(k: &DMatrix<f64>) -> Result<f64> {
    let n = k.nrows();
    if n <= 400 {
        let (lo, hi) = extreme_eigenvalues(k)?;
        let pd_tol = DEFAULT_PD_RTOL * hi.abs();
        if lo < -pd_tol {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: lo,
                pd_tol,
            });
        }
        return Ok(hi);
    }
    let hi = lambda_max(k)?;
    let pd_tol = DEFAULT_PD_RTOL * hi;
    let shifted = k + DMatrix::identity(n, n) * pd_tol;
    if Cholesky::new(shifted).is_none() {
        let (lo, _) = extreme_eigenvalues(k)?;
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lo,
            pd_tol,
        });
    }
    Ok(hi)
}

/// Builds the signed QP. Nodes where the field is `+∞` are pinned to 0.
fn build_qp(c: &Condenser, k: &GramMatrix, f: &Field) -> Result<Qp> {
    if k.size() != c.total_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "Gram matrix of size {} for {} nodes",
            k.size(),
            c.total_nodes()
        )));
    }
    let signs = c.row_signs();
    let n = signs.len();
    let q = DMatrix::from_fn(n, n, |p, r| signs[p] * signs[r] * k.get(p, r));
    let blocks = c
        .plates()
        .iter()
        .enumerate()
        .map(|(i, plate)| Block {
            start: c.offsets()[i],
            end: c.offsets()[i + 1],
            kind: BlockKind::Mass {
                g: plate.g.clone(),
                sigma: (0..plate.len())
                    .map(|p| if f.is_infinite_at(i, p) { 0.0 } else { plate.sigma[p] })
                    .collect(),
                a: plate.mass,
            },
        })
        .collect();
    Ok(Qp {
        q,
        b: f.finite_flat(),
        blocks,
    })
}

fn initial_point(qp: &Qp, seed: u64, tol: f64) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(qp.len());
    let mut rng = (seed != 0).then(|| ChaCha8Rng::seed_from_u64(seed));
    for blk in &qp.blocks {
        let BlockKind::Mass { g, sigma, a } = &blk.kind else {
            continue;
        };
        let cap: f64 = g.iter().zip(sigma).map(|(g, s)| g * s).sum();
        for (k, s) in sigma.iter().enumerate() {
            v[blk.start + k] = match rng.as_mut() {
                Some(r) => r.gen::<f64>() * s,
                None => s * a / cap,
            };
        }
    }
    qp.project(&v, tol)
}

/// Minimizes `wᵀQw + 2bᵀw` over a product of plate sets and nonnegative
/// cones with the spectral projected gradient, starting from the scaled
/// constraint (cones start at 0).
pub(crate) fn minimize_blocks(
    q: DMatrix<f64>,
    b: DVector<f64>,
    blocks: Vec<Block>,
    grad_tol: f64,
    max_iters: usize,
    proj_tol: f64,
    lmax: Option<f64>,
) -> Result<qp::QpOutcome> {
    let qp = Qp { q, b, blocks };
    let lmax = match lmax {
        Some(l) => l,
        None => pd_gate(&qp.q)?,
    };
    let init = initial_point(&qp, 0, proj_tol)?;
    qp.projected_gradient(
        init,
        (2.0 * lmax).max(f64::MIN_POSITIVE),
        Step::Spectral,
        grad_tol,
        max_iters,
        proj_tol,
    )
}

/// Minimizes `G_f` over the admissible class.
///
/// Fails on infeasible problems and on Gram matrices that are not positive
/// semidefinite (the objective could then be unbounded below). Reaching
/// `max_iters` is not an error: the report then has `converged = false`.
pub fn solve(c: &Condenser, k: &GramMatrix, f: &Field, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_gated(c, k, f, cfg, None)
}

/// [`solve`] with an optional known `λ_max(K)`; callers passing one must have
/// already checked `K` (or a matrix it is a principal submatrix of).
pub(crate) fn solve_gated(
    c: &Condenser,
    k: &GramMatrix,
    f: &Field,
    cfg: &SolverConfig,
    lmax: Option<f64>,
) -> Result<SolveReport> {
    cfg.validate()?;
    check_feasibility(c, f).into_result()?;
    let qp = build_qp(c, k, f)?;
    let lmax = match lmax {
        Some(l) => l,
        None => pd_gate(k.entries())?,
    };
    let init = initial_point(&qp, cfg.seed, cfg.projection_tol)?;
    let limit = cfg.iteration_limit(qp.len());
    let outcome = match cfg.algorithm {
        Algorithm::ProjectedGradient => {
            let step = match cfg.step_rule {
                StepRule::FixedLipschitz => Step::Fixed,
                StepRule::Backtracking => Step::Spectral,
            };
            let lipschitz = (2.0 * lmax).max(f64::MIN_POSITIVE);
            qp.projected_gradient(init, lipschitz, step, cfg.grad_tol, limit, cfg.projection_tol)?
        }
        Algorithm::FrankWolfe => {
            // Start from the vertex best aligned with the gradient at `init`.
            let grad = (&qp.q * &init + &qp.b) * 2.0;
            qp.frank_wolfe(&grad, cfg.grad_tol, limit)
        }
    };
    let minimizer = VectorMeasure::from_flat(c, outcome.w.as_slice())?;
    let value = weighted_energy(c, k, f, &minimizer)?;
    let (kkt_residual, multipliers) = qp.kkt(&outcome.w, &((&qp.q * &outcome.w + &qp.b) * 2.0));
    Ok(SolveReport {
        minimizer,
        value,
        kkt_residual,
        multipliers,
        iterations: outcome.iterations,
        converged: outcome.converged,
        objective_trace: outcome.trace,
    })
}

/// Independent optimality certificate for an admissible `μ`.
///
/// Recomputes `∇G_f` from the Gram matrix and, for each plate, picks the
/// multiplier `τ_i` that minimizes the worst violation of
/// `r = ∇G_f − τ_i g_i ≥ 0` at zero weights, `≤ 0` at the cap, `= 0` in
/// between. `ok` iff the worst violation is at most `tol`.
pub fn verify_kkt(c: &Condenser, k: &GramMatrix, f: &Field, mu: &VectorMeasure, tol: f64) -> Result<KktCertificate> {
    mu.check_shape(c)?;
    let signs = c.row_signs();
    let s = mu.signed_flat(c)?;
    let pot = k.entries() * s;
    let field = f.finite_flat();
    let w = mu.flat();
    let mut max_residual = 0.0f64;
    let mut multipliers = Vec::with_capacity(c.plates().len());
    for (i, plate) in c.plates().iter().enumerate() {
        let range = c.offsets()[i]..c.offsets()[i + 1];
        let grad: Vec<f64> = range
            .clone()
            .map(|r| 2.0 * signs[r] * pot[r] + 2.0 * field[r])
            .collect();
        let sigma: Vec<f64> = (0..plate.len())
            .map(|p| if f.is_infinite_at(i, p) { 0.0 } else { plate.sigma[p] })
            .collect();
        let (r, tau) = qp::mass_block_residual(&w.as_slice()[range], &grad, &plate.g, &sigma);
        max_residual = max_residual.max(r);
        multipliers.push(tau);
    }
    Ok(KktCertificate {
        ok: max_residual <= tol,
        max_residual,
        multipliers,
    })
}
