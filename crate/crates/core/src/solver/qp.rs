//! Block-separable convex QP `min wᵀQw + 2bᵀw` used by every solver path.
//!
//! Each block of coordinates is either a plate set
//! `{0 ≤ w ≤ σ, <g,w> = a}` or the nonnegative cone `{w ≥ 0}`.

use nalgebra::{DMatrix, DVector};

use super::projection::project_plate;
use crate::error::Result;

#[derive(Clone, Debug)]
pub(crate) enum BlockKind {
    Mass { g: Vec<f64>, sigma: Vec<f64>, a: f64 },
    Cone,
}

#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub start: usize,
    pub end: usize,
    pub kind: BlockKind,
}

pub(crate) struct Qp {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub blocks: Vec<Block>,
}

pub(crate) struct QpOutcome {
    pub w: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Step {
    /// `η = 1/L` with `L = 2λ_max(Q)`.
    Fixed,
    /// Barzilai–Borwein trial step with Armijo backtracking on the
    /// projection arc.
    Spectral,
}

impl Qp {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn objective_from(&self, w: &DVector<f64>, qw: &DVector<f64>) -> f64 {
        w.dot(qw) + 2.0 * self.b.dot(w)
    }

    pub fn project(&self, v: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(v.len());
        for blk in &self.blocks {
            let seg = &v.as_slice()[blk.start..blk.end];
            match &blk.kind {
                BlockKind::Mass { g, sigma, a } => {
                    let w = project_plate(seg, g, sigma, *a, tol)?;
                    out.as_mut_slice()[blk.start..blk.end].copy_from_slice(&w);
                }
                BlockKind::Cone => {
                    for (o, x) in out.as_mut_slice()[blk.start..blk.end].iter_mut().zip(seg) {
                        *o = x.max(0.0);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest first-order optimality violation, with the best multiplier per
    /// mass block.
    pub fn kkt(&self, w: &DVector<f64>, grad: &DVector<f64>) -> (f64, Vec<f64>) {
        let mut worst = 0.0f64;
        let mut taus = Vec::new();
        for blk in &self.blocks {
            let ws = &w.as_slice()[blk.start..blk.end];
            let gs = &grad.as_slice()[blk.start..blk.end];
            match &blk.kind {
                BlockKind::Mass { g, sigma, .. } => {
                    let (r, tau) = mass_block_residual(ws, gs, g, sigma);
                    worst = worst.max(r);
                    taus.push(tau);
                }
                BlockKind::Cone => {
                    for (&x, &d) in ws.iter().zip(gs) {
                        let r = if x > 0.0 { d.abs() } else { (-d).max(0.0) };
                        worst = worst.max(r);
                    }
                }
            }
        }
        (worst, taus)
    }

    fn gradient(&self, qw: &DVector<f64>) -> DVector<f64> {
        (qw + &self.b) * 2.0
    }

    /// `∇ − τ_i g_i` on mass blocks. Steps that keep every block's g-mass
    /// fixed see the same slope, without the cancellation against `τ_i`.
    fn reduced(&self, grad: &DVector<f64>, taus: &[f64]) -> DVector<f64> {
        let mut r = grad.clone();
        let mut k = 0;
        for blk in &self.blocks {
            if let BlockKind::Mass { g, .. } = &blk.kind {
                for (x, gv) in r.as_mut_slice()[blk.start..blk.end].iter_mut().zip(g) {
                    *x -= taus[k] * gv;
                }
                k += 1;
            }
        }
        r
    }

    /// Projected gradient descent; every step decreases the objective.
    pub fn projected_gradient(
        &self,
        init: DVector<f64>,
        lipschitz: f64,
        step: Step,
        grad_tol: f64,
        max_iters: usize,
        proj_tol: f64,
    ) -> Result<QpOutcome> {
        let mut w = init;
        let mut qw = &self.q * &w;
        let mut f = self.objective_from(&w, &qw);
        let mut grad = self.gradient(&qw);
        let mut trace = vec![f];
        let eta_fixed = 1.0 / lipschitz;
        let (eta_min, eta_max) = (1e-10 * eta_fixed, 1e10 * eta_fixed);
        let mut eta = eta_fixed;
        let mut best = (f64::INFINITY, 0usize);
        let (mut residual, mut taus) = self.kkt(&w, &grad);
        let mut iterations = 0;
        while residual > grad_tol && iterations < max_iters {
            iterations += 1;
            let slope_dir = self.reduced(&grad, &taus);
            let (w_new, qw_new) = match step {
                Step::Fixed => {
                    let trial = self.project(&(&w - &grad * eta_fixed), proj_tol)?;
                    let d = &trial - &w;
                    if d.amax() == 0.0 {
                        break;
                    }
                    let qd = &self.q * &d;
                    (trial, &qw + &qd)
                }
                Step::Spectral => {
                    // Armijo backtracking on the projection arc.
                    let mut accepted = None;
                    for _ in 0..60 {
                        let trial = self.project(&(&w - &grad * eta), proj_tol)?;
                        let d = &trial - &w;
                        if d.amax() == 0.0 {
                            break;
                        }
                        let qd = &self.q * &d;
                        let slope = slope_dir.dot(&d);
                        if slope + d.dot(&qd) <= 1e-4 * slope {
                            accepted = Some((trial, &qw + &qd));
                            break;
                        }
                        eta *= 0.5;
                    }
                    match accepted {
                        Some(x) => x,
                        None => break,
                    }
                }
            };
            let s = &w_new - &w;
            let y = (&qw_new - &qw) * 2.0;
            w = w_new;
            qw = qw_new;
            // Refresh Qw now and then to keep incremental drift out.
            if iterations % 200 == 0 {
                qw = &self.q * &w;
            }
            f = self.objective_from(&w, &qw);
            grad = self.gradient(&qw);
            trace.push(f);
            if let Step::Spectral = step {
                let sy = s.dot(&y);
                eta = if sy > 0.0 {
                    (s.dot(&s) / sy).clamp(eta_min, eta_max)
                } else {
                    eta_max
                };
            }
            (residual, taus) = self.kkt(&w, &grad);
            if residual < best.0 {
                best = (residual, iterations);
            } else if iterations - best.1 > 20_000 {
                break;
            }
        }
        Ok(QpOutcome {
            converged: residual <= grad_tol,
            w,
            iterations,
            trace,
        })
    }

    /// Linear minimization oracle over the product of mass blocks.
    fn lmo(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(c.len());
        for blk in &self.blocks {
            let BlockKind::Mass { g, sigma, a } = &blk.kind else {
                unreachable!("Frank-Wolfe needs bounded blocks");
            };
            let cs = &c.as_slice()[blk.start..blk.end];
            let out = &mut v.as_mut_slice()[blk.start..blk.end];
            fill_knapsack(cs, g, sigma, *a, out);
        }
        v
    }

    /// Away-step Frank–Wolfe with exact line search.
    pub fn frank_wolfe(&self, init_direction: &DVector<f64>, grad_tol: f64, max_iters: usize) -> QpOutcome {
        struct Vertex {
            x: DVector<f64>,
            qx: DVector<f64>,
            weight: f64,
        }
        let first = self.lmo(init_direction);
        let qfirst = &self.q * &first;
        let mut active = vec![Vertex {
            x: first.clone(),
            qx: qfirst.clone(),
            weight: 1.0,
        }];
        let mut w = first;
        let mut qw = qfirst;
        let mut grad = self.gradient(&qw);
        let mut trace = vec![self.objective_from(&w, &qw)];
        let (mut residual, mut taus) = self.kkt(&w, &grad);
        let mut iterations = 0;
        while residual > grad_tol && iterations < max_iters {
            iterations += 1;
            let s = self.lmo(&grad);
            let slope_dir = self.reduced(&grad, &taus);
            let fw_gap = slope_dir.dot(&(&w - &s));
            let (away_idx, away_gap) = active
                .iter()
                .enumerate()
                .map(|(k, v)| (k, slope_dir.dot(&(&v.x - &w))))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            if fw_gap.max(away_gap) <= 0.0 {
                break;
            }
            let toward = fw_gap >= away_gap;
            let (d, qd, gamma_max, qs) = if toward {
                let qs = &self.q * &s;
                (&s - &w, &qs - &qw, 1.0, Some(qs))
            } else {
                let lam = active[away_idx].weight;
                let v = &active[away_idx];
                (&w - &v.x, &qw - &v.qx, lam / (1.0 - lam), None)
            };
            let slope = slope_dir.dot(&d);
            let curv = 2.0 * d.dot(&qd);
            let gamma = if curv > 0.0 {
                (-slope / curv).clamp(0.0, gamma_max)
            } else {
                gamma_max
            };
            if gamma == 0.0 {
                break;
            }
            if toward {
                for v in active.iter_mut() {
                    v.weight *= 1.0 - gamma;
                }
                match active.iter_mut().find(|v| v.x == s) {
                    Some(v) => v.weight += gamma,
                    None => active.push(Vertex {
                        x: s,
                        qx: qs.unwrap(),
                        weight: gamma,
                    }),
                }
                if gamma == 1.0 {
                    active.retain(|v| v.weight >= 1.0 - 1e-15);
                }
            } else {
                for v in active.iter_mut() {
                    v.weight *= 1.0 + gamma;
                }
                active[away_idx].weight -= gamma;
                if gamma >= gamma_max {
                    active.remove(away_idx);
                }
            }
            active.retain(|v| v.weight > 0.0);
            let total: f64 = active.iter().map(|v| v.weight).sum();
            for v in active.iter_mut() {
                v.weight /= total;
            }
            // Rebuild the iterate from the active set to avoid drift.
            w = active
                .iter()
                .fold(DVector::zeros(self.len()), |acc, v| acc + &v.x * v.weight);
            qw = active
                .iter()
                .fold(DVector::zeros(self.len()), |acc, v| acc + &v.qx * v.weight);
            self.clamp_to_box(&mut w);
            grad = self.gradient(&qw);
            trace.push(self.objective_from(&w, &qw));
            (residual, taus) = self.kkt(&w, &grad);
        }
        QpOutcome {
            converged: residual <= grad_tol,
            w,
            iterations,
            trace,
        }
    }

    fn clamp_to_box(&self, w: &mut DVector<f64>) {
        for blk in &self.blocks {
            if let BlockKind::Mass { sigma, .. } = &blk.kind {
                for (x, s) in w.as_mut_slice()[blk.start..blk.end].iter_mut().zip(sigma) {
                    // Convex combinations of capped vertices land an ulp short of σ.
                    *x = if *x >= s * (1.0 - 1e-14) { *s } else { x.max(0.0) };
                }
            }
        }
    }
}

/// Fractional knapsack: fill the cheapest `c/g` coordinates first until the
/// g-mass reaches `a`. Ties keep node order.
pub(crate) fn fill_knapsack(c: &[f64], g: &[f64], sigma: &[f64], a: f64, out: &mut [f64]) {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&p, &q| (c[p] / g[p]).total_cmp(&(c[q] / g[q])));
    let mut remaining = a;
    out.iter_mut().for_each(|x| *x = 0.0);
    for p in order {
        if remaining <= 0.0 {
            break;
        }
        let full = g[p] * sigma[p];
        if full <= remaining {
            out[p] = sigma[p];
            remaining -= full;
        } else {
            out[p] = remaining / g[p];
            remaining = 0.0;
        }
    }
}

/// Smallest achievable max-violation of the KKT conditions on one plate and
/// the multiplier achieving it.
///
/// Coordinates at 0 need `∇ − τg ≥ 0`, coordinates at σ need `∇ − τg ≤ 0`,
/// free coordinates need `∇ − τg = 0`. The worst violation is a convex
/// function of `τ` (max of increasing and decreasing pieces), minimized by
/// bisection on the crossing point.
pub(crate) fn mass_block_residual(w: &[f64], grad: &[f64], g: &[f64], sigma: &[f64]) -> (f64, f64) {
    let n = w.len();
    let pinned = |p: usize| sigma[p] == 0.0;
    let at_zero = |p: usize| w[p] <= 0.0;
    let at_cap = |p: usize| w[p] >= sigma[p];
    // rising(τ): violations that grow with τ; falling(τ): those that shrink.
    let rising = |tau: f64| {
        (0..n)
            .filter(|&p| !pinned(p) && !at_cap(p))
            .map(|p| tau * g[p] - grad[p])
            .fold(0.0f64, f64::max)
    };
    let falling = |tau: f64| {
        (0..n)
            .filter(|&p| !pinned(p) && !at_zero(p))
            .map(|p| grad[p] - tau * g[p])
            .fold(0.0f64, f64::max)
    };
    let ratios = (0..n).filter(|&p| !pinned(p)).map(|p| grad[p] / g[p]);
    let (mut lo, mut hi) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r), h.max(r)));
    if !lo.is_finite() {
        return (0.0, 0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rising(mid) > falling(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let r = rising(tau)
        .max(falling(tau))
        .min(rising(lo).max(falling(lo)))
        .min(rising(hi).max(falling(hi)));
    (r, tau)
}
