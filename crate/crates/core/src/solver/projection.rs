//! Euclidean projection onto `{0 ≤ w ≤ σ, <g,w> = a}`.

use crate::error::{Error, Result};

/// Projects `v` onto the box-and-hyperplane set of one plate.
///
/// The projection is `clip(v − τ*·g, 0, σ)` where `τ*` is the root of the
/// nonincreasing piecewise-linear map `τ ↦ <g, clip(v − τg, 0, σ)> − a`.
/// The root is bracketed by bisection down to `tol`, after which `τ*` is
/// solved exactly on the active set found at the bracket midpoint.
pub fn project_plate(v: &[f64], g: &[f64], sigma: &[f64], a: f64, tol: f64) -> Result<Vec<f64>> {
    let n = v.len();
    if g.len() != n || sigma.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "projection inputs of lengths {n}, {}, {}",
            g.len(),
            sigma.len()
        )));
    }
    let cap: f64 = g.iter().zip(sigma).map(|(g, s)| g * s).sum();
    let slack_tol = 1e-12 * a.abs().max(f64::MIN_POSITIVE);
    if !(a >= 0.0) || a > cap + slack_tol {
        return Err(Error::ProjectionInfeasible { a, capacity: cap });
    }
    if cap - a <= slack_tol {
        return Ok(sigma.to_vec());
    }
    if a == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let clip = |tau: f64| -> Vec<f64> { (0..n).map(|p| (v[p] - tau * g[p]).clamp(0.0, sigma[p])).collect() };
    let mass = |w: &[f64]| -> f64 { w.iter().zip(g).map(|(w, g)| w * g).sum() };

    // At `lo` every coordinate is capped (mass = cap > a); at `hi` all are 0.
    let mut lo = (0..n).map(|p| (v[p] - sigma[p]) / g[p]).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|p| v[p] / g[p]).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        if hi - lo <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mass(&clip(mid)) > a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);

    // Exact root on the active set at `mid`.
    let (mut num, mut den, mut capped) = (0.0, 0.0, 0.0);
    for p in 0..n {
        let t = v[p] - mid * g[p];
        if t >= sigma[p] {
            capped += g[p] * sigma[p];
        } else if t > 0.0 {
            num += g[p] * v[p];
            den += g[p] * g[p];
        }
    }
    let mut w = if den > 0.0 {
        let tau = (num - (a - capped)) / den;
        let w = clip(tau);
        if (mass(&w) - a).abs() <= 1e-13 * a {
            w
        } else {
            clip(mid)
        }
    } else {
        clip(mid)
    };

    // Remaining rounding error goes onto coordinates strictly inside the box.
    let err = a - mass(&w);
    if err != 0.0 {
        let free: Vec<usize> = (0..n).filter(|&p| w[p] > 0.0 && w[p] < sigma[p]).collect();
        let gg: f64 = free.iter().map(|&p| g[p] * g[p]).sum();
        if gg > 0.0 {
            for &p in &free {
                w[p] = (w[p] + err * g[p] / gg).clamp(0.0, sigma[p]);
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn already_feasible_point_is_fixed() {
        let w = project_plate(&[0.9, 0.1], &[1.0, 1.0], &[1.0, 1.0], 1.0, 1e-14).unwrap();
        assert_relative_eq!(w[0], 0.9, epsilon = 1e-15);
        assert_relative_eq!(w[1], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn box_cap_binds() {
        let w = project_plate(&[2.0, 0.0], &[1.0, 1.0], &[1.0, 1.0], 1.0, 1e-14).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
    }

    #[test]
    fn symmetric_split() {
        let w = project_plate(&[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0], 1.0, 1e-14).unwrap();
        assert_relative_eq!(w[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(w[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_plate_returns_sigma() {
        let w = project_plate(&[5.0, -3.0], &[2.0, 1.0], &[0.25, 0.5], 1.0, 1e-14).unwrap();
        assert_eq!(w, vec![0.25, 0.5]);
    }

    #[test]
    fn infeasible_mass_is_rejected() {
        assert!(matches!(
            project_plate(&[0.0], &[1.0], &[0.5], 1.0, 1e-14),
            Err(Error::ProjectionInfeasible { .. })
        ));
        assert!(project_plate(&[0.0], &[1.0], &[0.5], -0.1, 1e-14).is_err());
    }

    /// Brute-force projection: the optimum is determined by which coordinates
    /// sit at 0, at σ, or are free; enumerate all 3ⁿ labelings.
    fn brute_force(v: &[f64], g: &[f64], s: &[f64], a: f64) -> Vec<f64> {
        let n = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for code in 0..3usize.pow(n as u32) {
            let mut labels = vec![0u8; n];
            let mut c = code;
            for l in labels.iter_mut() {
                *l = (c % 3) as u8;
                c /= 3;
            }
            let fixed: f64 = (0..n).filter(|&p| labels[p] == 2).map(|p| g[p] * s[p]).sum();
            let free: Vec<usize> = (0..n).filter(|&p| labels[p] == 1).collect();
            let mut w: Vec<f64> = (0..n).map(|p| if labels[p] == 2 { s[p] } else { 0.0 }).collect();
            if free.is_empty() {
                if (fixed - a).abs() > 1e-12 {
                    continue;
                }
            } else {
                let gg: f64 = free.iter().map(|&p| g[p] * g[p]).sum();
                let gv: f64 = free.iter().map(|&p| g[p] * v[p]).sum();
                let tau = (gv - (a - fixed)) / gg;
                for &p in &free {
                    w[p] = v[p] - tau * g[p];
                }
            }
            if (0..n).any(|p| w[p] < -1e-12 || w[p] > s[p] + 1e-12) {
                continue;
            }
            let d: f64 = (0..n).map(|p| (w[p] - v[p]).powi(2)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, w));
            }
        }
        best.unwrap().1
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            v in prop::collection::vec(-2.0f64..2.0, 1..6),
            seed in prop::collection::vec((0.2f64..2.0, 0.0f64..1.5), 6),
            frac in 0.05f64..0.95,
        ) {
            let n = v.len();
            let g: Vec<f64> = seed[..n].iter().map(|x| x.0).collect();
            let s: Vec<f64> = seed[..n].iter().map(|x| x.1).collect();
            let cap: f64 = g.iter().zip(&s).map(|(g, s)| g * s).sum();
            prop_assume!(cap > 1e-3);
            let a = frac * cap;
            let w = project_plate(&v, &g, &s, a, 1e-15).unwrap();
            let mass: f64 = w.iter().zip(&g).map(|(w, g)| w * g).sum();
            prop_assert!((mass - a).abs() <= 1e-10 * a);
            for p in 0..n {
                prop_assert!(w[p] >= 0.0 && w[p] <= s[p]);
            }
            let oracle = brute_force(&v, &g, &s, a);
            for p in 0..n {
                prop_assert!((w[p] - oracle[p]).abs() < 1e-9, "{w:?} vs {oracle:?}");
            }
        }
    }
}
