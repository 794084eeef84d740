//! Node generators for common plate shapes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Point;

/// Quasi-uniform points on a sphere in `R³` (Fibonacci lattice).
pub fn fibonacci_sphere(center: [f64; 3], radius: f64, count: usize) -> Vec<Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Point::new(vec![
                center[0] + radius * r * phi.cos(),
                center[1] + radius * r * phi.sin(),
                center[2] + radius * z,
            ])
            .expect("finite sphere point")
        })
        .collect()
}

/// Tensor grid with `counts[d]` equispaced values on `[lo[d], hi[d]]`.
pub fn grid(lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Vec<Point>> {
    if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: lo.len(),
            got: counts.len().min(hi.len()),
        });
    }
    if counts.contains(&0) {
        return Err(Error::EmptyDiscretization("grid with a zero count".into()));
    }
    let axis = |d: usize, k: usize| {
        if counts[d] == 1 {
            0.5 * (lo[d] + hi[d])
        } else {
            lo[d] + (hi[d] - lo[d]) * k as f64 / (counts[d] - 1) as f64
        }
    };
    let total: usize = counts.iter().product();
    (0..total)
        .map(|mut idx| {
            let coords = (0..counts.len())
                .map(|d| {
                    let k = idx % counts[d];
                    idx /= counts[d];
                    axis(d, k)
                })
                .collect();
            Point::new(coords)
        })
        .collect()
}

/// `count` equispaced points on a circle in the plane of the first two
/// coordinates, centred at `center`.
pub fn ring(center: &[f64], radius: f64, count: usize, phase: f64) -> Result<Vec<Point>> {
    if center.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: center.len(),
        });
    }
    if count == 0 {
        return Err(Error::EmptyDiscretization("ring with no nodes".into()));
    }
    (0..count)
        .map(|k| {
            let t = phase + std::f64::consts::TAU * k as f64 / count as f64;
            let mut c = center.to_vec();
            c[0] += radius * t.cos();
            c[1] += radius * t.sin();
            Point::new(c)
        })
        .collect()
}

/// Radius profiles of thin rotational bodies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `ρ(r) = r^(−s)`, `s ≥ 0`.
    PowerS,
    /// `ρ(r) = exp(−r^s)`, `0 < s ≤ 1`.
    ExpSLe1,
    /// `ρ(r) = exp(−r^s)`, `s > 1`.
    ExpSGt1,
}

impl Profile {
    pub fn validate(self, s: f64) -> Result<()> {
        let ok = match self {
            Profile::PowerS => s >= 0.0,
            Profile::ExpSLe1 => s > 0.0 && s <= 1.0,
            Profile::ExpSGt1 => s > 1.0,
        };
        if ok && s.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "exponent s = {s} is out of range for {self:?}"
            )))
        }
    }

    pub fn radius(self, s: f64, r: f64) -> f64 {
        match self {
            Profile::PowerS => r.powf(-s),
            Profile::ExpSLe1 | Profile::ExpSGt1 => (-r.powf(s)).exp(),
        }
    }
}

/// Surface discretization of `{q ≤ x₁ ≤ R, x₂² + x₃² ≤ ρ(x₁)²}`.
///
/// Rings sit on the lateral surface at axial steps proportional to the local
/// radius, clamped to `[min_step, max_step]`; each ring carries between 8
/// and 32 nodes. The flat face at `x₁ = q` is covered by concentric rings.
/// Cross-sections thinner than `min_radius` are below the resolution of the
/// node cells and are not discretized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationalBody {
    pub profile: Profile,
    pub s: f64,
    pub q: f64,
    #[serde(default = "RotationalBody::default_step_factor")]
    pub step_factor: f64,
    #[serde(default = "RotationalBody::default_min_step")]
    pub min_step: f64,
    #[serde(default = "RotationalBody::default_max_step")]
    pub max_step: f64,
    #[serde(default = "RotationalBody::default_min_radius")]
    pub min_radius: f64,
}

impl RotationalBody {
    fn default_step_factor() -> f64 {
        0.5
    }
    fn default_min_step() -> f64 {
        0.05
    }
    fn default_max_step() -> f64 {
        0.5
    }
    fn default_min_radius() -> f64 {
        0.02
    }

    pub fn new(profile: Profile, s: f64, q: f64) -> Self {
        Self {
            profile,
            s,
            q,
            step_factor: Self::default_step_factor(),
            min_step: Self::default_min_step(),
            max_step: Self::default_max_step(),
            min_radius: Self::default_min_radius(),
        }
    }

    pub fn radius(&self, x1: f64) -> f64 {
        self.profile.radius(self.s, x1)
    }

    /// Axial step taken after station `x1`.
    pub fn step(&self, x1: f64) -> f64 {
        (self.step_factor * self.radius(x1)).clamp(self.min_step, self.max_step)
    }

    /// Axial positions of the rings up to `length`.
    pub fn stations(&self, length: f64) -> Vec<f64> {
        let mut xs = vec![self.q];
        let mut x = self.q;
        loop {
            x += self.step(x);
            if x > length + 1e-12 {
                break;
            }
            xs.push(x);
        }
        xs
    }

    /// First station where the body is thinner than `min_radius`, if any
    /// before `length`.
    pub fn unresolved_from(&self, length: f64) -> Option<f64> {
        self.stations(length)
            .into_iter()
            .find(|&x| self.radius(x) < self.min_radius)
    }

    /// Nodes of the body truncated at `x₁ ≤ length`. Truncations are nested:
    /// a longer body's node list extends a shorter one's.
    pub fn nodes(&self, length: f64) -> Result<Vec<Point>> {
        self.profile.validate(self.s)?;
        if !(length >= self.q) {
            return Err(Error::EmptyDiscretization(format!(
                "truncation {length} lies before the body start {}",
                self.q
            )));
        }
        let mut out = Vec::new();
        for (k, x) in self.stations(length).into_iter().enumerate() {
            let rho = self.radius(x);
            if rho < self.min_radius {
                continue;
            }
            let h = self.step(x);
            let m = ((std::f64::consts::TAU * rho / h).round() as usize).clamp(8, 32);
            // Stagger consecutive rings by half a node.
            let phase = if k % 2 == 0 {
                0.0
            } else {
                std::f64::consts::PI / m as f64
            };
            for j in 0..m {
                let t = phase + std::f64::consts::TAU * j as f64 / m as f64;
                out.push(Point::new(vec![x, rho * t.cos(), rho * t.sin()])?);
            }
            if k == 0 {
                // flat end face: concentric rings plus the centre
                let layers = (rho / h).floor() as usize;
                for l in (1..layers).rev() {
                    let r = rho * l as f64 / layers as f64;
                    let m = ((std::f64::consts::TAU * r / h).round() as usize).clamp(8, 32);
                    for j in 0..m {
                        let t = std::f64::consts::TAU * j as f64 / m as f64;
                        out.push(Point::new(vec![x, r * t.cos(), r * t.sin()])?);
                    }
                }
                out.push(Point::new(vec![x, 0.0, 0.0])?);
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyDiscretization(format!(
                "body is thinner than {} everywhere on [{}, {length}]",
                self.min_radius, self.q
            )));
        }
        Ok(out)
    }
}
