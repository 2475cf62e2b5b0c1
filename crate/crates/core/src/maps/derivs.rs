use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::family::{PlanarMap, Point};
use super::periodic::PeriodicOrbit;
use crate::error::{Error, Result};

/// Power-iteration steps used to estimate E^u and E^s.
pub const SPLITTING_STEPS: usize = 20;

/// Splitting is rejected when E^u and E^s are closer than atan(1/2).
pub fn cone_angle() -> f64 {
    0.5f64.atan()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeProducts {
    pub n: i64,
    pub lambda_n: f64,
    pub sigma_n: f64,
}

/// λ_n and σ_n at one base point for n in a signed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSeries {
    pub base: Point,
    /// Angle between the estimated E^u and E^s at the base point.
    pub angle: f64,
    pub entries: Vec<DerivativeProducts>,
}

impl DerivativeSeries {
    pub fn get(&self, n: i64) -> Option<&DerivativeProducts> {
        self.entries.iter().find(|e| e.n == n)
    }
    pub fn sigma(&self, n: i64) -> Option<f64> {
        self.get(n).map(|e| e.sigma_n)
    }
    pub fn lambda(&self, n: i64) -> Option<f64> {
        self.get(n).map(|e| e.lambda_n)
    }

    /// The n' with λ_{-n'-1} <= 1/σ_n <= λ_{-n'}; smallest such n'.
    pub fn n_prime(&self, n: i64) -> Option<i64> {
        let target = 1.0 / self.sigma(n)?;
        let mut m = 0;
        loop {
            let lm = if m == 0 { 1.0 } else { self.lambda(-m)? };
            let lm1 = self.lambda(-m - 1)?;
            if lm1 <= target && target <= lm {
                return Some(m);
            }
            m += 1;
        }
    }

    /// max(σ_n^{-1}, λ_{-n'}): size proxy for the rectangle of a length-n word.
    pub fn diameter_proxy(&self, n: i64) -> Option<f64> {
        let np = self.n_prime(n)?;
        let l = if np == 0 { 1.0 } else { self.lambda(-np)? };
        Some((1.0 / self.sigma(n)?).max(l))
    }
}

fn unit(v: Vector2<f64>) -> Vector2<f64> {
    let n = v.norm();
    if n == 0.0 {
        v
    } else {
        v / n
    }
}

fn angle_between(u: Vector2<f64>, s: Vector2<f64>) -> f64 {
    let c = u.dot(&s).abs().min(1.0);
    c.acos()
}

/// Cycle with index arithmetic modulo the period.
struct Cycle<'o, M: PlanarMap + ?Sized> {
    map: &'o M,
    pts: &'o [Point],
}

impl<M: PlanarMap + ?Sized> Cycle<'_, M> {
    fn at(&self, k: i64) -> Point {
        let p = self.pts.len() as i64;
        self.pts[k.rem_euclid(p) as usize]
    }
    fn jac(&self, k: i64) -> Matrix2<f64> {
        self.map.jacobian(self.at(k))
    }

    /// E^u at index k: push a generic vector forward from k - N.
    fn e_u(&self, k: i64) -> Vector2<f64> {
        let mut best = Vector2::new(1.0, 0.0);
        let mut best_gain = -1.0;
        for start in [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0), Vector2::new(0.6, -0.8)] {
            let mut v = start;
            let mut gain = 0.0;
            for j in (k - SPLITTING_STEPS as i64)..k {
                let w = self.jac(j) * v;
                gain += w.norm().ln();
                v = unit(w);
            }
            if gain > best_gain || best_gain < 0.0 && gain.is_finite() {
                best_gain = gain;
                best = v;
            }
        }
        best
    }

    /// E^s at index k: the least expanded direction of D f^N at k, obtained by
    /// power iteration of the transposed cocycle (no inverse needed).
    fn e_s(&self, k: i64) -> Vector2<f64> {
        let mut best = Vector2::new(0.0, 1.0);
        let mut best_gain = f64::NEG_INFINITY;
        for start in [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0), Vector2::new(0.6, -0.8)] {
            let mut w = start;
            let mut gain = 0.0;
            for j in (k..k + SPLITTING_STEPS as i64).rev() {
                let t = self.jac(j).transpose() * w;
                gain += t.norm().ln();
                w = unit(t);
            }
            if gain > best_gain {
                best_gain = gain;
                best = w;
            }
        }
        Vector2::new(-best[1], best[0])
    }
}

/// Derivative products at `orbit.points[index]`. Negative n use the backward
/// orbit, which on a cycle is exact. λ is computed from the exact determinant
/// and the angle ratio so that it stays accurate far below machine epsilon
/// relative to σ.
pub fn derivative_products<M: PlanarMap + ?Sized>(
    map: &M,
    orbit: &PeriodicOrbit,
    index: usize,
    n_range: std::ops::RangeInclusive<i64>,
) -> Result<DerivativeSeries> {
    let cyc = Cycle {
        map,
        pts: &orbit.points,
    };
    let k0 = index as i64;
    let angle_at = |k: i64| -> (Vector2<f64>, Vector2<f64>, f64) {
        let u = cyc.e_u(k);
        let s = cyc.e_s(k);
        (u, s, angle_between(u, s))
    };
    let (_, _, base_angle) = angle_at(k0);
    if !(base_angle >= cone_angle()) {
        return Err(Error::ConeFieldViolation { angle: base_angle });
    }
    let mut entries = Vec::new();
    for n in n_range {
        let (start, steps) = if n >= 0 { (k0, n) } else { (k0 + n, -n) };
        let (u, _, a0) = angle_at(start);
        if !(a0 >= cone_angle()) {
            return Err(Error::ConeFieldViolation { angle: a0 });
        }
        let (_, _, a1) = angle_at(start + steps);
        let mut v = u;
        let mut sigma = 1.0;
        let mut det = 1.0;
        for j in start..start + steps {
            let jm = cyc.jac(j);
            det *= jm.determinant().abs();
            let w = jm * v;
            sigma *= w.norm();
            v = unit(w);
        }
        let lambda = det * a0.sin() / (sigma * a1.sin());
        entries.push(DerivativeProducts {
            n,
            lambda_n: lambda,
            sigma_n: sigma,
        });
    }
    Ok(DerivativeSeries {
        base: orbit.points[index],
        angle: base_angle,
        entries,
    })
}
