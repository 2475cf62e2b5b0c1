use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use super::family::{dist, HenonLikeFamily, PlanarMap, Point};
use crate::error::{Error, Result};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 64;
/// Continuation stops when a multiplier modulus enters [1 - margin, 1 + margin].
pub const HYPERBOLICITY_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<Point>,
    /// Multiplier of smaller modulus (λ).
    pub mult_stable: f64,
    /// Multiplier of larger modulus (σ).
    pub mult_unstable: f64,
    /// True when the multipliers are a complex pair; both fields then hold the modulus.
    pub complex: bool,
    pub trace: f64,
    pub det: f64,
    pub residual: f64,
}

/// Eigenvalues of a 2x2 real matrix from its trace and determinant, ordered
/// by modulus. The larger root is taken from the cancellation-free branch and
/// the smaller as det / larger so their product is exactly det.
pub fn multipliers(trace: f64, det: f64) -> (f64, f64, bool) {
    let disc = trace * trace - 4.0 * det;
    if disc < 0.0 {
        let m = det.abs().sqrt();
        return (m, m, true);
    }
    let s = if trace >= 0.0 { 1.0 } else { -1.0 };
    let sigma = 0.5 * (trace + s * disc.sqrt());
    if sigma == 0.0 {
        return (0.0, 0.0, false);
    }
    (det / sigma, sigma, false)
}

/// Ordered product D f^n along `points` (first point applied first).
pub fn jacobian_product<M: PlanarMap + ?Sized>(map: &M, points: &[Point]) -> Matrix2<f64> {
    points
        .iter()
        .fold(Matrix2::identity(), |acc, &p| map.jacobian(p) * acc)
}

impl PeriodicOrbit {
    fn from_points<M: PlanarMap + ?Sized>(map: &M, points: Vec<Point>) -> Self {
        let period = points.len();
        let mut prod = Matrix2::identity();
        let mut det = 1.0;
        let mut residual: f64 = 0.0;
        for (i, &p) in points.iter().enumerate() {
            let j = map.jacobian(p);
            det *= j.determinant();
            prod = j * prod;
            residual = residual.max(dist(map.eval(p), points[(i + 1) % period]));
        }
        let trace = prod.trace();
        let (l, s, complex) = multipliers(trace, det);
        PeriodicOrbit {
            period,
            points,
            mult_stable: l,
            mult_unstable: s,
            complex,
            trace,
            det,
            residual,
        }
    }

    pub fn is_sink(&self) -> bool {
        self.mult_unstable.abs() < 1.0
    }

    pub fn is_saddle(&self) -> bool {
        !self.complex && self.mult_stable.abs() < 1.0 && self.mult_unstable.abs() > 1.0
    }

    /// Smallest d dividing the period with points[d] == points[0] up to `tol`.
    pub fn minimal_period(&self, tol: f64) -> usize {
        (1..self.period)
            .filter(|d| self.period % d == 0)
            .find(|&d| (0..self.period).all(|i| dist(self.points[i], self.points[(i + d) % self.period]) < tol))
            .unwrap_or(self.period)
    }

    /// Distance of the multipliers from the unit circle.
    pub fn hyperbolicity(&self) -> f64 {
        (self.mult_unstable.abs() - 1.0)
            .abs()
            .min((self.mult_stable.abs() - 1.0).abs())
    }

    /// Point of the orbit with the smallest |x|.
    pub fn closest_to_critical(&self) -> usize {
        (0..self.period)
            .min_by(|&i, &j| self.points[i][0].abs().total_cmp(&self.points[j][0].abs()))
            .unwrap_or(0)
    }
}

fn shooting_residual<M: PlanarMap + ?Sized>(map: &M, z: &[Point]) -> (Vec<f64>, f64) {
    let p = z.len();
    let mut r = vec![0.0; 2 * p];
    let mut worst: f64 = 0.0;
    for i in 0..p {
        let fz = map.eval(z[i]);
        let next = z[(i + 1) % p];
        r[2 * i] = fz[0] - next[0];
        r[2 * i + 1] = fz[1] - next[1];
        worst = worst.max((r[2 * i]).hypot(r[2 * i + 1]));
    }
    (r, worst)
}

/// Multiple-shooting Newton for a periodic orbit, seeded by the forward orbit
/// of `seed`.
pub fn find_periodic_orbit<M: PlanarMap + ?Sized>(
    map: &M,
    period: usize,
    seed: Point,
    tol: f64,
) -> Result<PeriodicOrbit> {
    assert!(period >= 1, "period must be positive");
    let mut z = Vec::with_capacity(period);
    z.push(seed);
    for i in 1..period {
        z.push(map.eval(z[i - 1]));
    }
    refine_periodic_orbit(map, z, tol)
}

/// Newton polish of an approximate cycle given point by point.
pub fn refine_periodic_orbit<M: PlanarMap + ?Sized>(
    map: &M,
    mut z: Vec<Point>,
    tol: f64,
) -> Result<PeriodicOrbit> {
    let p = z.len();
    let (mut r, mut res) = shooting_residual(map, &z);
    let mut it = 0;
    while it < NEWTON_MAX_ITER {
        if res < tol {
            return Ok(PeriodicOrbit::from_points(map, z));
        }
        if !res.is_finite() || z.iter().any(|q| q[0].abs() > 1e6 || q[1].abs() > 1e6) {
            break;
        }
        let n = 2 * p;
        let mut jm = DMatrix::<f64>::zeros(n, n);
        for i in 0..p {
            let j = map.jacobian(z[i]);
            let k = (i + 1) % p;
            for (r0, c0) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                jm[(2 * i + r0, 2 * i + c0)] += j[(r0, c0)];
            }
            jm[(2 * i, 2 * k)] -= 1.0;
            jm[(2 * i + 1, 2 * k + 1)] -= 1.0;
        }
        let rhs = DVector::from_vec(r.clone());
        let step = jm.lu().solve(&rhs).ok_or(Error::DegenerateJacobian)?;
        if step.iter().any(|s| !s.is_finite()) {
            return Err(Error::DegenerateJacobian);
        }
        // Damped update: accept the first step length that does not blow up the residual.
        let mut t = 1.0;
        loop {
            let trial: Vec<Point> = (0..p)
                .map(|i| [z[i][0] - t * step[2 * i], z[i][1] - t * step[2 * i + 1]])
                .collect();
            let (rt, rest) = shooting_residual(map, &trial);
            if rest.is_finite() && (rest < res * 4.0 || t < 1e-3) {
                z = trial;
                r = rt;
                res = rest;
                break;
            }
            t *= 0.5;
        }
        it += 1;
    }
    if res < tol {
        return Ok(PeriodicOrbit::from_points(map, z));
    }
    Err(Error::NoConvergence {
        iterations: it,
        residual: res,
    })
}

impl HenonLikeFamily {
    pub fn find_periodic_orbit(&self, a: f64, period: usize, seed: Point, tol: f64) -> Result<PeriodicOrbit> {
        find_periodic_orbit(&self.at(a), period, seed, tol)
    }
}

fn check_hyperbolic(orbit: &PeriodicOrbit, a: f64) -> Result<()> {
    for m in [orbit.mult_stable.abs(), orbit.mult_unstable.abs()] {
        if (m - 1.0).abs() <= HYPERBOLICITY_MARGIN {
            return Err(Error::LostHyperbolicity { a, modulus: m });
        }
    }
    Ok(())
}

/// Follow a hyperbolic orbit along a path of maps `t -> map(t)`, t in [0, 1].
pub fn continue_along<F, M>(orbit: &PeriodicOrbit, steps: usize, map_at: F, label: impl Fn(f64) -> f64) -> Result<PeriodicOrbit>
where
    F: Fn(f64) -> M,
    M: PlanarMap,
{
    check_hyperbolic(orbit, label(0.0))?;
    if steps == 0 {
        return Ok(orbit.clone());
    }
    let mut prev: Option<Vec<Point>> = None;
    let mut cur = orbit.clone();
    for s in 1..=steps {
        let t = s as f64 / steps as f64;
        let map = map_at(t);
        // Secant predictor from the last two solutions.
        let guess: Vec<Point> = match &prev {
            Some(pp) => cur
                .points
                .iter()
                .zip(pp)
                .map(|(c, q)| [2.0 * c[0] - q[0], 2.0 * c[1] - q[1]])
                .collect(),
            None => cur.points.clone(),
        };
        let next = match refine_periodic_orbit(&map, guess, NEWTON_TOL) {
            Ok(o) => o,
            Err(e) => {
                // A failed corrector next to the unit circle is a bifurcation.
                if cur.hyperbolicity() < 0.25 {
                    return Err(Error::LostHyperbolicity {
                        a: label(t),
                        modulus: cur.mult_unstable.abs().min(cur.mult_stable.abs()),
                    });
                }
                return Err(e);
            }
        };
        check_hyperbolic(&next, label(t))?;
        prev = Some(std::mem::replace(&mut cur, next).points);
    }
    Ok(cur)
}

impl HenonLikeFamily {
    /// Continuation in the parameter a.
    pub fn continue_orbit(&self, orbit: &PeriodicOrbit, a_from: f64, a_to: f64, steps: usize) -> Result<PeriodicOrbit> {
        if a_from == a_to {
            return Ok(orbit.clone());
        }
        let lerp = |t: f64| a_from + t * (a_to - a_from);
        continue_along(orbit, steps, |t| self.at(lerp(t)), lerp)
    }

    /// Continuation in the dissipation b at fixed a.
    pub fn continue_orbit_in_b(&self, orbit: &PeriodicOrbit, a: f64, b_to: f64, steps: usize) -> Result<PeriodicOrbit> {
        let b_from = self.b;
        let fams: Vec<HenonLikeFamily> = (0..=steps)
            .map(|s| {
                let mut f = self.clone();
                f.b = b_from + (b_to - b_from) * s as f64 / steps.max(1) as f64;
                f
            })
            .collect();
        let idx = |t: f64| ((t * steps as f64).round() as usize).min(steps);
        continue_along(orbit, steps, |t| fams[idx(t)].at(a), |_| a)
    }
}
