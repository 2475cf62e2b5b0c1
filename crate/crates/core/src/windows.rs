//! Sink stability windows near a tangency and their scaling.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{
    derivative_products, dist, find_periodic_orbit, iterate, jacobian_product, multipliers, refine_periodic_orbit,
    HenonLikeFamily, PeriodicOrbit, PlanarMap, Point, NEWTON_TOL,
};
use crate::numerics::linear_fit;
use crate::tangency::{critical_point, find_tangency, TangencyOptions, TangencyRecord};

/// Parameter resolution of the outward march.
pub const BISECT_TOL: f64 = 1e-12;
/// Consecutive sink orbits farther apart than this are treated as a jump to
/// a different orbit.
pub const MAX_DISPLACEMENT: f64 = 0.1;
/// Transient used when looking for a sink from the seed grid.
pub const DEFAULT_TRANSIENT: usize = 4000;
/// Offset between a window's period and the saddle period it is generated by.
pub const GENERATOR_OFFSET: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkObservation {
    pub a: f64,
    pub period: usize,
}

/// Grid scan for attracting cycles: iterate the critical seed past the
/// transient, look for the first return closer than `tol`, and confirm it by
/// Newton and the multiplier test.
pub fn scan_sinks(
    family: &HenonLikeFamily,
    a_range: (f64, f64),
    grid_count: usize,
    max_period: usize,
    transient: usize,
    tol: f64,
) -> Vec<SinkObservation> {
    if grid_count < 2 {
        return vec![];
    }
    let (lo, hi) = a_range;
    (0..grid_count)
        .into_par_iter()
        .filter_map(|i| {
            let a = lo + (hi - lo) * i as f64 / (grid_count - 1) as f64;
            sink_from_seed(family, a, max_period, transient, tol).map(|o| SinkObservation { a, period: o.period })
        })
        .collect()
}

fn sink_from_seed(family: &HenonLikeFamily, a: f64, max_period: usize, transient: usize, tol: f64) -> Option<PeriodicOrbit> {
    let map = family.at(a);
    let orb = iterate(&map, [0.0, 0.0], transient + max_period, 1e3);
    if orb.escaped {
        return None;
    }
    let z0 = orb.points[transient - 1];
    let q = (1..=max_period).find(|&q| dist(orb.points[transient - 1 + q], z0) < tol)?;
    let o = find_periodic_orbit(&map, q, z0, NEWTON_TOL).ok()?;
    let p = o.minimal_period(1e-8);
    if !o.is_sink() {
        return None;
    }
    if p < q {
        return find_periodic_orbit(&map, p, z0, NEWTON_TOL).ok().filter(|o| o.is_sink());
    }
    Some(o)
}

/// Attracting cycle of exact minimal period `period` at `a`, found by Newton
/// from a 3×3 seed grid in the trapping box after a transient.
pub fn find_sink(family: &HenonLikeFamily, a: f64, period: usize, transient: usize) -> Option<PeriodicOrbit> {
    let map = family.at(a);
    let yb = family.b.abs();
    for x in [0.0, -1.0, 1.0] {
        for y in [0.0, -yb, yb] {
            let orb = iterate(&map, [x, y], transient, 1e3);
            if orb.escaped {
                continue;
            }
            let z = orb.points.last().copied().unwrap_or([x, y]);
            if let Ok(o) = find_periodic_orbit(&map, period, z, NEWTON_TOL) {
                if o.is_sink() && o.minimal_period(1e-8) == period {
                    return Some(o);
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    SaddleNode,
    PeriodDoubling,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityWindow {
    pub period: usize,
    /// Unstable multiplier of the generating saddle at its tangency, raised
    /// to the number of saddle turns.
    pub sigma: Option<f64>,
    pub interval: (f64, f64),
    /// Distance from the interval to the generating tangency parameter.
    pub dist: Option<f64>,
    pub lo_kind: BoundaryKind,
    pub hi_kind: BoundaryKind,
    /// Leading multiplier of the cycle at each endpoint.
    pub lo_multiplier: f64,
    pub hi_multiplier: f64,
}

impl StabilityWindow {
    pub fn length(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    pub fn contains(&self, a: f64) -> bool {
        self.interval.0 <= a && a <= self.interval.1
    }

    /// `count` evenly spaced points strictly inside the window.
    pub fn interior_samples(&self, count: usize) -> Vec<f64> {
        let (lo, hi) = self.interval;
        (1..=count).map(|k| lo + (hi - lo) * k as f64 / (count + 1) as f64).collect()
    }
}

/// The saddle whose tangency generates a cascade of windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub saddle: PeriodicOrbit,
    pub a_star: f64,
    /// |σ| of the saddle's period map at a_star.
    pub sigma_base: f64,
    /// Direction of a from the tangency towards the non-crossing side.
    pub side: f64,
    /// Tangency parameter of the saddle continued to b = 0.
    pub a_star_flat: f64,
    pub side_flat: f64,
    pub n_extra: usize,
}

impl Generator {
    /// Builds the generator from a tangency of `family`; the b = 0 tangency
    /// of the same saddle is located too, since window centres are seeded
    /// there.
    pub fn new(family: &HenonLikeFamily, record: &TangencyRecord) -> Result<Self> {
        let (a_star_flat, side_flat) = if family.b == 0.0 {
            (record.a_star, record.speed_hat.signum())
        } else {
            let flat = with_b(family, 0.0);
            let steps = ((family.b.abs() / 1e-3).ceil() as usize).max(8);
            let s0 = family.continue_orbit_in_b(&record.saddle, record.a_star, 0.0, steps)?;
            let half = 0.05 + 10.0 * family.b.abs();
            let r0 = find_tangency(&flat, (record.a_star - half, record.a_star + half), &s0, &TangencyOptions::default())?;
            (r0.a_star, r0.speed_hat.signum())
        };
        Ok(Generator {
            sigma_base: record.saddle.mult_unstable.abs(),
            saddle: record.saddle.clone(),
            a_star: record.a_star,
            side: record.speed_hat.signum(),
            a_star_flat,
            side_flat,
            n_extra: GENERATOR_OFFSET,
        })
    }

    /// σ attributed to a window of the given period: the saddle multiplier
    /// raised to (period − n_extra) / saddle period.
    pub fn sigma_for(&self, period: usize) -> Option<f64> {
        if period <= self.n_extra {
            return None;
        }
        let turns = (period - self.n_extra) as f64 / self.saddle.period as f64;
        Some(self.sigma_base.powf(turns))
    }

    pub fn dist_to(&self, interval: (f64, f64)) -> f64 {
        let (lo, hi) = interval;
        if lo <= self.a_star && self.a_star <= hi {
            0.0
        } else {
            (lo - self.a_star).abs().min((hi - self.a_star).abs())
        }
    }
}

fn with_b(family: &HenonLikeFamily, b: f64) -> HenonLikeFamily {
    let mut f = family.clone();
    f.b = b;
    f
}

/// Accepts a Newton correction of `guess` at `a` as the same sink.
fn sink_near(family: &HenonLikeFamily, a: f64, guess: &[Point], period: usize) -> Option<PeriodicOrbit> {
    let o = refine_periodic_orbit(&family.at(a), guess.to_vec(), NEWTON_TOL).ok()?;
    let moved = o.points.iter().zip(guess).map(|(p, q)| dist(*p, *q)).fold(0.0, f64::max);
    (o.is_sink() && o.minimal_period(1e-8) == period && moved <= MAX_DISPLACEMENT).then_some(o)
}

/// Residual of the bifurcation condition det(M − s·I) = 0 written as
/// tr M − s(1 + det M); s = 0 asks for tr M = 0 (the centre of a window).
fn eig_condition(family: &HenonLikeFamily, a: f64, z: &[Point], s: f64) -> f64 {
    let m = jacobian_product(&family.at(a), z);
    m.trace() - s * (1.0 + m.determinant())
}

/// Newton on (cycle, a) with the extra equation `eig_condition = 0`.
fn augmented_newton(family: &HenonLikeFamily, z0: &[Point], a0: f64, s: f64) -> Option<(Vec<Point>, f64)> {
    let p = z0.len();
    let n = 2 * p + 1;
    let mut z = z0.to_vec();
    let mut a = a0;
    let mut last_step = f64::INFINITY;
    for _ in 0..60 {
        let mut r = DVector::<f64>::zeros(n);
        let mut jm = DMatrix::<f64>::zeros(n, n);
        for i in 0..p {
            let k = (i + 1) % p;
            let fz = family.eval(a, z[i]);
            r[2 * i] = fz[0] - z[k][0];
            r[2 * i + 1] = fz[1] - z[k][1];
            let j = family.jacobian(a, z[i]);
            for (r0, c0) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                jm[(2 * i + r0, 2 * i + c0)] += j[(r0, c0)];
            }
            jm[(2 * i, 2 * k)] -= 1.0;
            jm[(2 * i + 1, 2 * k + 1)] -= 1.0;
            let da = family.d_da(a, z[i]);
            jm[(2 * i, n - 1)] = da[0];
            jm[(2 * i + 1, n - 1)] = da[1];
        }
        let g = eig_condition(family, a, &z, s);
        r[n - 1] = g;
        // Central differences for the eigenvalue row.
        for v in 0..n {
            let h = 1e-7 * if v == n - 1 { a.abs().max(1.0) } else { z[v / 2][v % 2].abs().max(1.0) };
            let shifted = |d: f64| {
                let mut zz = z.clone();
                let mut aa = a;
                if v == n - 1 {
                    aa += d;
                } else {
                    zz[v / 2][v % 2] += d;
                }
                eig_condition(family, aa, &zz, s)
            };
            jm[(n - 1, v)] = (shifted(h) - shifted(-h)) / (2.0 * h);
        }
        let step = jm.lu().solve(&r)?;
        if step.iter().any(|x| !x.is_finite()) {
            return None;
        }
        for i in 0..p {
            z[i][0] -= step[2 * i];
            z[i][1] -= step[2 * i + 1];
        }
        a -= step[n - 1];
        let size = step.amax();
        if size < 1e-14 || (size < 1e-11 && size >= last_step) {
            break;
        }
        last_step = size;
    }
    let (_, res) = shooting(family, a, &z);
    let m = jacobian_product(&family.at(a), &z);
    let scale = 1.0 + m.trace().abs() + m.determinant().abs();
    (res < 1e-10 && eig_condition(family, a, &z, s).abs() < 1e-7 * scale).then_some((z, a))
}

fn shooting(family: &HenonLikeFamily, a: f64, z: &[Point]) -> (Vec<f64>, f64) {
    let p = z.len();
    let mut worst: f64 = 0.0;
    let mut r = Vec::with_capacity(2 * p);
    for i in 0..p {
        let fz = family.eval(a, z[i]);
        let d = [fz[0] - z[(i + 1) % p][0], fz[1] - z[(i + 1) % p][1]];
        worst = worst.max(d[0].hypot(d[1]));
        r.extend(d);
    }
    (r, worst)
}

fn leading_multiplier(o: &PeriodicOrbit) -> f64 {
    o.mult_unstable
}

/// March from a sink towards `dir` with doubling steps until the sink is
/// lost, refine the step down to BISECT_TOL, then polish on the bifurcation condition.
fn boundary(family: &HenonLikeFamily, start: &PeriodicOrbit, a0: f64, dir: f64, period: usize) -> (f64, BoundaryKind, f64) {
    let mut good = start.clone();
    let mut a_b = a0;
    let mut h = 4.0 * f64::EPSILON * a0.abs().max(1.0);
    // Doubling after success, halving after failure: a failed step is either
    // past the boundary or too long for the corrector, and halving settles both.
    loop {
        let a = a_b + dir * h;
        match sink_near(family, a, &good.points, period) {
            Some(o) if h < 1.0 => {
                good = o;
                a_b = a;
                h *= 2.0;
            }
            _ => {
                if h <= BISECT_TOL {
                    break;
                }
                h *= 0.5;
            }
        }
    }
    let last = good;
    let at_b = sink_near(family, a_b, &last.points, period).unwrap_or(last);
    if at_b.complex {
        return (a_b, BoundaryKind::Unknown, leading_multiplier(&at_b));
    }
    let mu = leading_multiplier(&at_b);
    let (s, kind) = if mu > 0.0 {
        (1.0, BoundaryKind::SaddleNode)
    } else {
        (-1.0, BoundaryKind::PeriodDoubling)
    };
    if let Some((z, a)) = augmented_newton(family, &at_b.points, a_b, s) {
        if (a - a_b).abs() <= 1e3 * BISECT_TOL {
            let m = jacobian_product(&family.at(a), &z);
            let det: f64 = z.iter().map(|p| family.jacobian(a, *p).determinant()).product();
            let (_, lead, complex) = multipliers(m.trace(), det);
            if !complex && (lead.abs() - 1.0).abs() < 1e-6 {
                return (a, kind, lead);
            }
        }
    }
    (a_b, BoundaryKind::Unknown, mu)
}

/// Window of the sink `orbit` (a cycle at `a_seed`).
pub fn window_from_orbit(family: &HenonLikeFamily, orbit: &PeriodicOrbit, a_seed: f64, gen: Option<&Generator>) -> StabilityWindow {
    let period = orbit.period;
    let (lo, lo_kind, lo_mu) = boundary(family, orbit, a_seed, -1.0, period);
    let (hi, hi_kind, hi_mu) = boundary(family, orbit, a_seed, 1.0, period);
    StabilityWindow {
        period,
        sigma: gen.and_then(|g| g.sigma_for(period)),
        interval: (lo, hi),
        dist: gen.map(|g| g.dist_to((lo, hi))),
        lo_kind,
        hi_kind,
        lo_multiplier: lo_mu,
        hi_multiplier: hi_mu,
    }
}

/// Window of the period-`period` sink present at `a_seed`.
pub fn locate_window(family: &HenonLikeFamily, period: usize, a_seed: f64, gen: Option<&Generator>) -> Result<StabilityWindow> {
    let o = find_sink(family, a_seed, period, DEFAULT_TRANSIENT).ok_or(Error::NoSinkAtSeed { period, a: a_seed })?;
    Ok(window_from_orbit(family, &o, a_seed, gen))
}

/// Centre of the period-`period` window next to the generating tangency:
/// at b = 0 the superstable parameter closest to the tangency on its
/// non-crossing side, continued in b on the condition tr D f^p = 0.
pub fn window_center(family: &HenonLikeFamily, period: usize, gen: &Generator) -> Result<(f64, PeriodicOrbit)> {
    let flat = with_b(family, 0.0);
    let no_sink = || Error::NoSinkAtSeed { period, a: gen.a_star };
    let ret = |a: f64| {
        let (c, _) = critical_point(&flat, a);
        let mut z = [c, 0.0];
        for _ in 0..period {
            z = flat.eval(a, z);
        }
        z[0] - c
    };
    let mut d = 0.01 / gen.sigma_for(period).unwrap_or(1.0);
    let dir = if gen.side_flat == 0.0 { 1.0 } else { gen.side_flat };
    let mut prev = ret(gen.a_star_flat + dir * d);
    let (mut lo, mut hi) = (f64::NAN, f64::NAN);
    while d < 1.0 {
        let d2 = d * 1.05;
        let v = ret(gen.a_star_flat + dir * d2);
        if v.signum() != prev.signum() && v.is_finite() && prev.is_finite() {
            lo = gen.a_star_flat + dir * d;
            hi = gen.a_star_flat + dir * d2;
            break;
        }
        d = d2;
        prev = v;
    }
    if lo.is_nan() {
        return Err(no_sink());
    }
    let mut a = crate::numerics::brent(ret, lo, hi, 1e-15, 200)?;
    let (c, _) = critical_point(&flat, a);
    let mut z = vec![[c, 0.0]];
    for i in 1..period {
        z.push(flat.eval(a, z[i - 1]));
    }
    // Continue the centre in b with a secant predictor and step halving.
    let target = family.b;
    let mut b = 0.0;
    let mut prev: Option<(Vec<Point>, f64, f64)> = None;
    let mut db = target / 8.0;
    while b != target {
        let nb = if (target - b).abs() <= db.abs() * 1.0000001 { target } else { b + db };
        let (gz, ga) = match &prev {
            Some((pz, pa, pb)) => {
                let t = (nb - b) / (b - pb);
                let gz: Vec<Point> = z
                    .iter()
                    .zip(pz)
                    .map(|(c, q)| [c[0] + t * (c[0] - q[0]), c[1] + t * (c[1] - q[1])])
                    .collect();
                (gz, a + t * (a - pa))
            }
            None => (z.clone(), a),
        };
        match augmented_newton(&with_b(family, nb), &gz, ga, 0.0) {
            Some((nz, na)) if (na - a).abs() < 0.1 => {
                prev = Some((std::mem::replace(&mut z, nz), a, b));
                a = na;
                b = nb;
            }
            _ => {
                db *= 0.5;
                if db.abs() < target.abs() * 1e-6 {
                    return Err(no_sink());
                }
            }
        }
    }
    let o = refine_periodic_orbit(&family.at(a), z, NEWTON_TOL)?;
    if !o.is_sink() || o.minimal_period(1e-8) != period {
        return Err(no_sink());
    }
    Ok((a, o))
}

/// Window of the given period in the cascade of `gen`.
pub fn window_near_tangency(family: &HenonLikeFamily, period: usize, gen: &Generator) -> Result<StabilityWindow> {
    let (a, o) = window_center(family, period, gen)?;
    Ok(window_from_orbit(family, &o, a, Some(gen)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope_length: f64,
    pub slope_dist: f64,
    pub intercept_length: f64,
    pub intercept_dist: f64,
    pub r2_length: f64,
    pub r2_dist: f64,
    pub n: usize,
    /// Decades of σ covered by the data.
    pub decades: f64,
}

/// Log–log slopes of window length and distance against σ.
pub fn scaling_fit(windows: &[StabilityWindow]) -> Result<ScalingFit> {
    let rows: Vec<(f64, f64, f64)> = windows
        .iter()
        .filter_map(|w| Some((w.sigma?, w.length(), w.dist?)))
        .collect();
    if rows.len() < 4 {
        return Err(Error::InsufficientSpread(format!("{} windows with sigma and dist, need 4", rows.len())));
    }
    if rows.iter().any(|r| !(r.0 > 0.0 && r.1 > 0.0 && r.2 > 0.0)) {
        return Err(Error::InsufficientSpread("non-positive sigma, length or dist".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let decades = (hi - lo) / std::f64::consts::LN_10;
    if decades < 2.0 {
        return Err(Error::InsufficientSpread(format!("sigma spans {decades:.2} decades, need 2")));
    }
    let ls: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let ds: Vec<f64> = rows.iter().map(|r| r.2.ln()).collect();
    let (slope_length, intercept_length, r2_length) = linear_fit(&xs, &ls);
    let (slope_dist, intercept_dist, r2_dist) = linear_fit(&xs, &ds);
    Ok(ScalingFit {
        slope_length,
        slope_dist,
        intercept_length,
        intercept_dist,
        r2_length,
        r2_dist,
        n: rows.len(),
        decades,
    })
}

/// Upper bound on the fitted c in e ≤ 1 + c/|log b|. Backward expansion is
/// at most 5 per step, which bounds σ_{−n'} by σ_n^{log 5 / |log b|}.
pub fn balance_c_max() -> f64 {
    5f64.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentBalance {
    pub n: Vec<i64>,
    pub n_prime: Vec<i64>,
    /// ln σ_n and ln(σ_n σ_{−n'}) per n.
    pub log_sigma: Vec<f64>,
    pub log_product: Vec<f64>,
    /// Least-squares exponent; None with a single constraint.
    pub exponent: Option<f64>,
    /// Smallest C with σ_n σ_{−n'} ≤ C σ_n^e for every n.
    pub constant: f64,
    /// (e − 1)·|log b|: the c needed in e ≤ 1 − c/log b.
    pub c_fit: Option<f64>,
    pub pass: bool,
}

pub fn exponent_balance_check<M: PlanarMap + ?Sized>(
    map: &M,
    orbit: &PeriodicOrbit,
    index: usize,
    b: f64,
    n_max: usize,
) -> Result<ExponentBalance> {
    let n_max = n_max.max(1) as i64;
    let series = derivative_products(map, orbit, index, -(2 * n_max + 4)..=n_max)?;
    let (mut ns, mut nps, mut xs, mut ys) = (vec![], vec![], vec![], vec![]);
    for n in 1..=n_max {
        let Some(np) = series.n_prime(n) else { continue };
        let s = series.sigma(n).unwrap();
        let back = if np == 0 { 1.0 } else { series.sigma(-np).unwrap() };
        ns.push(n);
        nps.push(np);
        xs.push(s.ln());
        ys.push((s * back).ln());
    }
    if xs.is_empty() {
        return Err(Error::InsufficientRange { needed: 1, got: 0 });
    }
    let exponent = if xs.len() >= 2 { Some(linear_fit(&xs, &ys).0) } else { None };
    let e = exponent.unwrap_or(1.0);
    let log_c = xs.iter().zip(&ys).map(|(x, y)| y - e * x).fold(f64::NEG_INFINITY, f64::max);
    let lb = b.abs().ln().abs();
    let c_fit = exponent.map(|e| (e - 1.0) * lb);
    let pass = c_fit.is_none_or(|c| c <= balance_c_max());
    Ok(ExponentBalance {
        n: ns,
        n_prime: nps,
        log_sigma: xs,
        log_product: ys,
        exponent,
        constant: log_c.exp(),
        c_fit,
        pass,
    })
}
