//! The twelve acceptance criteria, each a self-contained run with its own
//! tolerance and time budget. Shared by the `acceptance` subcommand and the
//! acceptance test target.

use std::fmt;
use std::ops::RangeInclusive;
use std::time::Instant;

use newhouse::cantor::{
    affine_cover, covering_trend, covering_upper_bound, falconer_bound, gap_lemma, middle_thirds, thickness, CantorSchedule,
    GapVerdict, IntervalCover,
};
use newhouse::maps::{cone_angle, derivative_products};
use newhouse::paramcantor::{build_tree, synthetic_window_oracle, tree_dimension, validate_tree, ScaleSchedule, TreeOptions};
use newhouse::renorm::{fit_normal_form, return_map, RenormOptions};
use newhouse::tangency::{find_tangency, grow_arc, slice_thickness, ArcKind, ArcOptions, TangencyOptions};
use newhouse::unimodal::{cantor_cover, expansion_check, CantorKind, Metric, UnimodalMap, EXPANSION_SAMPLES};
use newhouse::windows::{exponent_balance_check, locate_window, scaling_fit, window_near_tangency, Generator};
use newhouse::{Error, HenonLikeFamily, PeriodicOrbit, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CRITERIA: RangeInclusive<u8> = 1..=12;

/// Period-3 window of x² + a, from 50-digit root finding of Q³(x) = x with
/// (Q³)'(x) = −1 (period doubling) and +1 (saddle-node at a = −7/4).
const P3_WINDOW: (f64, f64) = (-1.768_529_152_467_69, -1.75);

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub pass: bool,
    pub seconds: f64,
    pub budget: f64,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "AC{:<2} {verdict} [{:.2}s / {}s] {}", self.id, self.seconds, self.budget, self.detail)
    }
}

fn budget(id: u8) -> f64 {
    match id {
        1..=5 => 1.0,
        6 | 10 => 120.0,
        7 | 12 => 600.0,
        8 | 11 => 60.0,
        9 => 300.0,
        _ => 0.0,
    }
}

/// Runs one criterion. Errors from the library count as failures; so does
/// exceeding the time budget.
pub fn run_criterion(id: u8) -> Outcome {
    let start = Instant::now();
    let result: Result<(bool, String)> = match id {
        1 => ac1(),
        2 => Ok(ac2()),
        3 => Ok(ac3()),
        4 => ac4(),
        5 => ac5(),
        6 => ac6(),
        7 => ac7(),
        8 => Ok(ac8()),
        9 => ac9(),
        10 => ac10(),
        11 => Ok(ac11()),
        12 => ac12(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let budget = budget(id);
    let (mut pass, mut detail) = result.unwrap_or_else(|e| (false, format!("{}: {e}", e.name())));
    if seconds > budget {
        pass = false;
        detail.push_str("; over time budget");
    }
    Outcome { id, pass, seconds, budget, detail }
}

fn beta_generator(b: f64) -> Result<(HenonLikeFamily, Generator)> {
    let fam = HenonLikeFamily::henon(b);
    let beta = fam.find_periodic_orbit(-2.0, 1, [2.0, 2.0 * b], 1e-13)?;
    let rec = find_tangency(&fam, (-2.1, -1.9), &beta, &TangencyOptions::default())?;
    let gen = Generator::new(&fam, &rec)?;
    Ok((fam, gen))
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Chebyshev-metric expansion of Q_{−2} on covers avoiding ±2.
fn ac1() -> Result<(bool, String)> {
    let p = UnimodalMap::quadratic(-2.0);
    let mut covers = vec![];
    for k in [0, 3, 6] {
        covers.push(cantor_cover(&p, CantorKind::C1, k)?);
    }
    covers.push(affine_cover(0.4, -1.9, 1.9, 3)?);
    covers.push(IntervalCover::new(vec![(-1.9, -0.1), (0.1, 1.9)], 0)?);
    let mut worst: f64 = 0.0;
    for c in &covers {
        worst = worst.max((expansion_check(&p, c, Metric::Chebyshev, EXPANSION_SAMPLES)? - 2.0).abs());
    }
    Ok((worst < 1e-9, format!("max |factor − 2| = {worst:.2e} over {} covers", covers.len())))
}

/// Thickness of exact middle-thirds and ratio-0.4 covers, and affine invariance.
fn ac2() -> (bool, String) {
    let thirds = (2..=10)
        .map(|d| (thickness(&middle_thirds(0.0, 3f64.powi(d), d as usize)).tau - 1.0).abs())
        .fold(0.0, f64::max);
    let affine = (1..=6)
        .map(|d| (thickness(&affine_cover(0.4, 0.0, 1.0, d).unwrap()).tau - 2.0).abs())
        .fold(0.0, f64::max);
    let base = middle_thirds(0.0, 3f64.powi(5), 5);
    let mut invariance: f64 = 0.0;
    for slope in [-4.0, -0.7, 0.5, 1.3, 3.0] {
        for offset in [-10.0, 0.0, 2.5] {
            let t = thickness(&base.affine_image(slope, offset).unwrap()).tau;
            invariance = invariance.max((t - 1.0).abs());
        }
    }
    let pass = thirds <= 1e-12 && affine <= 1e-12 && invariance <= 1e-12;
    (pass, format!("middle-thirds err {thirds:.1e}, ratio-0.4 err {affine:.1e}, affine-image err {invariance:.1e}"))
}

/// Gap lemma verdicts on the three constructed pairs.
fn ac3() -> (bool, String) {
    let a = affine_cover(0.45, 0.0, 1.0, 8).unwrap();
    let b = affine_cover(0.45, 0.5, 1.5, 8).unwrap();
    let tiny = affine_cover(0.45, 0.46, 0.54, 8).unwrap();
    let shifted = middle_thirds(0.2, 0.6, 8);
    let m = middle_thirds(0.0, 1.0, 8);
    let got = [gap_lemma(&a, &b).verdict, gap_lemma(&tiny, &shifted).verdict, gap_lemma(&m, &m).verdict];
    let want = [GapVerdict::Intersect, GapVerdict::K1InGapOfK2, GapVerdict::HypothesisFails];
    (got == want, format!("{got:?}"))
}

/// Falconer bound on the thirds schedule and on the formula schedule.
fn ac4() -> Result<(bool, String)> {
    let eps: Vec<f64> = (1..=20).map(|l| 3f64.powi(-l)).collect();
    let thirds = falconer_bound(&CantorSchedule::new(&[2.0; 20], &eps)?)?.value;
    let e0 = (thirds - 2f64.ln() / 3f64.ln()).abs();
    let mut pass = e0 < 1e-6;
    let mut detail = format!("thirds {thirds:.9} (err {e0:.1e})");
    for alpha in [0.30, 0.45] {
        let v = falconer_bound(&CantorSchedule::doubly_exponential(alpha, 2.0, 2.0, 1.0, 1.0, 8)?)?.value;
        pass &= (v - alpha).abs() < 0.02;
        detail.push_str(&format!(", α={alpha}: {v:.4}"));
    }
    Ok((pass, detail))
}

/// Covering upper bound at (ε, i) = (0.04, 100) and its trend at iε = 4.
fn ac5() -> Result<(bool, String)> {
    let s = covering_upper_bound(0.04, &[(100, 1.0)])?.value;
    let trend = covering_trend(4.0, &[0.1, 0.01, 0.001])?;
    let decreasing = trend.windows(2).all(|w| w[1].1 < w[0].1) && trend.iter().all(|t| t.1 > 0.5);
    let pass = (s - 0.5036).abs() < 1e-3 && decreasing;
    let ss: Vec<String> = trend.iter().map(|t| format!("{:.5}", t.1)).collect();
    Ok((pass, format!("s = {s:.5}; trend {}", ss.join(" > "))))
}

/// Window scaling at b = 0 and the period-3 window against the oracle.
fn ac6() -> Result<(bool, String)> {
    let (fam, gen) = beta_generator(0.0)?;
    let ws = (4..=10).map(|p| window_near_tangency(&fam, p, &gen)).collect::<Result<Vec<_>>>()?;
    let fit = scaling_fit(&ws)?;
    let w3 = locate_window(&fam, 3, -1.7549, None)?;
    let e3 = (w3.interval.0 - P3_WINDOW.0).abs().max((w3.interval.1 - P3_WINDOW.1).abs());
    let pass = (fit.slope_length + 2.0).abs() < 0.15 && (fit.slope_dist + 1.0).abs() < 0.15 && e3 < 1e-8;
    Ok((
        pass,
        format!("slope_length {:.4}, slope_dist {:.4}, period-3 endpoint err {e3:.1e}", fit.slope_length, fit.slope_dist),
    ))
}

/// Tangency and window scaling at b = 1e−3.
fn ac7() -> Result<(bool, String)> {
    let (fam, gen) = beta_generator(1e-3)?;
    let ws = (4..=8).map(|p| window_near_tangency(&fam, p, &gen)).collect::<Result<Vec<_>>>()?;
    let fit = scaling_fit(&ws)?;
    let pass = (gen.a_star + 2.0).abs() < 0.01 && (fit.slope_length + 2.0).abs() < 0.2;
    Ok((pass, format!("a* = {:.6}, slope_length {:.4}", gen.a_star, fit.slope_length)))
}

/// Newton residuals and multiplier products over random pure Hénon orbits.
fn ac8() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut found, mut tries) = (0, 0);
    let (mut worst_res, mut worst_rel): (f64, f64) = (0.0, 0.0);
    while found < 100 && tries < 100_000 {
        tries += 1;
        let a = rng.gen_range(-2.2..-1.2);
        let b = rng.gen_range(-0.3..0.3);
        let p = rng.gen_range(1..=10);
        let seed = [rng.gen_range(-1.5..1.5), rng.gen_range(-0.3..0.3)];
        let Ok(o) = HenonLikeFamily::henon(b).find_periodic_orbit(a, p, seed, 1e-12) else { continue };
        let want = (-b).powi(p as i32);
        worst_res = worst_res.max(o.residual);
        worst_rel = worst_rel.max(((o.mult_stable * o.mult_unstable - want) / want).abs());
        found += 1;
    }
    let pass = found == 100 && worst_res < 1e-10 && worst_rel < 1e-8;
    (pass, format!("{found} orbits in {tries} tries, max residual {worst_res:.1e}, max product rel err {worst_rel:.1e}"))
}

/// Renormalization at b = 1e−2, n = 3..7.
fn ac9() -> Result<(bool, String)> {
    let b: f64 = 1e-2;
    let (fam, gen) = beta_generator(b)?;
    let opts = RenormOptions::default();
    let (mut ns, mut logs, mut deltas) = (vec![], vec![], vec![]);
    let mut round_trip: f64 = 0.0;
    for n in 3..=7 {
        let sm = return_map(&fam, &gen, n, &opts)?;
        let rf = fit_normal_form(&sm)?;
        for r in sm.rows() {
            let back = rf.chart.invert(rf.chart.apply([r[0], r[1]], r[2]), r[2]);
            round_trip = round_trip.max((back[0] - r[0]).abs()).max((back[1] - r[1]).abs());
        }
        ns.push(n as f64);
        logs.push(rf.det_estimate.ln());
        deltas.push(rf.delta);
    }
    let s = slope(&ns, &logs);
    let decreasing = deltas.windows(2).all(|w| w[1] < w[0]);
    let pass = (s / b.ln() - 1.0).abs() < 0.05 && decreasing && round_trip < 1e-10;
    let ds: Vec<String> = deltas.iter().map(|d| format!("{d:.4e}")).collect();
    Ok((
        pass,
        format!("det slope {s:.4} vs log b {:.4}; delta {}; round trip {round_trip:.1e}", b.ln(), ds.join(" > ")),
    ))
}

/// Periodic orbits of the horseshoe at `a` with all itineraries of the
/// given periods, seeded from the inverse branches of x² + a.
fn horseshoe_orbits(fam: &HenonLikeFamily, a: f64, periods: RangeInclusive<usize>) -> Result<Vec<PeriodicOrbit>> {
    let q = UnimodalMap::quadratic(a);
    let mut orbits: Vec<PeriodicOrbit> = vec![];
    for p in periods {
        for word in 0..(1u32 << p) {
            let sign = |k: usize| if word >> k & 1 == 1 { 1.0 } else { -1.0 };
            // Backward composition of contracting branches converges to the point with this itinerary.
            let mut x = 0.0;
            for _ in 0..60 {
                for k in (0..p).rev() {
                    x = q.inverse(x, sign(k))?;
                }
            }
            let Ok(o) = fam.find_periodic_orbit(a, p, [x, 0.0], 1e-13) else { continue };
            if o.minimal_period(1e-8) != p {
                continue;
            }
            let seen = orbits.iter().any(|u| u.period == p && u.points.iter().any(|z| (z[0] - o.points[0][0]).abs() + (z[1] - o.points[0][1]).abs() < 1e-8));
            if !seen {
                orbits.push(o);
            }
        }
    }
    Ok(orbits)
}

/// Derivative-product inequalities on a horseshoe sample at a = −2.1.
fn ac10() -> Result<(bool, String)> {
    let a = -2.1;
    let n_max = 20;
    let mut pass = true;
    let mut detail = vec![];
    for b in [1e-2, 1e-3] {
        let fam = HenonLikeFamily::henon(b);
        let map = fam.at(a);
        let orbits = horseshoe_orbits(&fam, a, 1..=5)?;
        let (mut points, mut excluded, mut upper_ok, mut lam) = (0, 0, true, f64::INFINITY);
        let (mut c_low, mut c_prod): (f64, f64) = (f64::INFINITY, 0.0);
        let mut per_point = vec![];
        for o in &orbits {
            for i in 0..o.period {
                // Base points must pass the cone test; the innermost points of
                // the horseshoe sit at the threshold angle and are left out.
                let s = match derivative_products(&map, o, i, 0..=n_max as i64) {
                    Ok(s) => s,
                    Err(Error::ConeFieldViolation { .. }) => {
                        excluded += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let ns: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
                let ls: Vec<f64> = (1..=n_max).map(|n| s.sigma(n as i64).unwrap().ln()).collect();
                lam = lam.min(slope(&ns, &ls).exp());
                for n in 1..=n_max {
                    let sigma = s.sigma(n as i64).unwrap();
                    upper_ok &= sigma <= 5f64.powi(n as i32) * (1.0 + 1e-12);
                    c_prod = c_prod.max(sigma * s.lambda(n as i64).unwrap() / b.powi(n as i32));
                }
                per_point.push(s);
                points += 1;
            }
        }
        for s in &per_point {
            for n in 1..=n_max {
                c_low = c_low.min(s.sigma(n as i64).unwrap() / lam.powi(n as i32));
            }
        }
        // σ_nλ_n = |det Df^n| sin θ_0 / sin θ_n, and cone angles bound the ratio.
        let prod_ok = c_prod <= 1.0 / cone_angle().sin();
        let beta = fam.find_periodic_orbit(a, 1, [2.1, 2.1 * b], 1e-13)?;
        let bal = exponent_balance_check(&map, &beta, 0, b, 30)?;
        let e = bal.exponent.unwrap_or(f64::NAN);
        let ok = points >= 20 && upper_ok && lam > 1.3 && c_low > 0.0 && prod_ok && bal.pass && e < 1.0;
        pass &= ok;
        detail.push(format!(
            "b={b}: {points} points ({excluded} outside the cone test), σ_n≤5ⁿ {upper_ok}, Λ={lam:.3} C={c_low:.3}, σλ/bⁿ≤{c_prod:.3}, balance pass {} with exponent {e:.4}",
            bal.pass
        ));
    }
    Ok((pass, detail.join("; ")))
}

/// Parameter Cantor trees from the synthetic oracle on the desk schedule.
fn ac11() -> (bool, String) {
    let mut pass = true;
    let mut detail = vec![];
    for alpha in [0.30, 0.45] {
        let mut hit = false;
        let mut runs = vec![];
        for k in 0..=5 {
            let d = 10f64.powi(-k);
            let src = synthetic_window_oracle(2.0, 4.0, alpha, d, 11).unwrap();
            let r = build_tree(&src, &ScaleSchedule::default(), 4, (0.0, 1.0), &TreeOptions::default());
            runs.push(match r {
                Ok(tree) if tree.depth() >= 4 => {
                    let valid = validate_tree(&tree).valid;
                    match tree_dimension(&tree) {
                        Ok(est) => {
                            hit |= valid && (est.value - alpha).abs() < 0.05;
                            format!("D={d:.0e}: valid {valid}, dim {:.3}", est.value)
                        }
                        Err(e) => format!("D={d:.0e}: {}", e.name()),
                    }
                }
                Ok(tree) => format!("D={d:.0e}: depth {} (floor at {:?})", tree.depth(), tree.floor_level),
                Err(e) => format!("D={d:.0e}: {}", e.name()),
            });
        }
        pass &= hit;
        detail.push(format!("α={alpha}: {}", runs.join(", ")));
    }
    (pass, detail.join("; "))
}

/// Unstable thickness of the slice at depth 6 against b.
fn ac12() -> Result<(bool, String)> {
    let a = -2.0;
    let depth = 6;
    let (mut lb, mut lt, mut taus) = (vec![], vec![], vec![]);
    for b in [1e-2, 3e-3, 1e-3] {
        let fam = HenonLikeFamily::henon(b);
        // Transversal: the local stable manifold of the fixed point α.
        let x = (1.0 - b - ((1.0 - b) * (1.0 - b) - 4.0 * a).sqrt()) / 2.0;
        let alpha = fam.find_periodic_orbit(a, 1, [x, b * x], 1e-12)?;
        let opts = ArcOptions { length: 0.1, max_step: 1e-3, ..TangencyOptions::default().stable };
        let arc = grow_arc(&fam.at(a), &alpha, 0, ArcKind::Stable, &opts)?;
        let s = slice_thickness(&fam, a, CantorKind::C1, &arc, depth)?;
        lb.push(b.ln());
        lt.push(s.report.tau.ln());
        taus.push(format!("{:.3e}", s.report.tau));
    }
    let k = slope(&lb, &lt);
    Ok(((k - 2.0).abs() < 0.3, format!("depth {depth}, τ = {}, slope {k:.3}", taus.join(", "))))
}
