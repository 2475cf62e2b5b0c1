use newhouse::tangency::{find_tangency, TangencyOptions};
use newhouse::windows::*;
use newhouse::{find_periodic_orbit, DiagonalMap, HenonLikeFamily, PeriodicOrbit};
use proptest::prelude::*;

/// Period-3 window of x² + a at b = 0, from 50-digit root finding of
/// Q³(x) = x with (Q³)'(x) = −1 (lower end) and +1 (upper end).
const P3_LO: f64 = -1.768_529_152_467_69;
const P3_HI: f64 = -1.75;

/// Independent oracle: Newton on (x, a) for Q^p(x) = x, (Q^p)'(x) = s, with a
/// finite-difference Jacobian and continuation of s from 0.
fn oracle_boundary(p: usize, s: f64, x0: f64, a0: f64) -> f64 {
    let f = |x: f64, a: f64, s: f64| {
        let (mut y, mut d) = (x, 1.0);
        for _ in 0..p {
            d *= 2.0 * y;
            y = y * y + a;
        }
        [y - x, d - s]
    };
    let (mut x, mut a) = (x0, a0);
    for k in 1..=10 {
        let t = s * k as f64 / 10.0;
        for _ in 0..100 {
            let r = f(x, a, t);
            let h = 1e-7;
            let fx = [(f(x + h, a, t)[0] - f(x - h, a, t)[0]) / (2.0 * h), (f(x + h, a, t)[1] - f(x - h, a, t)[1]) / (2.0 * h)];
            let fa = [(f(x, a + h, t)[0] - f(x, a - h, t)[0]) / (2.0 * h), (f(x, a + h, t)[1] - f(x, a - h, t)[1]) / (2.0 * h)];
            let det = fx[0] * fa[1] - fa[0] * fx[1];
            let dx = (r[0] * fa[1] - fa[0] * r[1]) / det;
            let da = (fx[0] * r[1] - r[0] * fx[1]) / det;
            x -= dx;
            a -= da;
            if dx.abs().max(da.abs()) < 1e-16 {
                break;
            }
        }
    }
    a
}

fn beta_generator(b: f64) -> (HenonLikeFamily, Generator) {
    let fam = HenonLikeFamily::henon(b);
    let beta = fam.find_periodic_orbit(-2.0, 1, [2.0, 2.0 * b], 1e-13).unwrap();
    let rec = find_tangency(&fam, (-2.1, -1.9), &beta, &TangencyOptions::default()).unwrap();
    let gen = Generator::new(&fam, &rec).unwrap();
    (fam, gen)
}

#[test]
fn oracle_agrees_with_frozen_values() {
    assert!((oracle_boundary(3, -1.0, 0.0, -1.7549) - P3_LO).abs() < 1e-13);
    assert!((oracle_boundary(3, 1.0, 0.0, -1.7549) - P3_HI).abs() < 1e-13);
}

#[test]
fn period_three_window_matches_oracle() {
    let fam = HenonLikeFamily::henon(0.0);
    let w = locate_window(&fam, 3, -1.7549, None).unwrap();
    assert!((w.interval.0 - P3_LO).abs() < 1e-8, "{:?}", w.interval);
    assert!((w.interval.1 - P3_HI).abs() < 1e-8, "{:?}", w.interval);
    assert_eq!(w.lo_kind, BoundaryKind::PeriodDoubling);
    assert_eq!(w.hi_kind, BoundaryKind::SaddleNode);
    assert!(w.sigma.is_none() && w.dist.is_none());
}

#[test]
fn period_one_window_closed_form() {
    let fam = HenonLikeFamily::henon(0.0);
    let w = locate_window(&fam, 1, 0.0, None).unwrap();
    assert!((w.interval.0 + 0.75).abs() < 1e-10, "{:?}", w.interval);
    assert!((w.interval.1 - 0.25).abs() < 1e-10, "{:?}", w.interval);
}

#[test]
fn no_sink_at_chebyshev() {
    let fam = HenonLikeFamily::henon(0.0);
    assert!(matches!(locate_window(&fam, 3, -2.0, None), Err(newhouse::Error::NoSinkAtSeed { .. })));
}

fn cascade(b: f64, periods: std::ops::RangeInclusive<usize>) -> (HenonLikeFamily, Vec<StabilityWindow>) {
    let (fam, gen) = beta_generator(b);
    let ws = periods.map(|p| window_near_tangency(&fam, p, &gen).unwrap()).collect();
    (fam, ws)
}

#[test]
fn window_postconditions_at_b0() {
    let (fam, ws) = cascade(0.0, 3..=8);
    for w in &ws {
        assert!(w.interval.0 < w.interval.1);
        assert!(w.dist.unwrap() >= 0.0);
        for a in w.interior_samples(5) {
            let o = find_sink(&fam, a, w.period, DEFAULT_TRANSIENT)
                .unwrap_or_else(|| panic!("no sink of period {} at {a}", w.period));
            assert!(o.is_sink());
            assert_eq!(o.minimal_period(1e-8), w.period);
        }
        for mu in [w.lo_multiplier, w.hi_multiplier] {
            assert!((mu.abs() - 1.0).abs() <= 1e-6, "period {} multiplier {mu}", w.period);
        }
    }
}

#[test]
fn windows_are_disjoint() {
    let (_, ws) = cascade(0.0, 3..=10);
    for (i, u) in ws.iter().enumerate() {
        for v in &ws[i + 1..] {
            assert!(u.interval.1 < v.interval.0 || v.interval.1 < u.interval.0, "{:?} {:?}", u.interval, v.interval);
        }
    }
}

#[test]
fn replay_from_interior_seeds() {
    let (fam, gen) = beta_generator(0.0);
    for p in [4, 6] {
        let w = window_near_tangency(&fam, p, &gen).unwrap();
        for a in w.interior_samples(3) {
            let r = locate_window(&fam, p, a, Some(&gen)).unwrap();
            assert!((r.interval.0 - w.interval.0).abs() < 1e-10);
            assert!((r.interval.1 - w.interval.1).abs() < 1e-10);
        }
    }
}

#[test]
fn cascade_endpoints_match_oracle() {
    // Superstable parameters of the cascade seed the oracle.
    let (_, ws) = cascade(0.0, 4..=6);
    for w in &ws {
        let mid = 0.5 * (w.interval.0 + w.interval.1);
        let lo = oracle_boundary(w.period, -1.0, 0.0, mid);
        let hi = oracle_boundary(w.period, 1.0, 0.0, mid);
        assert!((w.interval.0 - lo).abs() < 1e-10, "p={} {} vs {lo}", w.period, w.interval.0);
        assert!((w.interval.1 - hi).abs() < 1e-10, "p={} {} vs {hi}", w.period, w.interval.1);
    }
}

#[test]
fn scaling_at_b0() {
    let (_, ws) = cascade(0.0, 4..=10);
    let fit = scaling_fit(&ws).unwrap();
    assert!((fit.slope_length + 2.0).abs() < 0.15, "{fit:?}");
    assert!((fit.slope_dist + 1.0).abs() < 0.15, "{fit:?}");
}

#[test]
fn scaling_at_small_b() {
    let (fam, gen) = beta_generator(1e-3);
    assert!((gen.a_star + 2.0).abs() < 0.01);
    let ws: Vec<_> = (4..=8).map(|p| window_near_tangency(&fam, p, &gen).unwrap()).collect();
    let fit = scaling_fit(&ws).unwrap();
    assert!((fit.slope_length + 2.0).abs() < 0.2, "{fit:?}");
}

fn synthetic(sigmas: &[f64], cl: f64, cd: f64) -> Vec<StabilityWindow> {
    sigmas
        .iter()
        .map(|&s| StabilityWindow {
            period: 0,
            sigma: Some(s),
            interval: (0.0, cl / (s * s)),
            dist: Some(cd / s),
            lo_kind: BoundaryKind::Unknown,
            hi_kind: BoundaryKind::Unknown,
            lo_multiplier: 1.0,
            hi_multiplier: 1.0,
        })
        .collect()
}

#[test]
fn synthetic_scaling_is_exact() {
    let ws = synthetic(&[4.0, 16.0, 64.0, 256.0, 1024.0], 1.0, 1.0);
    let fit = scaling_fit(&ws).unwrap();
    assert!((fit.slope_length + 2.0).abs() < 1e-10);
    assert!((fit.slope_dist + 1.0).abs() < 1e-10);
}

#[test]
fn insufficient_spread() {
    let few = synthetic(&[4.0, 16.0, 64.0], 1.0, 1.0);
    assert!(matches!(scaling_fit(&few), Err(newhouse::Error::InsufficientSpread(_))));
    let narrow = synthetic(&[2.0, 3.0, 4.0, 5.0, 6.0], 1.0, 1.0);
    assert!(matches!(scaling_fit(&narrow), Err(newhouse::Error::InsufficientSpread(_))));
}

proptest! {
    #[test]
    fn synthetic_laws_recovered(cl in 1e-3f64..1e3, cd in 1e-3f64..1e3, base in 3.0f64..8.0, k in 4usize..9) {
        let sig: Vec<f64> = (0..k).map(|i| base.powi(2 * i as i32 + 1)).collect();
        let fit = scaling_fit(&synthetic(&sig, cl, cd)).unwrap();
        prop_assert!((fit.slope_length + 2.0).abs() < 1e-9);
        prop_assert!((fit.slope_dist + 1.0).abs() < 1e-9);
        prop_assert!((fit.intercept_length - cl.ln()).abs() < 1e-8);
    }
}

#[test]
fn scan_finds_fixed_point_sinks() {
    let fam = HenonLikeFamily::henon(0.0);
    let obs = scan_sinks(&fam, (-0.7, 0.2), 19, 8, 2000, 1e-9);
    assert_eq!(obs.len(), 19);
    assert!(obs.iter().all(|o| o.period == 1));
}

#[test]
fn scan_finds_period_three() {
    let fam = HenonLikeFamily::henon(0.0);
    let obs = scan_sinks(&fam, (-1.76, -1.755), 6, 8, 2000, 1e-9);
    assert!(obs.iter().any(|o| o.period == 3), "{obs:?}");
    assert!(obs.iter().all(|o| o.period == 3));
}

#[test]
fn scan_finds_nothing_at_chebyshev() {
    let fam = HenonLikeFamily::henon(0.0);
    assert!(scan_sinks(&fam, (-2.0, -2.0), 2, 14, 2000, 1e-9).is_empty());
    assert!(scan_sinks(&fam, (-2.0, -1.9), 1, 14, 2000, 1e-9).is_empty());
}

fn diagonal_fixed(b: f64) -> (DiagonalMap, PeriodicOrbit) {
    let m = DiagonalMap { lx: 2.0, ly: b / 2.0 };
    let o = find_periodic_orbit(&m, 1, [0.0, 0.0], 1e-12).unwrap();
    (m, o)
}

#[test]
fn diagonal_balance_matches_closed_form() {
    for b in [1e-2, 1e-3] {
        let (m, o) = diagonal_fixed(b);
        let r = exponent_balance_check(&m, &o, 0, b, 60).unwrap();
        for (n, np) in r.n.iter().zip(&r.n_prime) {
            let expect = (*n as f64 * 2f64.ln() / (2.0 / b).ln()).floor() as i64;
            assert_eq!(*np, expect, "n = {n}");
        }
        let model = 1.0 + 2f64.ln() / (2.0 / b).ln();
        let e = r.exponent.unwrap();
        assert!((e - model).abs() < 0.01, "{e} vs {model}");
        assert!(e > 1.0);
        assert!(r.pass);
    }
}

#[test]
fn balance_exponent_tends_to_one_as_b_shrinks() {
    let e = |b: f64| {
        let fam = HenonLikeFamily::henon(b);
        let o = fam.find_periodic_orbit(-2.1, 1, [2.1, 2.1 * b], 1e-13).unwrap();
        let r = exponent_balance_check(&fam.at(-2.1), &o, 0, b, 30).unwrap();
        assert!(r.pass, "{r:?}");
        r.exponent.unwrap()
    };
    let (e2, e4) = (e(1e-2), e(1e-4));
    assert!((e4 - 1.0).abs() < (e2 - 1.0).abs(), "{e2} {e4}");
}

#[test]
fn single_constraint_passes() {
    let (m, o) = diagonal_fixed(1e-2);
    let r = exponent_balance_check(&m, &o, 0, 1e-2, 1).unwrap();
    assert!(r.exponent.is_none());
    assert!(r.pass);
}
