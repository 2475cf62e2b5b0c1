use approx::assert_relative_eq;
use newhouse::cantor::thickness;
use newhouse::maps::{Monomial, Poly};
use newhouse::numerics::linear_fit;
use newhouse::unimodal::*;
use newhouse::Error;
use proptest::prelude::*;

fn q(a: f64) -> UnimodalMap {
    UnimodalMap::quadratic(a)
}

fn small_perturbation(delta: f64) -> Poly {
    let t = |i, k, c| Monomial { i, j: 0, k, coeff: c };
    Poly::new(vec![t(3, 0, delta), t(1, 1, -0.5 * delta), t(4, 0, 0.7 * delta)])
}

#[test]
fn inverse_branch_examples() {
    let p = q(-2.0);
    assert_eq!(p.inverse_branches(-1.0).unwrap(), (-1.0, 1.0));
    assert_eq!(p.inverse_branches(2.0).unwrap(), (-2.0, 2.0));
    let (m, pl) = p.inverse_branches(1.0).unwrap();
    assert_relative_eq!(pl, 1.7320508075688772, max_relative = 1e-15);
    assert_relative_eq!(m, -1.7320508075688772, max_relative = 1e-15);
    assert!(matches!(p.inverse_branches(-2.5), Err(Error::BelowCriticalValue { .. })));
}

#[test]
fn perturbed_inverse_has_small_residual() {
    let p = UnimodalMap::new(-1.9, small_perturbation(1e-3)).unwrap();
    assert!(p.dp(0.0).abs() < 1e-14);
    assert!(p.shift != 0.0);
    for y in [-1.0, 0.3, 1.5] {
        let (m, pl) = p.inverse_branches(y).unwrap();
        assert!(m <= 0.0 && pl >= 0.0);
        assert!((p.p(m) - y).abs() < 1e-12 && (p.p(pl) - y).abs() < 1e-12);
    }
}

#[test]
fn chebyshev_ladder() {
    let l = alpha_ladder(&q(-2.0), 12).unwrap();
    assert_eq!(l.alpha_minus[0], -1.0);
    assert_eq!(l.alpha_plus[0], 1.0);
    assert_eq!(l.beta, 2.0);
    assert_eq!(l.alpha_inf_minus, -2.0);
    let s3 = 3f64.sqrt();
    assert_relative_eq!(l.alpha_plus[1], s3, max_relative = 1e-15);
    assert_relative_eq!(l.alpha_plus[2], (2.0 + s3).sqrt(), max_relative = 1e-15);
    assert_relative_eq!(l.tilde_plus(2).unwrap(), (2.0 - s3).sqrt(), max_relative = 1e-14);
    assert_relative_eq!(l.tilde_minus(2).unwrap(), -(2.0 - s3).sqrt(), max_relative = 1e-14);
    assert_eq!(l.tilde_plus(1), Some(1.0));
    // a = -2 is not < α^-_∞ = -2.
    assert!(l.alpha_tilde_inf.is_none());
}

#[test]
fn ladder_relations_and_rate() {
    for p in [q(-2.0), q(-2.05), UnimodalMap::new(-2.01, small_perturbation(1e-3)).unwrap()] {
        let l = alpha_ladder(&p, 14).unwrap();
        for n in 1..=14 {
            assert!((p.p(l.alpha_minus[n]) - l.alpha_plus[n - 1]).abs() < 1e-12);
            assert!((p.p(l.alpha_plus[n]) - l.alpha_plus[n - 1]).abs() < 1e-12);
            assert!(l.alpha_plus[n] > l.alpha_plus[n - 1]);
        }
        let ns: Vec<f64> = (2..=12).map(|n| n as f64).collect();
        let ys: Vec<f64> = (2..=12).map(|n| (l.beta - l.alpha_plus[n]).ln()).collect();
        let (slope, _, _) = linear_fit(&ns, &ys);
        let want = -p.dp(l.beta).abs().ln();
        assert!((slope / want - 1.0).abs() < 0.02, "slope {slope} vs {want}");
    }
}

#[test]
fn tilde_guard_recorded() {
    // Critical value above α_1^- truncates the tilde ladder without failing.
    let l = alpha_ladder(&q(-1.2), 5).unwrap();
    assert!(l.guard_violated_at.is_some());
    assert!(l.tilde_plus(2).is_none());
    assert!(matches!(cantor_cover(&q(-1.2), CantorKind::C1, 0), Err(Error::GuardViolated(_))));
    assert!(matches!(cantor_cover(&q(-2.0), CantorKind::C2, 0), Err(Error::GuardViolated(_))));
}

#[test]
fn c1_base_intervals() {
    let c = cantor_cover(&q(-2.0), CantorKind::C1, 0).unwrap();
    let s3 = 3f64.sqrt();
    let t = (2.0 - s3).sqrt();
    let iv = c.intervals();
    assert_eq!(iv.len(), 2);
    assert_relative_eq!(iv[0].0, -s3, max_relative = 1e-14);
    assert_relative_eq!(iv[0].1, -t, max_relative = 1e-14);
    assert_relative_eq!(iv[1].0, t, max_relative = 1e-14);
    assert_relative_eq!(iv[1].1, s3, max_relative = 1e-14);
}

#[test]
fn c2_base_intervals_closed_form() {
    // For x^2 + a: β = (1+√(1-4a))/2, α^-_∞ = -β, α̃^±_∞ = ±√(-β - a).
    let a: f64 = -2.01;
    let beta = (1.0 + (1.0 - 4.0 * a).sqrt()) / 2.0;
    let t = (-beta - a).sqrt();
    let c = cantor_cover(&q(a), CantorKind::C2, 0).unwrap();
    let iv = c.intervals();
    assert_relative_eq!(iv[0].0, -beta, max_relative = 1e-14);
    assert_relative_eq!(iv[0].1, -t, max_relative = 1e-12);
    assert_relative_eq!(iv[1].0, t, max_relative = 1e-12);
    assert_relative_eq!(iv[1].1, beta, max_relative = 1e-14);
    assert_relative_eq!(iv[0].0, -iv[1].1, max_relative = 1e-15);
}

#[test]
fn c2_covers_are_full_two_branch() {
    let p = q(-2.05);
    for k in 0..=8 {
        let c = cantor_cover(&p, CantorKind::C2, k).unwrap();
        assert_eq!(c.len(), 1 << (k + 1));
        let base = base_intervals(&p, CantorKind::C2).unwrap();
        for &(l, r) in c.intervals() {
            let (mut u, mut v) = (l, r);
            for _ in 0..k {
                let (pu, pv) = (p.p(u), p.p(v));
                u = pu.min(pv);
                v = pu.max(pv);
            }
            assert!(base.iter().any(|&(bl, br)| (u - bl).abs() < 1e-9 && (v - br).abs() < 1e-9));
        }
    }
}

#[test]
fn c1_counts_fall_below_full_branching() {
    // The right C1 base interval does not map over itself, so the cover grows
    // more slowly than 2^{k+1}.
    let p = q(-2.0);
    let counts: Vec<usize> = (0..=6).map(|k| cantor_cover(&p, CantorKind::C1, k).unwrap().len()).collect();
    assert_eq!(&counts[..2], &[2, 4]);
    assert!(counts[6] < 1 << 7);
    assert!(counts.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn chebyshev_metric_factor_is_two() {
    let p = q(-2.0);
    for k in [0, 3, 6] {
        let c = cantor_cover(&p, CantorKind::C1, k).unwrap();
        let m = expansion_check(&p, &c, Metric::Chebyshev, EXPANSION_SAMPLES).unwrap();
        assert!((m - 2.0).abs() < 1e-9);
    }
    let c = cantor_cover(&p, CantorKind::C1, 0).unwrap();
    let e = expansion_check(&p, &c, Metric::Euclidean, EXPANSION_SAMPLES).unwrap();
    assert_relative_eq!(e, 2.0 * (2.0 - 3f64.sqrt()).sqrt(), max_relative = 1e-12);
}

#[test]
fn chebyshev_metric_singularity() {
    let p = q(-2.05);
    let c = cantor_cover(&p, CantorKind::C2, 0).unwrap();
    assert!(matches!(
        expansion_check(&p, &c, Metric::Chebyshev, 8),
        Err(Error::MetricSingularity { .. })
    ));
}

#[test]
fn perturbed_chebyshev_factor_near_two() {
    let p = UnimodalMap::new(-2.0, small_perturbation(1e-3)).unwrap();
    let c = cantor_cover(&p, CantorKind::C1, 3).unwrap();
    let m = expansion_check(&p, &c, Metric::Chebyshev, EXPANSION_SAMPLES).unwrap();
    assert!((1.9..=2.1).contains(&m), "{m}");
}

#[test]
fn iterate_expansion_growth() {
    for p in [q(-2.0), UnimodalMap::new(-2.0, small_perturbation(1e-3)).unwrap()] {
        let mut ks = vec![];
        let mut ls = vec![];
        for k in 1..=12 {
            let c = cantor_cover(&p, CantorKind::C1, k).unwrap();
            ks.push(k as f64);
            ls.push(iterate_expansion(&p, &c, k, 8).ln());
        }
        let (slope, _, _) = linear_fit(&ks, &ls);
        assert!(slope >= 1.5f64.ln(), "growth {}", slope.exp());
    }
}

#[test]
fn c2_thickness_blows_up_like_inverse_sqrt() {
    let base = q(-2.0);
    let a_inf = alpha_ladder(&base, 0).unwrap().alpha_inf_minus;
    let mut scaled = vec![];
    for t in [1e-2, 1e-3, 1e-4] {
        // α^-_∞ depends on a; solve a = α^-_∞(a) - t by fixed-point iteration.
        let mut a = a_inf - t;
        for _ in 0..100 {
            a = alpha_ladder(&q(a), 0).unwrap().alpha_inf_minus - t;
        }
        let tau = thickness(&cantor_cover(&q(a), CantorKind::C2, 8).unwrap()).tau;
        scaled.push(tau * t.sqrt());
    }
    let d = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(d > 0.0);
    // One constant serves all three: the scaled values agree within a factor 2.
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    assert!(hi / d < 2.0, "{scaled:?}");
}

#[test]
fn c2_thickness_stable_in_depth() {
    let p = q(-2.02);
    let t6 = thickness(&cantor_cover(&p, CantorKind::C2, 6).unwrap()).tau;
    let t10 = thickness(&cantor_cover(&p, CantorKind::C2, 10).unwrap()).tau;
    assert!((t6 - t10).abs() / t10 < 0.1, "{t6} {t10}");
}

proptest! {
    #[test]
    fn pullback_consistency(a in -2.3f64..-2.0, k in 0usize..7) {
        let p = q(a);
        let deep = cantor_cover(&p, CantorKind::C1, k + 1).unwrap();
        let shallow = cantor_cover(&p, CantorKind::C1, k).unwrap();
        for &(l, r) in deep.intervals() {
            let (u, v) = (p.p(l).min(p.p(r)), p.p(l).max(p.p(r)));
            prop_assert!(shallow.intervals().iter().any(|&(sl, sr)| u >= sl - 1e-12 && v <= sr + 1e-12));
        }
    }
}
