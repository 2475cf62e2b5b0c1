use approx::assert_relative_eq;
use newhouse::cantor::*;
use newhouse::Error;
use proptest::prelude::*;

#[test]
fn single_interval_has_no_bridges() {
    let c = IntervalCover::new(vec![(0.0, 1.0)], 0).unwrap();
    assert!(gaps_and_bridges(&c).is_empty());
    let t = thickness(&c);
    assert!(t.tau.is_infinite() && t.witness_gap.is_none());
}

#[test]
fn invalid_covers_rejected() {
    assert!(IntervalCover::new(vec![], 0).is_err());
    assert!(IntervalCover::new(vec![(0.0, 1.0), (1.0, 2.0)], 0).is_err());
    assert!(IntervalCover::new(vec![(1.0, 0.0)], 0).is_err());
    assert!(IntervalCover::new(vec![(0.5, 0.5)], 0).is_ok());
}

#[test]
fn middle_thirds_bridges() {
    let c = middle_thirds(0.0, 1.0, 1);
    let b = gaps_and_bridges(&c);
    assert_eq!(b.len(), 2);
    assert_eq!(b[0].gap, (1.0 / 3.0, 2.0 / 3.0));
    assert_eq!(b[0].bridge, (0.0, 1.0 / 3.0));
    assert_eq!(b[1].bridge, (2.0 / 3.0, 1.0));
    let c2 = middle_thirds(0.0, 1.0, 2);
    for br in gaps_and_bridges(&c2) {
        let g = br.gap.1 - br.gap.0;
        if g < 0.2 {
            assert_relative_eq!(br.bridge.1 - br.bridge.0, 1.0 / 9.0, max_relative = 1e-12);
        }
    }
}

/// Independent O(n^2) bridge computation straight from the definition.
fn naive_thickness(c: &IntervalCover) -> f64 {
    let iv = c.intervals();
    let gaps: Vec<(f64, f64)> = c.gaps().collect();
    let (h0, h1) = c.hull();
    let mut tau = f64::INFINITY;
    for (i, &(gl, gr)) in gaps.iter().enumerate() {
        let g = gr - gl;
        let longer: Vec<usize> = (0..gaps.len()).filter(|&j| gaps[j].1 - gaps[j].0 > g * (1.0 + 1e-12)).collect();
        let left = longer.iter().filter(|&&j| j < i).max().map_or(h0, |&j| iv[j + 1].0);
        let right = longer.iter().filter(|&&j| j > i).min().map_or(h1, |&j| iv[j].1);
        tau = tau.min((gl - left) / g).min((right - gr) / g);
    }
    tau
}

#[test]
fn middle_thirds_thickness_is_one() {
    // Integer coordinates on [0, 3^d] make every endpoint exact.
    for d in 1..=10 {
        let t = thickness(&middle_thirds(0.0, 3f64.powi(d as i32), d));
        assert!((t.tau - 1.0).abs() <= 1e-12, "depth {d}: {}", t.tau);
    }
    // On [0, 1] the rounding of endpoints limits agreement to about
    // eps / (smallest gap) ~ 1e-11 at depth 10.
    for d in 1..=10 {
        let t = thickness(&middle_thirds(0.0, 1.0, d));
        assert!((t.tau - 1.0).abs() <= 1e-10, "depth {d}: {}", t.tau);
    }
}

#[test]
fn affine_ratio_thickness() {
    for d in 1..=5 {
        let c = affine_cover(0.4, 0.0, 1.0, d).unwrap();
        let t = thickness(&c);
        assert!((t.tau - 2.0).abs() <= 1e-12, "depth {d}: {}", t.tau);
        let (g, b) = (t.witness_gap.unwrap(), t.witness_bridge.unwrap());
        assert!(((b.1 - b.0) / (g.1 - g.0) - t.tau).abs() <= 1e-12);
    }
    let t = thickness(&affine_cover(0.45, 0.0, 1.0, 6).unwrap());
    assert!((t.tau - 4.5).abs() < 1e-9);
}

#[test]
fn thickness_report_minimum_is_consistent() {
    let c = affine_cover(0.3, -1.0, 2.0, 4).unwrap();
    let t = thickness(&c);
    let m = t.per_endpoint.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    assert_eq!(m, t.tau);
    assert!(naive_thickness(&c) == t.tau);
}

/// Relative rounding error of thickness implied by the endpoint magnitudes.
fn conditioning(c: &IntervalCover) -> f64 {
    let min_gap = c.gaps().map(|(l, r)| r - l).fold(f64::INFINITY, f64::min);
    let (h0, h1) = c.hull();
    8.0 * f64::EPSILON * h0.abs().max(h1.abs()).max(1.0) / min_gap
}

fn gap_lemma_pairs() -> Vec<(IntervalCover, IntervalCover, GapVerdict)> {
    let a = affine_cover(0.45, 0.0, 1.0, 8).unwrap();
    let b = affine_cover(0.45, 0.5, 1.5, 8).unwrap();
    let tiny = affine_cover(0.45, 0.46, 0.54, 8).unwrap();
    let shifted_thirds = middle_thirds(0.2, 0.6, 8);
    let m1 = middle_thirds(0.0, 1.0, 8);
    let m2 = middle_thirds(0.0, 1.0, 8);
    vec![
        (a, b, GapVerdict::Intersect),
        (tiny, shifted_thirds, GapVerdict::K1InGapOfK2),
        (m1, m2, GapVerdict::HypothesisFails),
    ]
}

#[test]
fn gap_lemma_trichotomy() {
    for (k1, k2, want) in gap_lemma_pairs() {
        let r = gap_lemma(&k1, &k2);
        assert_eq!(r.verdict, want, "{r:?}");
    }
    let first = &gap_lemma_pairs()[0];
    assert_relative_eq!(gap_lemma(&first.0, &first.1).tau_product, 20.25, max_relative = 1e-9);
}

#[test]
fn gap_lemma_other_verdicts() {
    let big = middle_thirds(0.2, 0.6, 6);
    let tiny = affine_cover(0.45, 0.46, 0.54, 6).unwrap();
    assert_eq!(gap_lemma(&big, &tiny).verdict, GapVerdict::K2InGapOfK1);
    let far = affine_cover(0.45, 5.0, 6.0, 4).unwrap();
    assert_eq!(gap_lemma(&tiny, &far).verdict, GapVerdict::DisjointHulls);
}

#[test]
fn intersect_verdict_overlaps_at_every_depth() {
    for d in 0..=10 {
        let a = affine_cover(0.45, 0.0, 1.0, d).unwrap();
        let b = affine_cover(0.45, 0.5, 1.5, d).unwrap();
        let r = gap_lemma(&a, &b);
        if r.verdict == GapVerdict::Intersect {
            assert!(r.overlap, "depth {d}");
        }
    }
}

#[test]
fn box_dimension_examples() {
    let covers: Vec<_> = (4..=10).map(|d| middle_thirds(0.0, 1.0, d)).collect();
    let e = box_dimension(&covers).unwrap();
    assert!((e.value - 2f64.ln() / 3f64.ln()).abs() < 0.01, "{}", e.value);
    let point = IntervalCover::new(vec![(0.3, 0.3)], 0).unwrap();
    assert!(box_dimension(&[point]).unwrap().value.abs() < 0.01);
    let unit = IntervalCover::new(vec![(0.0, 1.0)], 0).unwrap();
    assert!((box_dimension(&[unit]).unwrap().value - 1.0).abs() < 0.01);
    let coarse = middle_thirds(0.0, 1.0, 2);
    assert!(matches!(box_dimension(&[coarse]), Err(Error::InsufficientRange { .. })));
}

fn geometric(m: f64, eps_ratio: f64, levels: usize) -> CantorSchedule {
    let ms = vec![m; levels];
    let eps: Vec<f64> = (1..=levels).map(|l| eps_ratio.powi(l as i32)).collect();
    CantorSchedule::new(&ms, &eps).unwrap()
}

#[test]
fn falconer_geometric_schedule() {
    let e = falconer_bound(&geometric(2.0, 1.0 / 3.0, 20)).unwrap();
    assert!((e.value - 2f64.ln() / 3f64.ln()).abs() < 1e-6);
    // Raw ratios follow ((l-1) log 2) / (l log 3 - log 2).
    let raw = e.diagnostics["ratio_sequence"].as_array().unwrap();
    for (idx, r) in raw.iter().enumerate() {
        let l = (idx + 2) as f64;
        let want = (l - 1.0) * 2f64.ln() / (l * 3f64.ln() - 2f64.ln());
        assert_relative_eq!(r.as_f64().unwrap(), want, max_relative = 1e-12);
    }
    assert_eq!(falconer_bound(&geometric(1.0, 0.5, 10)).unwrap().value, 0.0);
}

#[test]
fn falconer_doubly_exponential_schedule() {
    for alpha in [0.30, 0.45] {
        let s = CantorSchedule::doubly_exponential(alpha, 2.0, 2.0, 1.0, 1.0, 8).unwrap();
        let e = falconer_bound(&s).unwrap();
        assert!((e.value - alpha).abs() < 0.02, "alpha {alpha}: {}", e.value);
    }
}

#[test]
fn falconer_rejects_bad_schedules() {
    assert!(CantorSchedule::new(&[2.0, 0.5, 2.0], &[0.1, 0.01, 0.001]).is_err());
    assert!(CantorSchedule::new(&[2.0, 2.0, 2.0], &[0.1, 0.1, 0.01]).is_err());
    assert!(falconer_bound(&geometric(2.0, 0.25, 2)).is_err());
}

#[test]
fn falconer_below_box_dimension() {
    let f = falconer_bound(&geometric(2.0, 1.0 / 3.0, 12)).unwrap().value;
    let b = box_dimension(&[middle_thirds(0.0, 1.0, 10)]).unwrap().value;
    assert!(f <= b + 0.02);
}

#[test]
fn covering_examples() {
    let s = covering_upper_bound(0.04, &[(100, 1.0)]).unwrap().value;
    assert!((s - 4.04f64.ln() / (2.0 * 4f64.ln())).abs() < 1e-12);
    assert!((s - 0.5036).abs() < 1e-3);
    let s = covering_upper_bound(1.0, &[(3, 1.0)]).unwrap().value;
    assert_relative_eq!(s, 4f64.ln() / (2.0 * 3f64.ln()), max_relative = 1e-14);
    assert!(matches!(covering_upper_bound(0.5, &[(2, 1.0)]), Err(Error::NonHyperbolicBin { .. })));
    let trend = covering_trend(4.0, &[0.1, 0.01, 0.001]).unwrap();
    assert!(trend.windows(2).all(|w| w[1].1 < w[0].1));
    assert!(trend.iter().all(|t| t.1 > 0.5));
    assert!(trend[2].1 - 0.5 < 1e-3);
}

proptest! {
    #[test]
    fn thickness_is_affine_invariant(ratio in 0.1f64..0.45, depth in 1usize..6, slope in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0], offset in -3.0f64..3.0) {
        let c = affine_cover(ratio, 0.0, 1.0, depth).unwrap();
        let image = c.affine_image(slope, offset).unwrap();
        let t = thickness(&c).tau;
        let u = thickness(&image).tau;
        // Endpoint rounding bounds the attainable agreement.
        let cond = conditioning(&c).max(conditioning(&image));
        prop_assert!((t - u).abs() <= (1e-12f64).max(cond) * t);
    }

    #[test]
    fn exact_cover_is_affine_invariant_to_1e12(depth in 1usize..6, slope in prop_oneof![-4.0f64..-0.5, 0.5f64..4.0], offset in -10.0f64..10.0) {
        let c = middle_thirds(0.0, 3f64.powi(depth as i32), depth);
        let u = thickness(&c.affine_image(slope, offset).unwrap()).tau;
        prop_assert!((u - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fast_bridges_match_definition(ratios in proptest::collection::vec(0.05f64..0.45, 1..5)) {
        let mut level = vec![(0.0, 1.0)];
        for r in &ratios {
            level = level.iter().flat_map(|&(l, h)| { let w = r * (h - l); [(l, l + w), (h - w * 0.8, h)] }).collect();
        }
        let c = IntervalCover::new(level, ratios.len()).unwrap();
        prop_assert_eq!(thickness(&c).tau, naive_thickness(&c));
    }

    #[test]
    fn covering_exponent_decreases_in_i(eps in 0.001f64..0.5, base in 2u64..50) {
        let i0 = (1.0 / eps).ceil() as u64 + base;
        let s0 = covering_exponent(eps, i0).unwrap();
        let s1 = covering_exponent(eps, i0 + 1).unwrap();
        prop_assert!(s1 < s0);
    }
}
