use approx::assert_relative_eq;
use newhouse::maps::*;
use newhouse::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(p: Point, q: Point, tol: f64) -> bool {
    dist(p, q) < tol
}

#[test]
fn eval_examples() {
    let h0 = HenonLikeFamily::henon(0.0);
    assert_eq!(h0.eval(0.0, [1.0, 0.0]), [1.0, 0.0]);
    let o = h0.iterate(-2.0, [0.0, 0.0], 3, 10.0);
    assert_eq!(o.points, vec![[-2.0, 0.0], [2.0, 0.0], [2.0, 0.0]]);
    assert!(!o.escaped);
    assert_eq!(HenonLikeFamily::henon(0.1).eval(-2.0, [0.0, 0.0]), [-2.0, 0.0]);
}

#[test]
fn iterate_escape_and_fixed() {
    let h0 = HenonLikeFamily::henon(0.0);
    let o = h0.iterate(1.0, [0.0, 0.0], 100, 10.0);
    assert!(o.escaped);
    assert!(o.points.len() <= 5);
    let o = h0.iterate(-2.0, [2.0, 0.0], 100, 10.0);
    assert_eq!(o.points.len(), 100);
    assert!(o.points.iter().all(|&p| p == [2.0, 0.0]));
}

#[test]
fn jacobian_is_analytic() {
    let h = HenonLikeFamily::henon(0.3);
    let j = h.jacobian(-1.0, [0.7, -0.2]);
    assert_eq!((j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]), (1.4, 1.0, 0.3, 0.0));
    assert_relative_eq!(j.determinant(), -0.3);
    let j0 = HenonLikeFamily::henon(0.0).jacobian(-1.0, [0.7, 0.0]);
    assert_eq!(j0[(1, 0)], 0.0);
    assert_eq!(j0[(1, 1)], 0.0);
}

fn perturbed() -> HenonLikeFamily {
    let t = |i, j, k, c| Monomial { i, j, k, coeff: c };
    HenonLikeFamily::with_perturbation(
        0.2,
        0.01,
        Poly::new(vec![t(3, 0, 0, 0.01), t(1, 1, 1, -0.005), t(0, 2, 2, 0.008)]),
        Poly::new(vec![t(2, 0, 1, 0.004), t(0, 1, 0, 0.01)]),
    )
    .unwrap()
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fams = [HenonLikeFamily::henon(0.3), perturbed()];
    let h = 1e-5;
    for f in &fams {
        for _ in 0..100 {
            let a = rng.gen_range(-2.5..0.5);
            let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-0.5..0.5)];
            let j = f.jacobian(a, p);
            for col in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[col] += h;
                pm[col] -= h;
                let (fp, fm) = (f.eval(a, pp), f.eval(a, pm));
                for row in 0..2 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!((fd - j[(row, col)]).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn perturbation_bound_enforced() {
    let bad = HenonLikeFamily::with_perturbation(
        0.1,
        1e-3,
        Poly::new(vec![Monomial { i: 1, j: 0, k: 0, coeff: 0.1 }]),
        Poly::default(),
    );
    assert!(matches!(bad, Err(Error::InvalidFamily(_))));
}

#[test]
fn family_json_round_trip() {
    let f = perturbed();
    let s = serde_json::to_string(&f).unwrap();
    assert!(s.contains("perturbA"));
    let g: HenonLikeFamily = serde_json::from_str(&s).unwrap();
    assert_eq!(f, g);
    let bare: HenonLikeFamily = serde_json::from_str(r#"{"b":0.01}"#).unwrap();
    assert!(bare.is_pure());
}

#[test]
fn inverse_of_perturbed_family() {
    let f = perturbed();
    let z = [0.4, -0.05];
    let w = f.eval(-1.5, z);
    assert!(close(f.inverse(-1.5, w).unwrap(), z, 1e-12));
    assert!(HenonLikeFamily::henon(0.0).inverse(-2.0, [1.0, 0.0]).is_err());
}

#[test]
fn chebyshev_fixed_points() {
    let h0 = HenonLikeFamily::henon(0.0);
    let beta = h0.find_periodic_orbit(-2.0, 1, [1.9, 0.0], 1e-12).unwrap();
    assert!(close(beta.points[0], [2.0, 0.0], 1e-12));
    assert_relative_eq!(beta.mult_unstable, 4.0, epsilon = 1e-12);
    assert_eq!(beta.mult_stable, 0.0);
    let alpha = h0.find_periodic_orbit(-2.0, 1, [-0.9, 0.0], 1e-12).unwrap();
    assert!(close(alpha.points[0], [-1.0, 0.0], 1e-12));
    assert_relative_eq!(alpha.mult_unstable, -2.0, epsilon = 1e-12);
}

#[test]
fn fixed_sink_region() {
    // x^2 + a = x has a sink iff |1 - sqrt(1-4a)| < 1, i.e. a in (-3/4, 1/4).
    let h0 = HenonLikeFamily::henon(0.0);
    for a in [-0.74, -0.5, 0.0, 0.2, 0.24] {
        let seed = (1.0 - (1.0 - 4.0 * a as f64).sqrt()) / 2.0;
        let o = h0.find_periodic_orbit(a, 1, [seed + 0.01, 0.0], 1e-12).unwrap();
        assert!(o.is_sink(), "a = {a}");
    }
    for a in [-0.8, -1.0] {
        let seed = (1.0 - (1.0 - 4.0 * a as f64).sqrt()) / 2.0;
        let o = h0.find_periodic_orbit(a, 1, [seed, 0.0], 1e-12).unwrap();
        assert!(!o.is_sink(), "a = {a}");
    }
}

#[test]
fn continuation_in_b_matches_closed_form() {
    let h0 = HenonLikeFamily::henon(0.0);
    let beta = h0.find_periodic_orbit(-2.0, 1, [2.0, 0.0], 1e-12).unwrap();
    let moved = h0.continue_orbit_in_b(&beta, -2.0, 0.05, 10).unwrap();
    // x^2 + (b - 1) x + a = 0, larger root.
    let b: f64 = 0.05;
    let x = ((1.0 - b) + ((1.0 - b).powi(2) + 8.0).sqrt()) / 2.0;
    assert!((moved.points[0][0] - x).abs() < 1e-10);
    assert!((moved.points[0][0] - 2.0).abs() < 0.05);
}

#[test]
fn continuation_identity_and_fold() {
    let h0 = HenonLikeFamily::henon(0.0);
    let beta = h0.find_periodic_orbit(-2.0, 1, [2.0, 0.0], 1e-12).unwrap();
    assert_eq!(h0.continue_orbit(&beta, -2.0, -2.0, 5).unwrap(), beta);
    assert_eq!(h0.continue_orbit(&beta, -2.0, -1.5, 0).unwrap(), beta);
    let a0 = -1.0;
    let alpha = h0.find_periodic_orbit(a0, 1, [-0.6, 0.0], 1e-12).unwrap();
    let r = h0.continue_orbit(&alpha, a0, 0.5, 200);
    assert!(matches!(r, Err(Error::LostHyperbolicity { .. })), "{r:?}");
}

#[test]
fn continuation_tracks_period_two() {
    let h = HenonLikeFamily::henon(0.1);
    let o = h.find_periodic_orbit(-1.8, 2, [1.2, -0.1], 1e-12).unwrap();
    let c = h.continue_orbit(&o, -1.8, -1.9, 20).unwrap();
    assert_eq!(c.period, 2);
    assert!(c.residual < 1e-12);
}

fn exact_det(m: &[nalgebra::Matrix2<f64>]) -> f64 {
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};
    let q = |v: f64| BigRational::from_float(v).unwrap();
    let mut acc = [[BigRational::one(), BigRational::zero()], [BigRational::zero(), BigRational::one()]];
    for j in m {
        let e = [[q(j[(0, 0)]), q(j[(0, 1)])], [q(j[(1, 0)]), q(j[(1, 1)])]];
        let mut next = [[BigRational::zero(), BigRational::zero()], [BigRational::zero(), BigRational::zero()]];
        for r in 0..2 {
            for c in 0..2 {
                next[r][c] = &e[r][0] * &acc[0][c] + &e[r][1] * &acc[1][c];
            }
        }
        acc = next;
    }
    (&acc[0][0] * &acc[1][1] - &acc[0][1] * &acc[1][0]).to_f64().unwrap()
}

#[test]
fn determinant_is_multiplicative() {
    // Product of per-step determinants against the exact determinant of the
    // exact product of the (floating) Jacobians.
    for f in [perturbed(), HenonLikeFamily::henon(0.2)] {
        let pts = f.iterate(-1.3, [0.3, 0.01], 30, 10.0).points;
        assert_eq!(pts.len(), 30);
        let jac: Vec<_> = pts.iter().map(|&p| f.jacobian(-1.3, p)).collect();
        for n in [1, 5, 12, 30] {
            let per_step: f64 = jac[..n].iter().map(|j| j.determinant()).product();
            let exact = exact_det(&jac[..n]);
            assert!((per_step - exact).abs() <= 1e-10 * exact.abs(), "n = {n}");
        }
    }
    let h = HenonLikeFamily::henon(0.2);
    let pts = h.iterate(-1.3, [0.1, 0.0], 30, 10.0).points;
    let jac: Vec<_> = pts.iter().map(|&p| h.jacobian(-1.3, p)).collect();
    let want = 0.2f64.powi(30);
    assert!((exact_det(&jac).abs() - want).abs() <= 1e-10 * want);
}

#[test]
fn multipliers_multiply_to_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 50 {
        let a = rng.gen_range(-2.2..-1.2);
        let b = rng.gen_range(-0.3..0.3);
        let h = HenonLikeFamily::henon(b);
        let p = rng.gen_range(1..=8);
        let seed = [rng.gen_range(-1.5..1.5), rng.gen_range(-0.3..0.3)];
        if let Ok(o) = h.find_periodic_orbit(a, p, seed, 1e-12) {
            let want = (-b).powi(p as i32);
            assert!(o.residual < 1e-10);
            assert!((o.mult_stable * o.mult_unstable - want).abs() <= 1e-8 * want.abs());
            assert!(o.mult_stable.abs() <= o.mult_unstable.abs());
            checked += 1;
        }
    }
}

#[test]
fn diagonal_model_products_are_exact() {
    let m = DiagonalMap { lx: 0.2, ly: 3.0 };
    let o = find_periodic_orbit(&m, 1, [0.0, 0.0], 1e-12).unwrap();
    let s = derivative_products(&m, &o, 0, -6..=12).unwrap();
    for e in &s.entries {
        assert_relative_eq!(e.sigma_n, 3f64.powi(e.n.abs() as i32), max_relative = 1e-13);
        assert_relative_eq!(e.lambda_n, 0.2f64.powi(e.n.abs() as i32), max_relative = 1e-13);
    }
}

#[test]
fn beta_products_at_b_zero() {
    let h0 = HenonLikeFamily::henon(0.0);
    let beta = h0.find_periodic_orbit(-2.0, 1, [2.0, 0.0], 1e-12).unwrap();
    let s = derivative_products(&h0.at(-2.0), &beta, 0, 0..=10).unwrap();
    for e in &s.entries {
        assert_relative_eq!(e.sigma_n, 4f64.powi(e.n as i32), max_relative = 1e-12);
        if e.n > 0 {
            assert_eq!(e.lambda_n, 0.0);
        }
    }
}

#[test]
fn shear_fails_cone_test() {
    // Jordan-like shear: both directions collapse onto the x axis.
    struct Shear;
    impl PlanarMap for Shear {
        fn eval(&self, p: Point) -> Point {
            [2.0 * p[0] + 10.0 * p[1], 1.9 * p[1]]
        }
        fn jacobian(&self, _p: Point) -> nalgebra::Matrix2<f64> {
            nalgebra::Matrix2::new(2.0, 10.0, 0.0, 1.9)
        }
        fn inverse(&self, p: Point) -> newhouse::Result<Point> {
            Ok([(p[0] - 10.0 * p[1] / 1.9) / 2.0, p[1] / 1.9])
        }
    }
    let o = find_periodic_orbit(&Shear, 1, [0.0, 0.0], 1e-12).unwrap();
    let r = derivative_products(&Shear, &o, 0, 0..=3);
    assert!(matches!(r, Err(Error::ConeFieldViolation { .. })));
}

proptest! {
    #[test]
    fn pure_family_determinant_is_minus_b(b in -0.9f64..0.9, a in -2.5f64..0.5, x in -3.0f64..3.0, y in -1.0f64..1.0) {
        let d = HenonLikeFamily::henon(b).jacobian(a, [x, y]).determinant();
        prop_assert!((d + b).abs() < 1e-15);
    }

    #[test]
    fn inverse_undoes_eval(b in 0.05f64..0.5, a in -2.0f64..0.0, x in -2.0f64..2.0, y in -0.5f64..0.5) {
        let f = HenonLikeFamily::henon(b);
        let z = f.inverse(a, f.eval(a, [x, y])).unwrap();
        prop_assert!(dist(z, [x, y]) < 1e-9);
    }
}
