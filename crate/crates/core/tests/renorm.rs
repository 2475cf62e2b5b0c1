use nalgebra::{DMatrix, DVector};
use newhouse::renorm::*;
use newhouse::tangency::{find_tangency, TangencyOptions};
use newhouse::windows::Generator;
use newhouse::{Error, HenonLikeFamily};
use proptest::prelude::*;

fn beta_generator(b: f64) -> (HenonLikeFamily, Generator) {
    let fam = HenonLikeFamily::henon(b);
    let beta = fam.find_periodic_orbit(-2.0, 1, [2.0, 2.0 * b], 1e-13).unwrap();
    let rec = find_tangency(&fam, (-2.1, -1.9), &beta, &TangencyOptions::default()).unwrap();
    let gen = Generator::new(&fam, &rec).unwrap();
    (fam, gen)
}

fn renormalize(b: f64, n: usize, opts: &RenormOptions) -> (SampledMap, RenormalizedFamily) {
    let (fam, gen) = beta_generator(b);
    let sm = return_map(&fam, &gen, n, opts).unwrap();
    let rf = fit_normal_form(&sm).unwrap();
    (sm, rf)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn exact_henon_is_its_own_normal_form() {
    let b = 1e-3;
    let sm = henon_samples(b, &[-0.2, -0.1, 0.0, 0.1, 0.2], 9, 0.4);
    let rf = fit_normal_form(&sm).unwrap();
    assert!(rf.delta < 1e-10, "{}", rf.delta);
    assert!(rf.model_distance < 1e-10);
    assert!((rf.det_estimate - b).abs() < 1e-15);
    assert!((rf.model_b - b).abs() < 1e-12);
    assert!((rf.a_map.slope - 1.0).abs() < 1e-10 && rf.a_map.offset.abs() < 1e-10);
    let nf = rf.normal_form;
    assert!((nf.xi - 1.0).abs() < 1e-10 && (nf.gamma - 1.0).abs() < 1e-10 && (nf.theta - 1.0).abs() < 1e-10);
}

#[test]
fn unimodal_restriction_at_b_zero() {
    let (sm, _) = renormalize(0.0, 2, &RenormOptions::default());
    assert_eq!(sm.pilot.shear, 0.0);
    let g = sm.grid;
    let mid = sm.param_offsets.len() / 2;
    // Centre row of the centre parameter: y = 0 in local coordinates.
    let row: Vec<_> = (0..g).map(|j| sm.samples[mid * g * g + (g / 2) * g + j]).collect();
    assert!(row.iter().all(|s| s.dy == 0.0));
    let d1: Vec<f64> = row.windows(2).map(|w| (w[1].dx_out - w[0].dx_out) / (w[1].dx - w[0].dx)).collect();
    let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
    let turns = d1.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    assert_eq!(turns, 1);
    assert!(d2.iter().all(|&c| c.signum() == d2[0].signum() && c != 0.0));
}

#[test]
fn default_box_has_no_escapes_at_b_1e3_n6() {
    let (fam, gen) = beta_generator(1e-3);
    let opts = RenormOptions::default();
    let sm = return_map(&fam, &gen, 6, &opts).unwrap();
    assert_eq!(sm.samples.len(), 33 * 33 * opts.params);
    assert_eq!(sm.steps, 6 + newhouse::windows::GENERATOR_OFFSET);
}

#[test]
fn delta_decreases_with_n_at_b_zero() {
    let opts = RenormOptions::default();
    let deltas: Vec<f64> = [4, 6, 8].iter().map(|&n| renormalize(0.0, n, &opts).1.delta).collect();
    assert!(deltas.windows(2).all(|w| w[1] < w[0]), "{deltas:?}");
}

#[test]
fn determinant_decays_like_b_power() {
    let b: f64 = 1e-2;
    let (fam, gen) = beta_generator(b);
    let opts = RenormOptions::default();
    let ns = [3.0, 4.0, 5.0];
    let mut logs = vec![];
    let mut deltas = vec![];
    for &n in &ns {
        let sm = return_map(&fam, &gen, n as usize, &opts).unwrap();
        let rf = fit_normal_form(&sm).unwrap();
        assert!((rf.det_estimate / b.powi(n as i32 + 3) - 1.0).abs() < 1e-9);
        logs.push(rf.det_estimate.ln());
        deltas.push(rf.delta);
    }
    let s = slope(&ns, &logs);
    assert!((s / b.ln() - 1.0).abs() < 0.05, "{s}");
    assert!(deltas.windows(2).all(|w| w[1] < w[0]), "{deltas:?}");
}

#[test]
fn chart_round_trip_on_grid() {
    let (sm, rf) = renormalize(1e-2, 3, &RenormOptions::default());
    let mut worst: f64 = 0.0;
    for r in sm.rows() {
        let back = rf.chart.invert(rf.chart.apply([r[0], r[1]], r[2]), r[2]);
        worst = worst.max((back[0] - r[0]).abs()).max((back[1] - r[1]).abs());
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn quadratic_coefficient_is_one_in_chart_coordinates() {
    for (b, n) in [(0.0, 3), (1e-3, 4)] {
        let (sm, rf) = renormalize(b, n, &RenormOptions::default());
        let rows = sm.rows();
        let mut m = DMatrix::<f64>::zeros(rows.len(), 14);
        let mut out = DVector::<f64>::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let [u, v] = rf.chart.apply([r[0], r[1]], r[2]);
            let al = rf.a_map.apply(r[2]);
            let basis = [1.0, u, v, al, u * u, u * v, u * al, v * v, v * al, al * al, u * u * u, u * u * v, u * u * al, u.powi(4)];
            for (j, val) in basis.into_iter().enumerate() {
                m[(i, j)] = val;
            }
            out[i] = rf.chart.apply([r[3], r[4]], r[2])[0];
        }
        let coef = m.svd(true, true).solve(&out, 1e-14).unwrap();
        assert!((coef[4] - 1.0).abs() < 1e-6, "b={b} n={n} {}", coef[4]);
        assert!((coef[2] - 1.0).abs() < 1e-3 && (coef[3] - 1.0).abs() < 1e-3);
    }
}

#[test]
fn xi_stable_under_grid_refinement() {
    let (fam, gen) = beta_generator(1e-3);
    let coarse = RenormOptions::default();
    let fine = RenormOptions { grid: 65, ..RenormOptions::default() };
    let x33 = fit_normal_form(&return_map(&fam, &gen, 4, &coarse).unwrap()).unwrap().normal_form.xi;
    let x65 = fit_normal_form(&return_map(&fam, &gen, 4, &fine).unwrap()).unwrap().normal_form.xi;
    assert!(((x65 - x33) / x33).abs() < 0.01);
}

#[test]
fn chain_rule_determinant_matches_finite_differences() {
    let sm = henon_samples(0.3, &[-1.0, 0.0, 1.0], 11, 1.0);
    assert!(sm.fd_determinants().iter().all(|d| (d + 0.3).abs() < 1e-12));
    for b in [1e-2, 2e-2, 3e-2] {
        let (fam, gen) = beta_generator(b);
        let sm = return_map(&fam, &gen, 0, &RenormOptions::default()).unwrap();
        let fd = sm.fd_determinants();
        let g = sm.grid;
        let mut k = 0;
        for p in 0..sm.param_offsets.len() {
            for i in 1..g - 1 {
                for j in 1..g - 1 {
                    let chain = sm.samples[p * g * g + i * g + j].det.unwrap();
                    assert!(((fd[k] - chain) / chain).abs() < 0.01, "b={b} {} vs {chain}", fd[k]);
                    k += 1;
                }
            }
        }
        assert!((chain_median(&sm) / b.powi(3) - 1.0).abs() < 1e-9);
    }
}

fn chain_median(sm: &SampledMap) -> f64 {
    let mut d: Vec<f64> = sm.samples.iter().map(|s| s.det.unwrap().abs()).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

#[test]
fn single_point_grid_gives_one_pair() {
    let (fam, gen) = beta_generator(1e-3);
    let opts = RenormOptions { grid: 1, params: 1, ..RenormOptions::default() };
    let sm = return_map(&fam, &gen, 2, &opts).unwrap();
    assert_eq!(sm.samples.len(), 1);
    assert_eq!(sm.rows().len(), 1);
    assert!(matches!(fit_normal_form(&sm), Err(Error::RankDeficientFit)));
}

#[test]
fn too_few_parameters_is_rank_deficient() {
    let sm = henon_samples(1e-3, &[0.0, 0.1], 9, 0.4);
    assert!(matches!(fit_normal_form(&sm), Err(Error::RankDeficientFit)));
}

#[test]
fn conditions_examples() {
    let r = check_conditions(1e-13, 1e-3, 1e-27, 0.1);
    assert!(r.c1 && r.c2);
    let r = check_conditions(1e-13, 1e-3, 0.0, 0.1);
    assert!(r.c1 && !r.c2);
    let r = check_conditions(-1e-13, 1e-3, 1e-27, 0.1);
    assert!(!r.c1);
    let r = check_conditions(1e-11, 1e-3, 1e-27, 0.1);
    assert!(!r.c1);
    let r = check_conditions(1e-13, 1e-3, 1e-26, 0.1);
    assert!(!r.c2);
}

#[test]
fn fold_gap_of_quadratic() {
    // U² + a' has β'⁻ = −β with β = (1 + √(1 − 4a'))/2; at a' = −2, β = 2.
    assert!(fold_gap(-2.0).unwrap().abs() < 1e-15);
    assert!(fold_gap(-1.9).unwrap() < 0.0);
    assert!(fold_gap(-2.1).unwrap() > 0.0);
    assert!(matches!(fold_gap(0.3), Err(Error::NoFixedPoint)));
}

#[test]
fn conditions_on_a_fitted_family() {
    let (_, rf) = renormalize(1e-3, 4, &RenormOptions::default());
    // Parameter whose renormalized value sits just below the tip of the fold.
    let target = -2.0 - 1e-14;
    let a = rf.a_map.centre + (target - rf.a_map.offset) / rf.a_map.slope;
    let rep = conditions_c1_c2(&rf, a, 1e-3, 0.1).unwrap();
    assert!(rep.gap > 0.0);
    assert_eq!(rep.b_n, rf.det_estimate);
}

proptest! {
    #[test]
    fn chart_inverts(tx in -2.0..2.0f64, ty in -1.0..1.0f64, ty_a in -1.0..1.0f64, sx in 1.0..1e4f64,
                     sy in 1.0..1e4f64, shear in -0.1..0.1f64, x in -2.0..2.0f64, y in -1.0..1.0f64, a in -2.1..-1.9f64) {
        let c = Chart { tx, ty, ty_a, a_centre: -2.0, sx, sy, shear };
        let back = c.invert(c.apply([x, y], a), a);
        prop_assert!((back[0] - x).abs() < 1e-12 && (back[1] - y).abs() < 1e-12);
    }

    #[test]
    fn henon_fits_itself(b in 0.0..0.5f64) {
        let rf = fit_normal_form(&henon_samples(b, &[-0.2, 0.0, 0.2], 7, 0.4)).unwrap();
        prop_assert!(rf.delta < 1e-10);
        prop_assert!((rf.det_estimate - b).abs() < 1e-12);
    }
}
