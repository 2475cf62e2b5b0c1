//! Return-map renormalization near a tangency: sampling, normal-form fit and
//! the conditions on the renormalized fold.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{jacobian_product, HenonLikeFamily, Point};
use crate::numerics::{lstsq, median};
use crate::windows::{window_center, Generator, GENERATOR_OFFSET};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormOptions {
    /// Side of the sampling box in renormalized coordinates.
    pub box_side: f64,
    /// Grid points per axis.
    pub grid: usize,
    /// Number of parameter samples.
    pub params: usize,
    /// Parameter span in units of the predicted window width.
    pub param_span: f64,
    pub escape_radius: f64,
}

impl Default for RenormOptions {
    fn default() -> Self {
        RenormOptions {
            box_side: 0.2,
            grid: 33,
            params: 5,
            param_span: 2.0,
            escape_radius: 10.0,
        }
    }
}

/// First-order prediction of the chart, used to place the grid and to
/// condition the fit: u = ξ·X, v = ξγ·(Y − sX), α = ξθ·A in local
/// coordinates, where the shear s aligns the second axis with the image
/// direction of the return map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotScales {
    pub xi: f64,
    pub gamma: f64,
    pub theta: f64,
    pub shear: f64,
}

/// One grid point: input and output as offsets from the cycle point and the
/// centre parameter, plus the determinant of the return map there (chain rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub dx: f64,
    pub dy: f64,
    pub da: f64,
    pub dx_out: f64,
    pub dy_out: f64,
    pub det: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledMap {
    pub n: usize,
    /// Iterates composed per return (n plus the fold passage).
    pub steps: usize,
    pub centre: Point,
    pub a_center: f64,
    pub pilot: PilotScales,
    pub grid: usize,
    pub param_offsets: Vec<f64>,
    /// Ordered by parameter, then y, then x.
    pub samples: Vec<ReturnSample>,
}

impl SampledMap {
    /// Rows (x_in, y_in, a, x_out, y_out) in absolute coordinates.
    pub fn rows(&self) -> Vec<[f64; 5]> {
        let [px, py] = self.centre;
        self.samples
            .iter()
            .map(|s| [px + s.dx, py + s.dy, self.a_center + s.da, px + s.dx_out, py + s.dy_out])
            .collect()
    }

    /// Determinants of the return map by central differences on the grid,
    /// at interior grid points.
    pub fn fd_determinants(&self) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![];
        if g < 3 {
            return out;
        }
        for k in 0..self.param_offsets.len() {
            let at = |i: usize, j: usize| &self.samples[k * g * g + i * g + j];
            for i in 1..g - 1 {
                for j in 1..g - 1 {
                    let (l, r, d, u) = (at(i, j - 1), at(i, j + 1), at(i - 1, j), at(i + 1, j));
                    let hx = r.dx - l.dx;
                    let hy = u.dy - d.dy;
                    let a = (r.dx_out - l.dx_out) / hx;
                    let c = (r.dy_out - l.dy_out) / hx;
                    let b = (u.dx_out - d.dx_out) / hy;
                    let dd = (u.dy_out - d.dy_out) / hy;
                    out.push(a * dd - b * c);
                }
            }
        }
        out
    }
}

/// f(c + d; a + da) − f(c; a) without forming the absolute image.
fn step_delta(family: &HenonLikeFamily, a: f64, c: Point, d: Point, da: f64) -> Point {
    let b = family.b;
    let z = [c[0] + d[0], c[1] + d[1]];
    let mut u = (2.0 * c[0] + d[0]) * d[0] + d[1] + da;
    let mut v = b * d[0];
    if !family.perturb_a.is_empty() {
        u += family.perturb_a.eval(z[0], z[1], a + da) - family.perturb_a.eval(c[0], c[1], a);
    }
    if !family.perturb_b.is_empty() {
        v += b * (family.perturb_b.eval(z[0], z[1], a + da) - family.perturb_b.eval(c[0], c[1], a));
    }
    [u, v]
}

/// Samples the return map f^{n+N} near the critical point of the cycle at
/// the centre of the period-(n+N) window generated by `gen`.
pub fn return_map(family: &HenonLikeFamily, gen: &Generator, n: usize, opts: &RenormOptions) -> Result<SampledMap> {
    let steps = n + GENERATOR_OFFSET;
    let (a_c, orbit) = window_center(family, steps, gen)?;
    let k0 = orbit.closest_to_critical();
    let cyc: Vec<Point> = (0..steps).map(|i| orbit.points[(k0 + i) % steps]).collect();
    sample_cycle(family, a_c, &cyc, n, opts)
}

fn sample_cycle(family: &HenonLikeFamily, a_c: f64, cyc: &[Point], n: usize, opts: &RenormOptions) -> Result<SampledMap> {
    let steps = cyc.len();
    let map = family.at(a_c);
    let resid: Vec<Point> = (0..steps)
        .map(|k| {
            let f = family.eval(a_c, cyc[k]);
            let next = cyc[(k + 1) % steps];
            [f[0] - next[0], f[1] - next[1]]
        })
        .collect();
    // Pilot scales from the linearization along the cycle.
    let tail = jacobian_product(&map, &cyc[1..]);
    let full = tail * family.jacobian(a_c, cyc[0]);
    let xi = tail[(0, 0)];
    let gamma = full[(0, 1)];
    let shear = full[(1, 1)] / full[(0, 1)];
    let mut w = [0.0, 0.0];
    for &c in cyc {
        let j = family.jacobian(a_c, c);
        let da = family.d_da(a_c, c);
        w = [j[(0, 0)] * w[0] + j[(0, 1)] * w[1] + da[0], j[(1, 0)] * w[0] + j[(1, 1)] * w[1] + da[1]];
    }
    let theta = w[0];
    if !(xi.is_finite() && gamma.is_finite() && theta.is_finite()) || xi == 0.0 || gamma == 0.0 || theta == 0.0 {
        return Err(Error::RankDeficientFit);
    }
    let pilot = PilotScales { xi, gamma, theta, shear };
    let g = opts.grid.max(1);
    let lin = |k: usize, m: usize, half: f64| if m == 1 { 0.0 } else { -half + 2.0 * half * k as f64 / (m - 1) as f64 };
    let half = 0.5 * opts.box_side;
    let np = opts.params.max(1);
    // The window of the model spans one unit of α; the slice spans `param_span` of them.
    let param_offsets: Vec<f64> = (0..np).map(|k| lin(k, np, 0.5 * opts.param_span) / (xi * theta)).collect();
    let mut inputs = vec![];
    for &da in &param_offsets {
        for i in 0..g {
            for j in 0..g {
                let x = lin(j, g, half) / xi;
                inputs.push((x, lin(i, g, half) / (xi * gamma) + shear * x, da));
            }
        }
    }
    let samples: Vec<Result<ReturnSample>> = inputs
        .par_iter()
        .map(|&(dx, dy, da)| {
            let mut d = [dx, dy];
            let mut det = 1.0;
            for k in 0..steps {
                let c = cyc[k];
                det *= family.jacobian(a_c + da, [c[0] + d[0], c[1] + d[1]]).determinant();
                let s = step_delta(family, a_c, c, d, da);
                d = [s[0] + resid[k][0], s[1] + resid[k][1]];
                let z = cyc[(k + 1) % steps];
                let abs = [z[0] + d[0], z[1] + d[1]];
                if !(abs[0].hypot(abs[1]) <= opts.escape_radius) {
                    return Err(Error::OrbitEscaped { x: cyc[0][0] + dx, y: cyc[0][1] + dy });
                }
            }
            Ok(ReturnSample {
                dx,
                dy,
                da,
                dx_out: d[0],
                dy_out: d[1],
                det: Some(det),
            })
        })
        .collect();
    Ok(SampledMap {
        n,
        steps,
        centre: cyc[0],
        a_center: a_c,
        pilot,
        grid: g,
        param_offsets,
        samples: samples.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Affine chart U = sx·(x − tx), V = sy·((y − ty(a)) − shear·(x − tx)),
/// with ty(a) = ty + ty_a·(a − a_centre).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub tx: f64,
    pub ty: f64,
    pub ty_a: f64,
    pub a_centre: f64,
    pub sx: f64,
    pub sy: f64,
    pub shear: f64,
}

impl Chart {
    fn ty_at(&self, a: f64) -> f64 {
        self.ty + self.ty_a * (a - self.a_centre)
    }
    pub fn apply(&self, p: Point, a: f64) -> Point {
        let (dx, dy) = (p[0] - self.tx, p[1] - self.ty_at(a));
        [self.sx * dx, self.sy * (dy - self.shear * dx)]
    }
    pub fn invert(&self, q: Point, a: f64) -> Point {
        let dx = q[0] / self.sx;
        [dx + self.tx, q[1] / self.sy + self.shear * dx + self.ty_at(a)]
    }
}

/// a ↦ a^(n) = slope·(a − centre) + offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamMap {
    pub centre: f64,
    pub slope: f64,
    pub offset: f64,
}

impl ParamMap {
    pub fn apply(&self, a: f64) -> f64 {
        self.slope * (a - self.centre) + self.offset
    }
}

/// Coefficients of (ξx² + θ(a − a_n) + γy, q + ζx) in local coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub xi: f64,
    pub theta: f64,
    pub gamma: f64,
    pub q: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormalizedFamily {
    pub n: usize,
    pub chart: Chart,
    /// Sup of the fit residual plus the first-order terms of E on the grid.
    pub delta: f64,
    pub fit_residual: f64,
    /// Sup distance to the Hénon model (U² + a + V, b'U) on the grid,
    /// higher-order terms of E included.
    pub model_distance: f64,
    pub det_estimate: f64,
    pub a_map: ParamMap,
    pub normal_form: NormalForm,
    /// b' of the fitted model.
    pub model_b: f64,
    /// Half-width of the sampled box in chart coordinates.
    pub box_radius: f64,
}

impl RenormalizedFamily {
    /// The fitted model at renormalized parameter `ar`.
    pub fn model(&self, ar: f64, p: Point) -> Point {
        [p[0] * p[0] + ar + p[1], self.model_b * p[0]]
    }
}

fn monomials(u: f64, v: f64, al: f64, second: bool) -> Vec<f64> {
    if second {
        vec![1.0, u, v, al, u * u, u * v, u * al, u * u * u, v * v, v * al, al * al]
    } else {
        vec![
            1.0,
            u,
            v,
            al,
            u * u,
            u * v,
            u * al,
            v * v,
            v * al,
            al * al,
            u * u * u,
            u * u * v,
            u * u * al,
            u * u * u * u,
        ]
    }
}

fn fit_component(rows: &[(f64, f64, f64)], out: &[f64], second: bool) -> Result<(DVector<f64>, DVector<f64>)> {
    let cols = monomials(0.0, 0.0, 0.0, second).len();
    let mut m = DMatrix::<f64>::zeros(rows.len(), cols);
    for (i, &(u, v, al)) in rows.iter().enumerate() {
        for (j, val) in monomials(u, v, al, second).into_iter().enumerate() {
            m[(i, j)] = val;
        }
    }
    if out.iter().all(|&y| y == 0.0) {
        return Ok((DVector::zeros(cols), DVector::zeros(rows.len())));
    }
    lstsq(&m, &DVector::from_column_slice(out))
}

/// Least-squares fit of the normal form and the chart that brings it to
/// (U² + a + V, b'U).
pub fn fit_normal_form(map: &SampledMap) -> Result<RenormalizedFamily> {
    let distinct_a = {
        let mut v = map.param_offsets.clone();
        v.dedup();
        v.len()
    };
    if map.grid * map.grid < 25 || distinct_a < 3 {
        return Err(Error::RankDeficientFit);
    }
    let PilotScales { xi: xp, gamma: gp, theta: tp, shear } = map.pilot;
    let (su, sv, sa) = (xp, xp * gp, xp * tp);
    // The second coordinate is shifted by κα on both sides so that the
    // fitted second component has no first-order parameter dependence.
    let mut kappa = 0.0;
    let mut fitted = None;
    for _ in 0..3 {
        let rows: Vec<(f64, f64, f64)> = map
            .samples
            .iter()
            .map(|s| (su * s.dx, sv * (s.dy - shear * s.dx) - kappa * sa * s.da, sa * s.da))
            .collect();
        let o1: Vec<f64> = map.samples.iter().map(|s| su * s.dx_out).collect();
        let o2: Vec<f64> =
            map.samples.iter().map(|s| sv * (s.dy_out - shear * s.dx_out) - kappa * sa * s.da).collect();
        let (c1, r1) = fit_component(&rows, &o1, false)?;
        let (c2, r2) = fit_component(&rows, &o2, true)?;
        let step = c2[3] / (1.0 - c2[2]);
        let done = !step.is_finite() || step.abs() <= 1e-15 * (1.0 + kappa.abs());
        if step.is_finite() {
            kappa += step;
        }
        fitted = Some((rows, o1, o2, c1, r1, c2, r2));
        if done {
            break;
        }
    }
    let (rows, o1, o2, c1, r1, c2, r2) = fitted.expect("at least one pass");
    let (c0, cu, gam, th, xi) = (c1[0], c1[1], c1[2], c1[3], c1[4]);
    let (d0, zeta) = (c2[0], c2[1]);
    if xi == 0.0 || gam == 0.0 || th == 0.0 {
        return Err(Error::RankDeficientFit);
    }
    let x0 = -cu / (2.0 * xi);
    let (umin, umax) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.0), hi.max(r.0)));
    if !(umin <= x0 && x0 <= umax) {
        return Err(Error::FoldOutsideBox);
    }
    let y0 = d0 + zeta * x0;
    // Chart in pilot coordinates: U = xi (u − x0), V = xi·gam (v − y0).
    let (kx, ky) = (xi, xi * gam);
    let model_b = gam * zeta;
    let a_off = xi * (c0 - xi * x0 * x0 - x0) + xi * gam * y0;
    let a_slope = xi * th;
    // First-order terms of E at the fold (u = x0, v = 0, α = 0) beyond the
    // normal-form coefficients.
    let e1 = [
        cu + 2.0 * xi * x0 + 3.0 * c1[10] * x0 * x0 + 4.0 * c1[13] * x0.powi(3),
        c1[5] * x0 + c1[11] * x0 * x0,
        c1[6] * x0 + c1[12] * x0 * x0,
    ];
    let e2 = [2.0 * c2[4] * x0 + 3.0 * c2[7] * x0 * x0, c2[2] + c2[5] * x0, c2[3] + c2[6] * x0];
    let mut first_order: f64 = 0.0;
    let mut model_distance: f64 = 0.0;
    for ((&(u, v, al), &u1), &v1) in rows.iter().zip(&o1).zip(&o2) {
        let (uu, vv) = (kx * (u - x0), ky * (v - y0));
        let ar = a_slope * al + a_off;
        let (uo, vo) = (kx * (u1 - x0), ky * (v1 - y0));
        model_distance = model_distance.max((uo - (uu * uu + ar + vv)).abs()).max((vo - model_b * uu).abs());
        let l1 = kx * (e1[0] * (u - x0) + e1[1] * v + e1[2] * al);
        let l2 = ky * (e2[0] * (u - x0) + e2[1] * v + e2[2] * al);
        first_order = first_order.max(l1.abs()).max(l2.abs());
    }
    let residual = (kx * r1.amax()).abs().max((ky * r2.amax()).abs());
    let delta = residual + first_order;
    let mut dets: Vec<f64> = match map.samples.iter().map(|s| s.det).collect::<Option<Vec<f64>>>() {
        Some(d) => d.into_iter().map(f64::abs).collect(),
        None => map.fd_determinants().into_iter().map(f64::abs).collect(),
    };
    let det_estimate = median(&mut dets);
    let [px, py] = map.centre;
    let chart = Chart {
        tx: px + x0 / su,
        ty: py + shear * x0 / su + y0 / sv,
        ty_a: kappa * sa / sv,
        a_centre: map.a_center,
        sx: kx * su,
        sy: ky * sv,
        shear,
    };
    Ok(RenormalizedFamily {
        n: map.n,
        chart,
        delta,
        fit_residual: residual,
        model_distance,
        det_estimate,
        a_map: ParamMap {
            centre: map.a_center,
            slope: a_slope * sa,
            offset: a_off,
        },
        normal_form: NormalForm {
            xi: xi * xp,
            theta: th * tp,
            gamma: gam * gp,
            q: y0 / sv,
            zeta: zeta / gp,
        },
        model_b,
        box_radius: rows.iter().map(|r| (kx * (r.0 - x0)).abs()).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionsReport {
    pub c1: bool,
    pub c2: bool,
    /// β'⁻ − a^(N).
    pub gap: f64,
    pub b_n: f64,
    pub c1_bound: f64,
    pub c2_bound: f64,
}

/// Relative slack for ties in the "≪" comparisons.
const TIE: f64 = 1e-12;

/// C1: 0 < gap ≤ margin·b⁴. C2: 0 < b_N ≤ margin·gap².
pub fn check_conditions(gap: f64, b: f64, b_n: f64, margin: f64) -> ConditionsReport {
    let c1_bound = margin * b.abs().powi(4);
    let c2_bound = margin * gap * gap;
    ConditionsReport {
        c1: gap > 0.0 && gap <= c1_bound * (1.0 + TIE),
        c2: b_n > 0.0 && gap > 0.0 && b_n <= c2_bound * (1.0 + TIE),
        gap,
        b_n,
        c1_bound,
        c2_bound,
    }
}

/// β'⁻ − a' for the renormalized restriction U ↦ U² + a'.
pub fn fold_gap(ar: f64) -> Result<f64> {
    let disc = 1.0 - 4.0 * ar;
    if disc < 0.0 {
        return Err(Error::NoFixedPoint);
    }
    let beta = 0.5 * (1.0 + disc.sqrt());
    Ok(-beta - ar)
}

pub fn conditions_c1_c2(rf: &RenormalizedFamily, a: f64, b: f64, margin: f64) -> Result<ConditionsReport> {
    let gap = fold_gap(rf.a_map.apply(a))?;
    Ok(check_conditions(gap, b, rf.det_estimate, margin))
}

/// Samples of an exact Hénon map (x² + a + y, bx) on a grid around (0, 0) at
/// parameters `a_values`: the model fitted to itself.
pub fn henon_samples(b: f64, a_values: &[f64], grid: usize, side: f64) -> SampledMap {
    let fam = HenonLikeFamily::henon(b);
    let g = grid.max(1);
    let lin = |k: usize| if g == 1 { 0.0 } else { -0.5 * side + side * k as f64 / (g - 1) as f64 };
    let mut samples = vec![];
    for &a in a_values {
        for i in 0..g {
            for j in 0..g {
                let p = [lin(j), lin(i)];
                let o = fam.eval(a, p);
                samples.push(ReturnSample {
                    dx: p[0],
                    dy: p[1],
                    da: a,
                    dx_out: o[0],
                    dy_out: o[1],
                    det: Some(fam.jacobian(a, p).determinant()),
                });
            }
        }
    }
    SampledMap {
        n: 0,
        steps: 1,
        centre: [0.0, 0.0],
        a_center: 0.0,
        pilot: PilotScales { xi: 1.0, gamma: 1.0, theta: 1.0, shear: 0.0 },
        grid: g,
        param_offsets: a_values.to_vec(),
        samples,
    }
}
