//! Local invariant manifolds of saddles, signed tangency distance and
//! location of homoclinic tangencies.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{dist, norm, refine_periodic_orbit, HenonLikeFamily, PeriodicOrbit, PlanarMap, Point, NEWTON_TOL};
use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::cantor::{bridge_stops, IntervalCover, ThicknessReport};
use crate::numerics::{brent, lstsq};
use crate::unimodal::{base_intervals, CantorKind, UnimodalMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcOptions {
    /// Arclength grown along each branch.
    pub length: f64,
    /// Maximum distance between consecutive nodes.
    pub max_step: f64,
    /// Maximum turning angle between consecutive segments, degrees.
    pub max_turn_deg: f64,
    /// Size of the linearized seed segment.
    pub delta: f64,
    pub escape_radius: f64,
    pub max_nodes: usize,
}

impl Default for ArcOptions {
    fn default() -> Self {
        ArcOptions {
            length: 6.0,
            max_step: 0.02,
            max_turn_deg: 5.0,
            delta: 1e-7,
            escape_radius: 10.0,
            max_nodes: 200_000,
        }
    }
}

/// Quadratic graph y' = c0 + c1 x' + c2 x'^2 in the frame at `center` with
/// first axis `tangent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFit {
    pub center: Point,
    pub tangent: Point,
    pub coeffs: [f64; 3],
}

/// A two-branched local manifold: both polylines start at the saddle point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldArc {
    pub kind: ArcKind,
    pub saddle: Point,
    pub branches: [Vec<Point>; 2],
    /// Curve parameter of every node (0 at the saddle).
    pub params: [Vec<f64>; 2],
    pub arclength: [f64; 2],
    /// Set for the b = 0 stable set, built as a graph over x instead of by
    /// inverse iteration.
    pub degenerate: bool,
    pub fit: Option<GraphFit>,
}

impl ManifoldArc {
    pub fn nodes(&self) -> impl Iterator<Item = &Point> {
        self.branches[0].iter().chain(self.branches[1].iter())
    }
}

/// Exact parametrization of one branch: φ(s) = F^m(z + s |μ|^{-m} v), F = f^k
/// (or f^{-k}), with m chosen so the linear seed stays below `delta`.
#[derive(Clone, Copy)]
pub struct BranchParam<'m, M: PlanarMap + ?Sized> {
    map: &'m M,
    z: Point,
    v: Point,
    rate: f64,
    k: usize,
    forward: bool,
    delta: f64,
}

impl<M: PlanarMap + ?Sized> BranchParam<'_, M> {
    pub fn eval(&self, s: f64) -> Result<Point> {
        if s == 0.0 {
            return Ok(self.z);
        }
        let mut m = 0usize;
        let mut e = s;
        while e.abs() > self.delta && m < 400 {
            e /= self.rate;
            m += 1;
        }
        let mut p = [self.z[0] + e * self.v[0], self.z[1] + e * self.v[1]];
        for _ in 0..m * self.k {
            p = if self.forward { self.map.eval(p) } else { self.map.inverse(p)? };
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::OrbitEscaped { x: p[0], y: p[1] });
            }
        }
        Ok(p)
    }
}

fn eigenvector(m: &Matrix2<f64>, mu: f64) -> Point {
    let c1 = [m[(0, 1)], mu - m[(0, 0)]];
    let c2 = [mu - m[(1, 1)], m[(1, 0)]];
    let v = if norm(c1) >= norm(c2) { c1 } else { c2 };
    let n = norm(v);
    if n == 0.0 {
        // Diagonal case: pick the coordinate axis carrying mu.
        if (m[(0, 0)] - mu).abs() <= (m[(1, 1)] - mu).abs() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    } else {
        [v[0] / n, v[1] / n]
    }
}

/// Parametrizations of the two branches of the chosen manifold at
/// `saddle.points[index]`.
pub fn branch_params<'m, M: PlanarMap + ?Sized>(
    map: &'m M,
    saddle: &PeriodicOrbit,
    index: usize,
    kind: ArcKind,
    delta: f64,
) -> Result<[BranchParam<'m, M>; 2]> {
    if !saddle.is_saddle() {
        return Err(Error::NotASaddle);
    }
    let p = saddle.period;
    let z = saddle.points[index];
    let mut pts = Vec::with_capacity(p);
    let mut q = z;
    for _ in 0..p {
        pts.push(q);
        q = map.eval(q);
    }
    let prod = crate::maps::jacobian_product(map, &pts);
    let mu = match kind {
        ArcKind::Unstable => saddle.mult_unstable,
        ArcKind::Stable => saddle.mult_stable,
    };
    let v = eigenvector(&prod, mu);
    let (k, rate) = if mu < 0.0 { (2 * p, mu * mu) } else { (p, mu) };
    let rate = match kind {
        ArcKind::Unstable => rate,
        ArcKind::Stable => 1.0 / rate,
    };
    let mk = |sign: f64| BranchParam {
        map,
        z,
        v: [sign * v[0], sign * v[1]],
        rate,
        k,
        forward: kind == ArcKind::Unstable,
        delta,
    };
    Ok([mk(1.0), mk(-1.0)])
}

fn angle_deg(u: Point, v: Point) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    let c = ((u[0] * v[0] + u[1] * v[1]) / (nu * nv)).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

struct Grower<'a, M: PlanarMap + ?Sized> {
    param: &'a BranchParam<'a, M>,
    opts: &'a ArcOptions,
    nodes: Vec<Point>,
    params: Vec<f64>,
    length: f64,
    last_dir: Option<Point>,
}

impl<M: PlanarMap + ?Sized> Grower<'_, M> {
    fn push(&mut self, s: f64, p: Point) {
        let last = *self.nodes.last().unwrap();
        let seg = [p[0] - last[0], p[1] - last[1]];
        self.length += norm(seg);
        if norm(seg) > 0.0 {
            self.last_dir = Some(seg);
        }
        self.nodes.push(p);
        self.params.push(s);
    }

    fn refine(&mut self, sa: f64, sb: f64, pb: Point, depth: usize) {
        let pa = *self.nodes.last().unwrap();
        let seg = [pb[0] - pa[0], pb[1] - pa[1]];
        let resolvable = (sb - sa).abs() > 1e-13 * sb.abs().max(sa.abs());
        if resolvable && depth < 80 && self.nodes.len() < self.opts.max_nodes {
            let sm = 0.5 * (sa + sb);
            if let Ok(pm) = self.param.eval(sm) {
                // The midpoint catches folds hidden inside a single chord.
                let h1 = [pm[0] - pa[0], pm[1] - pa[1]];
                let h2 = [pb[0] - pm[0], pb[1] - pm[1]];
                let split = norm(seg) > self.opts.max_step
                    || self.last_dir.is_some_and(|d| angle_deg(d, seg) > self.opts.max_turn_deg)
                    || angle_deg(h1, h2) > self.opts.max_turn_deg;
                if split {
                    self.refine(sa, sm, pm, depth + 1);
                    self.refine(sm, sb, pb, depth + 1);
                    return;
                }
            }
        }
        self.push(sb, pb);
    }
}

fn grow_branch<M: PlanarMap + ?Sized>(param: &BranchParam<'_, M>, opts: &ArcOptions) -> (Vec<Point>, Vec<f64>, f64) {
    let mut g = Grower {
        param,
        opts,
        nodes: vec![param.z],
        params: vec![0.0],
        length: 0.0,
        last_dir: None,
    };
    let mut s = opts.delta;
    while g.length < opts.length && g.nodes.len() < opts.max_nodes {
        let p = match param.eval(s) {
            Ok(p) if norm(p) <= opts.escape_radius => p,
            _ => break,
        };
        let sa = *g.params.last().unwrap();
        g.refine(sa, s, p, 0);
        s *= 1.5;
    }
    (g.nodes, g.params, g.length)
}

/// Grow both branches of the stable or unstable manifold.
pub fn grow_arc<M: PlanarMap + ?Sized>(
    map: &M,
    saddle: &PeriodicOrbit,
    index: usize,
    kind: ArcKind,
    opts: &ArcOptions,
) -> Result<ManifoldArc> {
    let [b0, b1] = branch_params(map, saddle, index, kind, opts.delta)?;
    let (n0, s0, l0) = grow_branch(&b0, opts);
    let (n1, s1, l1) = grow_branch(&b1, opts);
    Ok(ManifoldArc {
        kind,
        saddle: saddle.points[index],
        branches: [n0, n1],
        params: [s0, s1],
        arclength: [l0, l1],
        degenerate: false,
        fit: None,
    })
}

/// Stable set of the orbit point at b = 0: the fiber {x^2 + a + y + A = x_next}
/// through the saddle, as a graph over x.
fn degenerate_stable_arc(family: &HenonLikeFamily, a: f64, saddle: &PeriodicOrbit, index: usize, opts: &ArcOptions) -> Result<ManifoldArc> {
    let z = saddle.points[index];
    let target = saddle.points[(index + 1) % saddle.period][0];
    let y_of = |x: f64| -> Result<f64> {
        // Solve family.eval(a, (x, y)).x = target for y by Newton.
        let mut y = target - x * x - a;
        for _ in 0..50 {
            let r = family.eval(a, [x, y])[0] - target;
            if r.abs() < 1e-15 {
                break;
            }
            y -= r / family.jacobian(a, [x, y])[(0, 1)];
        }
        let r = family.eval(a, [x, y])[0] - target;
        if r.abs() < 1e-12 {
            Ok(y)
        } else {
            Err(Error::InverseSolveFailed { x, y })
        }
    };
    let mut branches = [vec![z], vec![z]];
    let mut params = [vec![0.0], vec![0.0]];
    let mut lengths = [0.0, 0.0];
    for (bi, sign) in [1.0, -1.0].into_iter().enumerate() {
        let mut x = z[0];
        while lengths[bi] < opts.length && branches[bi].len() < opts.max_nodes {
            let last = *branches[bi].last().unwrap();
            let slope = family.jacobian(a, [x, last[1]]);
            // Step in x so that the chord stays below max_step.
            let dydx = -slope[(0, 0)] / slope[(0, 1)];
            let dx = opts.max_step / (1.0 + dydx * dydx).sqrt() * 0.9;
            x += sign * dx;
            let p = [x, y_of(x)?];
            if norm(p) > opts.escape_radius {
                break;
            }
            lengths[bi] += dist(p, last);
            branches[bi].push(p);
            params[bi].push(x - z[0]);
        }
    }
    Ok(ManifoldArc {
        kind: ArcKind::Stable,
        saddle: z,
        branches,
        params,
        arclength: lengths,
        degenerate: true,
        fit: None,
    })
}

/// Stable and unstable local manifolds of `saddle` (orbit point 0).
pub fn local_manifolds(family: &HenonLikeFamily, a: f64, saddle: &PeriodicOrbit, opts: &ArcOptions) -> Result<(ManifoldArc, ManifoldArc)> {
    if !saddle.is_saddle() {
        return Err(Error::NotASaddle);
    }
    let map = family.at(a);
    let unstable = grow_arc(&map, saddle, 0, ArcKind::Unstable, opts)?;
    let stable = if family.b == 0.0 {
        degenerate_stable_arc(family, a, saddle, 0, opts)?
    } else {
        grow_arc(&map, saddle, 0, ArcKind::Stable, opts)?
    };
    Ok((stable, unstable))
}

/// Golden-section minimization of `f` on [lo, hi].
fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if (hi - lo).abs() <= 1e-15 * (lo.abs() + hi.abs()) {
            break;
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Point on a branch closest to `p`, refined on the exact parametrization.
/// Returns (foot, unit tangent, node index).
fn closest_on_branch<M: PlanarMap + ?Sized>(
    param: &BranchParam<'_, M>,
    nodes: &[Point],
    params: &[f64],
    p: Point,
) -> Option<(Point, Point, usize)> {
    let (j, _) = nodes
        .iter()
        .enumerate()
        .map(|(i, q)| (i, dist(*q, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    if j == 0 || j + 1 >= nodes.len() {
        return None;
    }
    let (lo, hi) = (params[j - 1], params[j + 1]);
    let (s, _) = golden_min(|s| param.eval(s).map_or(f64::INFINITY, |q| dist(q, p)), lo, hi, 200);
    let foot = param.eval(s).ok()?;
    let h = 1e-6 * (hi - lo);
    let (qa, qb) = (param.eval(s - h).ok()?, param.eval(s + h).ok()?);
    let t = [qb[0] - qa[0], qb[1] - qa[1]];
    let n = norm(t);
    if n == 0.0 {
        return None;
    }
    Some((foot, [t[0] / n, t[1] / n], j))
}

fn signed_offset(foot: Point, tangent: Point, p: Point) -> f64 {
    let d = [p[0] - foot[0], p[1] - foot[1]];
    tangent[0] * d[1] - tangent[1] * d[0]
}

fn polyline_offset(nodes: &[Point], p: Point) -> Option<(f64, usize)> {
    let mut best: Option<(f64, f64, usize)> = None;
    for j in 0..nodes.len().saturating_sub(1) {
        let (a, b) = (nodes[j], nodes[j + 1]);
        let t = [b[0] - a[0], b[1] - a[1]];
        let tt = t[0] * t[0] + t[1] * t[1];
        if tt == 0.0 {
            continue;
        }
        let u = (((p[0] - a[0]) * t[0] + (p[1] - a[1]) * t[1]) / tt).clamp(0.0, 1.0);
        let q = [a[0] + u * t[0], a[1] + u * t[1]];
        let d = dist(p, q);
        if best.is_none_or(|bb| d < bb.0) {
            let l = tt.sqrt();
            best = Some((d, signed_offset(q, [t[0] / l, t[1] / l], p), j));
        }
    }
    best.map(|b| (b.1, b.2))
}

/// Fold of the unstable arc relative to the stable arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldProbe {
    /// Offset of the fold vertex times the sign of the fold coefficient:
    /// positive when the fold does not reach the stable arc.
    pub distance: f64,
    /// Half the second derivative of the unstable arc as a graph over the
    /// stable arc's tangent line.
    pub xi: f64,
    pub vertex: Point,
    pub foot: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyOptions {
    pub unstable: ArcOptions,
    pub stable: ArcOptions,
    /// Fold vertices farther than this from the stable arc are ignored.
    pub near: f64,
    /// Nodes within this distance of the saddle are not fold candidates.
    pub exclude_saddle: f64,
    pub root_tol: f64,
    pub tol_xi: f64,
    pub tol_speed: f64,
    pub speed_step: f64,
    /// At b = 0, also accept stable leaves through preimages of the orbit up
    /// to this depth (0 keeps only the local leaves through orbit points).
    pub stable_preimages: usize,
}

impl Default for TangencyOptions {
    fn default() -> Self {
        TangencyOptions {
            unstable: ArcOptions { length: 6.0, ..ArcOptions::default() },
            stable: ArcOptions { length: 12.0, ..ArcOptions::default() },
            near: 0.2,
            exclude_saddle: 0.1,
            root_tol: 1e-12,
            tol_xi: 1e-3,
            tol_speed: 1e-3,
            speed_step: 1e-6,
            stable_preimages: 0,
        }
    }
}

fn fold_of_arcs<M: PlanarMap + ?Sized>(map: &M, saddle: &PeriodicOrbit, opts: &TangencyOptions) -> Result<FoldProbe> {
    let up = branch_params(map, saddle, 0, ArcKind::Unstable, opts.unstable.delta)?;
    let sp = branch_params(map, saddle, 0, ArcKind::Stable, opts.stable.delta)?;
    let stable: Vec<_> = sp.iter().map(|p| grow_branch(p, &opts.stable)).collect();
    let z = saddle.points[0];
    let mut best: Option<FoldProbe> = None;
    for upar in &up {
        let (un, us, _) = grow_branch(upar, &opts.unstable);
        for (si, (sn, ss, _)) in stable.iter().enumerate() {
            let spar = &sp[si];
            let offs: Vec<Option<(f64, usize)>> = un
                .iter()
                .map(|&p| if dist(p, z) < opts.exclude_saddle { None } else { polyline_offset(sn, p) })
                .collect();
            // Extrema of the offset along the arc: sign changes of the nonzero
            // increments. Plateaus of numerically coincident nodes at very
            // sharp folds are bracketed as a whole.
            let mut candidates = vec![];
            let mut prev: Option<(f64, usize)> = None;
            for i in 1..un.len() {
                let (Some((oa, _)), Some((ob, _))) = (offs[i - 1], offs[i]) else {
                    prev = None;
                    continue;
                };
                let inc = ob - oa;
                if inc == 0.0 {
                    continue;
                }
                if let Some((ps, start)) = prev {
                    if ps != inc.signum() {
                        candidates.push((start, i, ps > 0.0));
                    }
                }
                prev = Some((inc.signum(), i - 1));
            }
            for (start, end, is_max) in candidates {
                let Some((o1, j)) = offs[end - 1] else { continue };
                if o1.abs() > opts.near || j == 0 || j + 2 >= sn.len() {
                    continue;
                }
                let sgn = if is_max { -1.0 } else { 1.0 };
                let lo = us[start.max(1)];
                let hi = us[end.min(us.len() - 1)];
                let exact = |s: f64| -> Option<(f64, Point, Point, Point)> {
                    let p = upar.eval(s).ok()?;
                    let (foot, t, _) = closest_on_branch(spar, sn, ss, p)?;
                    Some((signed_offset(foot, t, p), p, foot, t))
                };
                let (sv, _) = golden_min(|s| exact(s).map_or(f64::INFINITY, |e| sgn * e.0), lo, hi, 200);
                let Some((c, vertex, foot, t)) = exact(sv) else { continue };
                // Fold coefficient from seven samples spanning the vertex. The
                // window shrinks until the samples form a graph over the stable
                // tangent within the quadratic regime.
                let mut ds = (hi - lo) / 6.0;
                let mut xi = f64::NAN;
                for _ in 0..120 {
                    if ds.abs() <= 1e-15 * sv.abs() {
                        break;
                    }
                    let pts: Vec<(f64, f64)> = (-3..=3)
                        .filter_map(|k| upar.eval(sv + k as f64 * ds).ok())
                        .map(|p| {
                            let d = [p[0] - foot[0], p[1] - foot[1]];
                            (t[0] * d[0] + t[1] * d[1], t[0] * d[1] - t[1] * d[0])
                        })
                        .collect();
                    if pts.len() < 7 {
                        ds *= 0.5;
                        continue;
                    }
                    let up = pts.windows(2).all(|w| w[1].0 > w[0].0);
                    let down = pts.windows(2).all(|w| w[1].0 < w[0].0);
                    let design = nalgebra::DMatrix::from_fn(7, 3, |r, col| (pts[r].0 - pts[3].0).powi(col as i32));
                    let rhs = nalgebra::DVector::from_iterator(7, pts.iter().map(|q| q.1));
                    let fit = lstsq(&design, &rhs).ok();
                    if let (true, Some((coef, _))) = (up || down, fit) {
                        let span = pts.iter().map(|q| (q.0 - pts[3].0).abs()).fold(0.0, f64::max);
                        if span * coef[2].abs() < 0.05 {
                            xi = coef[2];
                            break;
                        }
                    }
                    ds *= 0.5;
                }
                if !xi.is_finite() {
                    continue;
                }
                let probe = FoldProbe {
                    distance: c * xi.signum(),
                    xi,
                    vertex,
                    foot,
                };
                if best.as_ref().is_none_or(|b| c.abs() < b.distance.abs()) {
                    best = Some(probe);
                }
            }
        }
    }
    best.ok_or(Error::NoFoldDetected)
}

/// Critical point and value of the b = 0 one-dimensional map x -> f(x, 0).x.
pub(crate) fn critical_point(family: &HenonLikeFamily, a: f64) -> (f64, f64) {
    let mut c = 0.0;
    for _ in 0..60 {
        let d = family.jacobian(a, [c, 0.0])[(0, 0)];
        let h = 1e-5;
        let dd = (family.jacobian(a, [c + h, 0.0])[(0, 0)] - family.jacobian(a, [c - h, 0.0])[(0, 0)]) / (2.0 * h);
        let step = d / dd;
        c -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let h = 1e-4;
    let p = |x: f64| family.eval(a, [x, 0.0])[0];
    let second = (p(c + h) - 2.0 * p(c) + p(c - h)) / (h * h);
    (c, 0.5 * second)
}

fn saddle_at(family: &HenonLikeFamily, a: f64, saddle: &PeriodicOrbit) -> Result<PeriodicOrbit> {
    let o = refine_periodic_orbit(&family.at(a), saddle.points.clone(), NEWTON_TOL)?;
    if !o.is_saddle() {
        return Err(Error::NotASaddle);
    }
    Ok(o)
}

/// Values w such that {P(x) + y = w} is a stable leaf of the orbit at b = 0:
/// the orbit itself and its one-dimensional preimages up to `depth`.
fn stable_leaf_values(family: &HenonLikeFamily, a: f64, orbit: &PeriodicOrbit, depth: usize) -> Vec<f64> {
    let mut level: Vec<f64> = orbit.points.iter().map(|p| p[0]).collect();
    let mut all = level.clone();
    let Ok(p) = UnimodalMap::new(a, family.perturb_a.clone()) else {
        return all;
    };
    for _ in 0..depth {
        let mut next = vec![];
        for &w in &level {
            if let Ok((m, q)) = p.inverse_branches(w - p.shift) {
                for u in [m + p.shift, q + p.shift] {
                    if !all.iter().any(|&x| (x - u).abs() < 1e-12) {
                        next.push(u);
                    }
                }
            }
        }
        all.extend(&next);
        level = next;
    }
    all
}

/// Signed distance between the unstable fold and the stable arc. At b = 0
/// this is the one-dimensional reduction w − P²(c), with w the stable-leaf
/// value (an orbit point, or a preimage of one) nearest the second iterate of
/// the critical point c.
pub fn tangency_distance(family: &HenonLikeFamily, a: f64, saddle: &PeriodicOrbit, opts: &TangencyOptions) -> Result<FoldProbe> {
    let o = saddle_at(family, a, saddle)?;
    if family.b == 0.0 {
        let (c, xi) = critical_point(family, a);
        let v = family.eval(a, [c, 0.0]);
        let v2 = family.eval(a, v);
        let leaves = stable_leaf_values(family, a, &o, opts.stable_preimages);
        let w = leaves
            .iter()
            .min_by(|p, q| (*p - v2[0]).abs().total_cmp(&(*q - v2[0]).abs()))
            .copied()
            .unwrap();
        return Ok(FoldProbe {
            distance: w - v2[0],
            xi,
            vertex: v,
            foot: [v[0], 0.0],
        });
    }
    fold_of_arcs(&family.at(a), &o, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyRecord {
    pub a_star: f64,
    pub point: Point,
    pub xi_hat: f64,
    pub speed_hat: f64,
    pub nondegenerate: bool,
    /// Signed distance left at a_star.
    pub residual: f64,
    pub saddle: PeriodicOrbit,
}

pub fn find_tangency(family: &HenonLikeFamily, a_range: (f64, f64), saddle: &PeriodicOrbit, opts: &TangencyOptions) -> Result<TangencyRecord> {
    let (lo, hi) = a_range;
    let d = |a: f64| tangency_distance(family, a, saddle, opts).map(|p| p.distance);
    let (dlo, dhi) = (d(lo)?, d(hi)?);
    if dlo.signum() == dhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut failure = None;
    let a_star = brent(
        |a| match d(a) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        opts.root_tol,
        200,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let probe = tangency_distance(family, a_star, saddle, opts)?;
    let h = opts.speed_step;
    let speed_hat = (d(a_star + h)? - d(a_star - h)?) / (2.0 * h);
    if probe.xi.abs() <= opts.tol_xi {
        return Err(Error::FitDegenerate { xi: probe.xi });
    }
    Ok(TangencyRecord {
        a_star,
        point: probe.vertex,
        xi_hat: probe.xi,
        speed_hat,
        nondegenerate: probe.xi.abs() > opts.tol_xi && speed_hat.abs() > opts.tol_speed,
        residual: probe.distance,
        saddle: saddle_at(family, a_star, saddle)?,
    })
}

/// Polyline of a two-branched arc ordered from the end of branch 1 through the
/// saddle to the end of branch 0, with cumulative arclength.
fn arc_polyline(arc: &ManifoldArc) -> (Vec<Point>, Vec<f64>) {
    let mut pts: Vec<Point> = arc.branches[1].iter().rev().copied().collect();
    pts.extend(arc.branches[0].iter().skip(1));
    let mut t = vec![0.0];
    for w in pts.windows(2) {
        t.push(t.last().unwrap() + dist(w[0], w[1]));
    }
    (pts, t)
}

/// Widening of the base intervals, in units of |b|.
pub const SLICE_MARGIN: f64 = 4.0;

/// Samples per interval when resolving the next lamination level.
pub const SLICE_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceThickness {
    /// Which lamination was sliced: the stable one for an unstable transversal
    /// and vice versa.
    pub lamination: ArcKind,
    pub intervals: usize,
    /// The slice rounded to double precision; None when rounding merges
    /// intervals that are distinct in extended precision.
    pub cover: Option<IntervalCover>,
    pub report: ThicknessReport,
}

/// Thickness of the finite-depth horseshoe lamination cut by a transversal,
/// in arclength coordinates along the transversal.
///
/// The base region is the pair of base intervals of the one-dimensional
/// restriction, widened by SLICE_MARGIN·|b|, times |y| ≤ 2.5|b|; a transversal point belongs to the depth-k
/// slice if its forward (stable lamination) or backward (unstable lamination)
/// orbit stays in the base region for k steps.
pub fn slice_thickness(
    family: &HenonLikeFamily,
    a: f64,
    horseshoe: CantorKind,
    transversal: &ManifoldArc,
    depth: usize,
) -> Result<SliceThickness> {
    let p = UnimodalMap::new(a, family.perturb_a.clone())?;
    let base = base_intervals(&p, horseshoe)?;
    // Boundary points of the one-dimensional set are themselves in the set and
    // move by O(b) under continuation, so the region is widened by that much.
    let margin = SLICE_MARGIN * family.b.abs();
    let base: Vec<(f64, f64)> = base.iter().map(|&(l, r)| (l + p.shift - margin, r + p.shift + margin)).collect();
    let y_max = 2.5 * family.b.abs() + 1e-12;
    let lamination = match transversal.kind {
        ArcKind::Unstable => ArcKind::Stable,
        ArcKind::Stable => ArcKind::Unstable,
    };
    let in_region = |z: Point| z[1].abs() <= y_max && base.iter().any(|&(l, r)| z[0] >= l && z[0] <= r);
    let map = family.at(a);
    let pure = family.is_pure();
    let (a2, b2) = (TwoFloat::from(a), TwoFloat::from(family.b));
    // Leaves at depth k sit b^k apart, far below double resolution along the
    // transversal, so positions and pure Hénon orbits are carried in
    // double-double arithmetic.
    let step = |z: Dd2| -> Option<Dd2> {
        if pure {
            return Some(match lamination {
                ArcKind::Stable => [z[0] * z[0] + a2 + z[1], b2 * z[0]],
                ArcKind::Unstable => {
                    if family.b == 0.0 {
                        return None;
                    }
                    let x = z[1] / b2;
                    [x, z[0] - x * x - a2]
                }
            });
        }
        let w = [z[0].hi(), z[1].hi()];
        let w = match lamination {
            ArcKind::Stable => map.eval(w),
            ArcKind::Unstable => map.inverse(w).ok()?,
        };
        Some([TwoFloat::from(w[0]), TwoFloat::from(w[1])])
    };
    let member = |z: Dd2, level: usize| -> bool {
        let mut z = z;
        for i in 0..=level {
            if !in_region([z[0].hi(), z[1].hi()]) {
                return false;
            }
            if i < level {
                z = match step(z) {
                    Some(w) => w,
                    None => return false,
                };
            }
        }
        true
    };
    let (pts, t) = arc_polyline(transversal);
    let at = |s: TwoFloat| -> Dd2 {
        let k = t.partition_point(|&v| TwoFloat::from(v) <= s).clamp(1, pts.len() - 1);
        let (t0, t1) = (t[k - 1], t[k]);
        let u = if t1 > t0 { (s - t0) / (t1 - t0) } else { TwoFloat::from(0.0) };
        let (p0, p1) = (pts[k - 1], pts[k]);
        [u * (p1[0] - p0[0]) + p0[0], u * (p1[1] - p0[1]) + p0[1]]
    };
    let total = TwoFloat::from(*t.last().unwrap());
    let mut level: Vec<(TwoFloat, TwoFloat)> = vec![(TwoFloat::from(0.0), total)];
    for k in 0..=depth {
        let next: Vec<Vec<(TwoFloat, TwoFloat)>> = level
            .par_iter()
            .map(|&(lo, hi)| {
                let mut next = vec![];
                let n = SLICE_SAMPLES;
                let s_of = |i: usize| lo + (hi - lo) * (i as f64 / n as f64);
                let ok: Vec<bool> = (0..=n).map(|i| member(at(s_of(i)), k)).collect();
                // Bisect a boundary between samples i and i + 1.
                let edge = |i: usize| -> TwoFloat {
                    let (mut l, mut r) = (s_of(i), s_of(i + 1));
                    let vl = ok[i];
                    for _ in 0..SLICE_BISECTIONS {
                        let m = (l + r) * 0.5;
                        if m <= l || m >= r {
                            break;
                        }
                        if member(at(m), k) == vl {
                            l = m;
                        } else {
                            r = m;
                        }
                    }
                    (l + r) * 0.5
                };
                let mut start = if ok[0] { Some(lo) } else { None };
                for i in 0..n {
                    match (ok[i], ok[i + 1]) {
                        (false, true) => start = Some(edge(i)),
                        (true, false) => {
                            let e = edge(i);
                            if let Some(s0) = start.take() {
                                if e > s0 {
                                    next.push((s0, e));
                                }
                            }
                        }
                        _ => {}
                    }
                }
                if let Some(s0) = start {
                    if hi > s0 {
                        next.push((s0, hi));
                    }
                }
                next
            })
            .collect();
        level = next.into_iter().flatten().collect();
        if level.is_empty() {
            break;
        }
    }
    if level.len() < 4 {
        return Err(Error::TooFewIntersections(level.len()));
    }
    let report = dd_thickness(&level, depth);
    let rounded: Vec<(f64, f64)> = level.iter().map(|&(l, r)| (l.hi(), r.hi())).collect();
    let cover = IntervalCover::new(rounded, depth).ok();
    Ok(SliceThickness { lamination, intervals: level.len(), cover, report })
}

type Dd2 = [TwoFloat; 2];

/// Bisection steps per boundary; enough to exhaust double-double precision.
pub const SLICE_BISECTIONS: usize = 120;

/// Thickness of sorted disjoint intervals given in double-double positions.
/// Gap and bridge lengths are differences of nearby positions and so are
/// accurate in double precision; endpoints are reported rounded.
fn dd_thickness(iv: &[(TwoFloat, TwoFloat)], depth: usize) -> ThicknessReport {
    let n = iv.len() - 1;
    let g: Vec<f64> = (0..n).map(|i| (iv[i + 1].0 - iv[i].1).hi()).collect();
    let (left_stop, right_stop) = bridge_stops(&g);
    let (h0, h1) = (iv[0].0, iv[n].1);
    let mut per = Vec::with_capacity(2 * n);
    let mut best: Option<(f64, (f64, f64), (f64, f64))> = None;
    let mut consider = |end: TwoFloat, r: f64, gap: (f64, f64), bridge: (f64, f64)| {
        per.push((end.hi(), r));
        if best.is_none_or(|b| r < b.0) {
            best = Some((r, gap, bridge));
        }
    };
    for i in 0..n {
        let (g0, g1) = (iv[i].1, iv[i + 1].0);
        let gap = (g0.hi(), g1.hi());
        let left_end = left_stop[i].map_or(h0, |j| iv[j + 1].0);
        let right_end = right_stop[i].map_or(h1, |j| iv[j].1);
        consider(g0, (g0 - left_end).hi() / g[i], gap, (left_end.hi(), g0.hi()));
        consider(g1, (right_end - g1).hi() / g[i], gap, (g1.hi(), right_end.hi()));
    }
    ThicknessReport {
        tau: best.map_or(f64::INFINITY, |b| b.0),
        witness_gap: best.map(|b| b.1),
        witness_bridge: best.map(|b| b.2),
        per_endpoint: per,
        depth,
    }
}
