//! One-dimensional quadratic-like maps P(x) = x^2 + a + A(x, 0, a).

use serde::{Deserialize, Serialize};

use crate::cantor::IntervalCover;
use crate::error::{Error, Result};
use crate::maps::Poly;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnimodalMap {
    pub a: f64,
    #[serde(default)]
    pub perturb: Poly,
    /// Critical point of the unshifted map; internal coordinates are x - shift.
    pub shift: f64,
}

impl UnimodalMap {
    pub fn quadratic(a: f64) -> Self {
        UnimodalMap {
            a,
            perturb: Poly::default(),
            shift: 0.0,
        }
    }

    /// Locates the critical point by Newton on DP and records the shift.
    pub fn new(a: f64, perturb: Poly) -> Result<Self> {
        let mut m = UnimodalMap { a, perturb, shift: 0.0 };
        if m.perturb.is_empty() {
            return Ok(m);
        }
        let mut c = 0.0;
        for it in 0..60 {
            let d = m.raw_dp(c);
            let dd = 2.0 + m.perturb.dx_dx(c, a);
            let step = d / dd;
            c -= step;
            if step.abs() < 1e-15 {
                break;
            }
            if it == 59 {
                return Err(Error::NoConvergence { iterations: 60, residual: d.abs() });
            }
        }
        m.shift = c;
        Ok(m)
    }

    fn raw_p(&self, x: f64) -> f64 {
        x * x + self.a + self.perturb.eval(x, 0.0, self.a)
    }

    fn raw_dp(&self, x: f64) -> f64 {
        2.0 * x + self.perturb.dx(x, 0.0, self.a)
    }

    /// P in centred coordinates (critical point at 0).
    pub fn p(&self, x: f64) -> f64 {
        self.raw_p(x + self.shift) - self.shift
    }

    pub fn dp(&self, x: f64) -> f64 {
        self.raw_dp(x + self.shift)
    }

    pub fn critical_value(&self) -> f64 {
        self.p(0.0)
    }

    /// The two preimages of y, `(minus, plus)` with minus <= 0 <= plus.
    pub fn inverse_branches(&self, y: f64) -> Result<(f64, f64)> {
        let cv = self.critical_value();
        if y < cv {
            return Err(Error::BelowCriticalValue { y, critical: cv });
        }
        let r = (y - cv).sqrt();
        if self.perturb.is_empty() {
            return Ok((-r, r));
        }
        Ok((self.solve_branch(y, -r, -1.0)?, self.solve_branch(y, r, 1.0)?))
    }

    pub fn inverse(&self, y: f64, sign: f64) -> Result<f64> {
        let (m, p) = self.inverse_branches(y)?;
        Ok(if sign < 0.0 { m } else { p })
    }

    fn solve_branch(&self, y: f64, seed: f64, sign: f64) -> Result<f64> {
        let mut x = seed;
        for _ in 0..80 {
            let r = self.p(x) - y;
            if r.abs() < 1e-15 * (1.0 + y.abs()) {
                return Ok(x);
            }
            let d = self.dp(x);
            if d == 0.0 {
                break;
            }
            let mut nx = x - r / d;
            if nx * sign < 0.0 {
                nx = 0.5 * x;
            }
            x = nx;
        }
        let r = self.p(x) - y;
        if r.abs() < 1e-12 {
            Ok(x)
        } else {
            Err(Error::NoConvergence { iterations: 80, residual: r.abs() })
        }
    }

    /// Orientation-preserving fixed point, as the attracting point of P^{-1}_+.
    pub fn beta(&self) -> Result<f64> {
        let cv = self.critical_value();
        if self.perturb.is_empty() {
            let disc = 1.0 - 4.0 * cv;
            if disc < 0.0 {
                return Err(Error::NoFixedPoint);
            }
            return Ok(0.5 * (1.0 + disc.sqrt()));
        }
        let mut x = 2.0f64.max(cv.abs() + 1.0);
        for _ in 0..400 {
            let nx = self.inverse(x, 1.0)?;
            if (nx - x).abs() < 1e-16 {
                break;
            }
            x = nx;
        }
        // Newton polish of P(x) = x.
        for _ in 0..5 {
            let d = self.dp(x) - 1.0;
            x -= (self.p(x) - x) / d;
        }
        Ok(x)
    }

    /// Orientation-reversing fixed point α.
    pub fn alpha(&self) -> Result<f64> {
        let cv = self.critical_value();
        let disc = 1.0 - 4.0 * cv;
        if disc < 0.0 {
            return Err(Error::NoFixedPoint);
        }
        let mut x = 0.5 * (1.0 - disc.sqrt());
        if !self.perturb.is_empty() {
            for _ in 0..60 {
                let d = self.dp(x) - 1.0;
                let step = (self.p(x) - x) / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
        }
        Ok(x)
    }
}

trait SecondDerivative {
    fn dx_dx(&self, x: f64, a: f64) -> f64;
}

impl SecondDerivative for Poly {
    fn dx_dx(&self, x: f64, a: f64) -> f64 {
        self.terms
            .iter()
            .filter(|m| m.j == 0 && m.i >= 2)
            .map(|m| m.coeff * (m.i * (m.i - 1)) as f64 * x.powi(m.i as i32 - 2) * a.powi(m.k as i32))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaLadder {
    pub alpha_minus: Vec<f64>,
    pub alpha_plus: Vec<f64>,
    /// Index 0 holds α̃_1; `None` where the guard a < α_{n-1}^- fails.
    pub alpha_tilde_minus: Vec<Option<f64>>,
    pub alpha_tilde_plus: Vec<Option<f64>>,
    pub beta: f64,
    pub alpha_inf_minus: f64,
    pub alpha_inf_plus: f64,
    pub alpha_tilde_inf: Option<(f64, f64)>,
    /// First n at which the tilde guard failed, if any.
    pub guard_violated_at: Option<usize>,
}

impl AlphaLadder {
    pub fn tilde_minus(&self, n: usize) -> Option<f64> {
        self.alpha_tilde_minus.get(n.checked_sub(1)?).copied().flatten()
    }
    pub fn tilde_plus(&self, n: usize) -> Option<f64> {
        self.alpha_tilde_plus.get(n.checked_sub(1)?).copied().flatten()
    }
}

pub fn alpha_ladder(p: &UnimodalMap, n_max: usize) -> Result<AlphaLadder> {
    let alpha = p.alpha()?;
    let beta = p.beta()?;
    let cv = p.critical_value();
    let mut am = vec![alpha];
    let mut ap = vec![p.inverse(alpha, 1.0)?];
    for n in 1..=n_max {
        let (m, q) = p.inverse_branches(ap[n - 1])?;
        am.push(m);
        ap.push(q);
    }
    let mut tm = vec![Some(am[0])];
    let mut tp = vec![Some(ap[0])];
    let mut violated = None;
    for n in 2..=n_max.max(1) {
        if cv < am[n - 1] {
            let (m, q) = p.inverse_branches(am[n - 1])?;
            tm.push(Some(m));
            tp.push(Some(q));
        } else {
            violated.get_or_insert(n);
            tm.push(None);
            tp.push(None);
        }
    }
    let inf_minus = p.inverse(beta, -1.0)?;
    let tilde_inf = if cv < inf_minus {
        Some(p.inverse_branches(inf_minus)?)
    } else {
        None
    };
    Ok(AlphaLadder {
        alpha_minus: am,
        alpha_plus: ap,
        alpha_tilde_minus: tm,
        alpha_tilde_plus: tp,
        beta,
        alpha_inf_minus: inf_minus,
        alpha_inf_plus: beta,
        alpha_tilde_inf: tilde_inf,
        guard_violated_at: violated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CantorKind {
    C1,
    C2,
}

/// The two base intervals of C1 or C2.
pub fn base_intervals(p: &UnimodalMap, which: CantorKind) -> Result<[(f64, f64); 2]> {
    let cv = p.critical_value();
    match which {
        CantorKind::C1 => {
            let l = alpha_ladder(p, 2)?;
            if !(cv < l.alpha_minus[1]) {
                return Err(Error::GuardViolated(format!(
                    "C1 needs a < alpha_1^- ({} >= {})",
                    cv, l.alpha_minus[1]
                )));
            }
            let (tm, tp) = (l.tilde_minus(2).unwrap(), l.tilde_plus(2).unwrap());
            Ok([(l.alpha_minus[1], tm), (tp, l.alpha_plus[1])])
        }
        CantorKind::C2 => {
            let l = alpha_ladder(p, 0)?;
            let (tm, tp) = l.alpha_tilde_inf.ok_or_else(|| {
                Error::GuardViolated(format!("C2 needs a < alpha_inf^- ({} >= {})", cv, l.alpha_inf_minus))
            })?;
            Ok([(l.alpha_inf_minus, tm), (tp, l.alpha_inf_plus)])
        }
    }
}

/// Depth-k approximation of the maximal invariant set in the base intervals:
/// the components of B ∩ P^{-1}B ∩ ... ∩ P^{-k}B.
pub fn cantor_cover(p: &UnimodalMap, which: CantorKind, depth: usize) -> Result<IntervalCover> {
    let base = base_intervals(p, which)?;
    let mut level: Vec<(f64, f64)> = base.to_vec();
    for _ in 0..depth {
        level = pullback(p, &base, &level)?;
    }
    IntervalCover::new(level, depth)
}

/// One pullback step: preimages of `level` inside each monotone base branch.
pub fn pullback(p: &UnimodalMap, base: &[(f64, f64)], level: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(2 * level.len());
    for &(l, r) in base {
        let sign = if r <= 0.0 { -1.0 } else { 1.0 };
        let (pl, pr) = (p.p(l), p.p(r));
        let (lo, hi) = (pl.min(pr), pl.max(pr));
        for &(u, v) in level {
            let (u, v) = (u.max(lo), v.min(hi));
            if u > v {
                continue;
            }
            let (x1, x2) = (p.inverse(u, sign)?, p.inverse(v, sign)?);
            let (a, b) = (x1.min(x2).max(l), x1.max(x2).min(r));
            if a <= b {
                out.push((a, b));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
    Chebyshev,
}

/// Default number of Chebyshev-spaced samples per interval.
pub const EXPANSION_SAMPLES: usize = 64;

fn metric_density(metric: Metric, x: f64) -> Result<f64> {
    match metric {
        Metric::Euclidean => Ok(1.0),
        Metric::Chebyshev => {
            let d = 4.0 - x * x;
            if !(2.0 - x.abs() > 1e-6) {
                return Err(Error::MetricSingularity { x });
            }
            Ok(1.0 / d.sqrt())
        }
    }
}

/// Minimum of |DP(x)| g(P(x)) / g(x) over samples of the cover.
pub fn expansion_check(p: &UnimodalMap, cover: &IntervalCover, metric: Metric, samples: usize) -> Result<f64> {
    let mut min = f64::INFINITY;
    for &(l, r) in cover.intervals() {
        let mut xs = vec![l, r];
        for k in 0..samples {
            let t = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * samples) as f64).cos();
            xs.push(0.5 * (l + r) + 0.5 * (r - l) * t);
        }
        for x in xs {
            let gx = metric_density(metric, x)?;
            let px = p.p(x);
            let gp = metric_density(metric, px)?;
            min = min.min(p.dp(x).abs() * gp / gx);
        }
    }
    Ok(min)
}

/// Minimum of |D P^k| over samples of each depth-k interval.
pub fn iterate_expansion(p: &UnimodalMap, cover: &IntervalCover, k: usize, samples: usize) -> f64 {
    let mut min = f64::INFINITY;
    for &(l, r) in cover.intervals() {
        for s in 0..=samples {
            let mut x = l + (r - l) * s as f64 / samples as f64;
            let mut d = 1.0;
            for _ in 0..k {
                d *= p.dp(x).abs();
                x = p.p(x);
            }
            min = min.min(d);
        }
    }
    min
}
