//! Finite interval covers of Cantor sets: thickness, the gap lemma, and
//! dimension estimators.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::numerics::linear_fit;

/// Relative tolerance under which two gaps count as equally long.
pub const GAP_TIE_TOL: f64 = 1e-12;

/// Sorted, pairwise disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCover {
    intervals: Vec<(f64, f64)>,
    pub depth: usize,
}

impl IntervalCover {
    pub fn new(intervals: Vec<(f64, f64)>, depth: usize) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidCover("empty cover".into()));
        }
        for (i, &(l, r)) in intervals.iter().enumerate() {
            if !(l.is_finite() && r.is_finite()) || r < l {
                return Err(Error::InvalidCover(format!("bad interval [{l}, {r}]")));
            }
            if i > 0 && !(intervals[i - 1].1 < l) {
                return Err(Error::InvalidCover(format!("intervals {} and {} not disjoint and sorted", i - 1, i)));
            }
        }
        Ok(IntervalCover { intervals, depth })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.intervals[0].0, self.intervals[self.intervals.len() - 1].1)
    }

    pub fn gaps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.intervals.windows(2).map(|w| (w[0].1, w[1].0))
    }

    /// Image under x -> slope * x + offset (slope != 0).
    pub fn affine_image(&self, slope: f64, offset: f64) -> Result<Self> {
        if slope == 0.0 {
            return Err(Error::InvalidParams("affine slope must be nonzero".into()));
        }
        let mut iv: Vec<(f64, f64)> = self
            .intervals
            .iter()
            .map(|&(l, r)| {
                let (u, v) = (slope * l + offset, slope * r + offset);
                (u.min(v), u.max(v))
            })
            .collect();
        if slope < 0.0 {
            iv.reverse();
        }
        IntervalCover::new(iv, self.depth)
    }

    /// True if some interval of `self` meets some interval of `other`.
    pub fn overlaps(&self, other: &IntervalCover) -> bool {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.intervals, &other.intervals);
        while i < a.len() && j < b.len() {
            if a[i].1 < b[j].0 {
                i += 1;
            } else if b[j].1 < a[i].0 {
                j += 1;
            } else {
                return true;
            }
        }
        false
    }

    /// The bounded gap of `self` containing [lo, hi], if any.
    pub fn gap_containing(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.gaps().find(|&(gl, gr)| gl < lo && hi < gr)
    }
}

/// Two-branch affine cover on [lo, hi]: each interval is replaced by its
/// leftmost and rightmost sub-intervals of relative length `ratio`.
pub fn affine_cover(ratio: f64, lo: f64, hi: f64, depth: usize) -> Result<IntervalCover> {
    if !(ratio > 0.0 && ratio < 0.5) || !(hi > lo) {
        return Err(Error::InvalidParams(format!("ratio {ratio} on [{lo}, {hi}]")));
    }
    let mut level = vec![(lo, hi)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * 2);
        for &(l, r) in &level {
            let w = ratio * (r - l);
            next.push((l, l + w));
            next.push((r - w, r));
        }
        level = next;
    }
    IntervalCover::new(level, depth)
}

/// Middle-thirds cover on [lo, lo + len]. Endpoints are formed from exact
/// integer numerators over 3^depth, so each is correctly rounded.
pub fn middle_thirds(lo: f64, len: f64, depth: usize) -> IntervalCover {
    let scale = 3u64.pow(depth as u32);
    let mut lefts = vec![0u64];
    for d in 0..depth {
        let step = 2 * 3u64.pow((depth - d - 1) as u32);
        lefts = lefts.iter().flat_map(|&l| [l, l + step]).collect();
    }
    let s = scale as f64;
    let iv = lefts
        .into_iter()
        .map(|l| (lo + (len * l as f64) / s, lo + (len * (l + 1) as f64) / s))
        .collect();
    IntervalCover::new(iv, depth).expect("middle thirds is a valid cover")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bridge {
    /// Boundary point u of the gap.
    pub endpoint: f64,
    pub gap: (f64, f64),
    pub bridge: (f64, f64),
}

impl Bridge {
    pub fn ratio(&self) -> f64 {
        (self.bridge.1 - self.bridge.0) / (self.gap.1 - self.gap.0)
    }
}

fn longer(g: f64, than: f64) -> bool {
    g > than * (1.0 + GAP_TIE_TOL)
}

/// For every boundary point of every bounded gap, its bridge. Runs in O(n)
/// with two monotonic stacks (nearest strictly longer gap on each side).
pub fn gaps_and_bridges(cover: &IntervalCover) -> Vec<Bridge> {
    let iv = cover.intervals();
    let n = iv.len().saturating_sub(1);
    let g: Vec<f64> = (0..n).map(|i| iv[i + 1].0 - iv[i].1).collect();
    let (left_stop, right_stop) = bridge_stops(&g);
    let (h0, h1) = cover.hull();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let gap = (iv[i].1, iv[i + 1].0);
        let left_end = left_stop[i].map_or(h0, |j| iv[j + 1].0);
        let right_end = right_stop[i].map_or(h1, |j| iv[j].1);
        out.push(Bridge {
            endpoint: gap.0,
            gap,
            bridge: (left_end, gap.0),
        });
        out.push(Bridge {
            endpoint: gap.1,
            gap,
            bridge: (gap.1, right_end),
        });
    }
    out
}

/// Index of the nearest strictly longer gap on each side of every gap.
pub(crate) fn bridge_stops(g: &[f64]) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let n = g.len();
    let mut left_stop = vec![None; n];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..n {
        while let Some(&t) = stack.last() {
            if longer(g[t], g[i]) {
                break;
            }
            stack.pop();
        }
        left_stop[i] = stack.last().copied();
        stack.push(i);
    }
    let mut right_stop = vec![None; n];
    stack.clear();
    for i in (0..n).rev() {
        while let Some(&t) = stack.last() {
            if longer(g[t], g[i]) {
                break;
            }
            stack.pop();
        }
        right_stop[i] = stack.last().copied();
        stack.push(i);
    }
    (left_stop, right_stop)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessReport {
    /// +∞ when there is no bounded gap.
    pub tau: f64,
    pub witness_gap: Option<(f64, f64)>,
    pub witness_bridge: Option<(f64, f64)>,
    /// (u, τ(K, u)) for every gap boundary point, left to right.
    pub per_endpoint: Vec<(f64, f64)>,
    pub depth: usize,
}

pub fn thickness(cover: &IntervalCover) -> ThicknessReport {
    let bridges = gaps_and_bridges(cover);
    let mut best: Option<&Bridge> = None;
    let mut per = Vec::with_capacity(bridges.len());
    for b in &bridges {
        let r = b.ratio();
        per.push((b.endpoint, r));
        if best.is_none_or(|w| r < w.ratio()) {
            best = Some(b);
        }
    }
    ThicknessReport {
        tau: best.map_or(f64::INFINITY, |b| b.ratio()),
        witness_gap: best.map(|b| b.gap),
        witness_bridge: best.map(|b| b.bridge),
        per_endpoint: per,
        depth: cover.depth,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapVerdict {
    Intersect,
    K1InGapOfK2,
    K2InGapOfK1,
    HypothesisFails,
    DisjointHulls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapLemmaReport {
    pub verdict: GapVerdict,
    pub tau_product: f64,
    /// Whether the interval covers overlap at the depth given.
    pub overlap: bool,
}

pub fn gap_lemma(k1: &IntervalCover, k2: &IntervalCover) -> GapLemmaReport {
    let tau_product = thickness(k1).tau * thickness(k2).tau;
    let overlap = k1.overlaps(k2);
    let (a0, a1) = k1.hull();
    let (b0, b1) = k2.hull();
    let verdict = if !(tau_product > 1.0 + GAP_TIE_TOL) {
        GapVerdict::HypothesisFails
    } else if a1 < b0 || b1 < a0 {
        GapVerdict::DisjointHulls
    } else if k2.gap_containing(a0, a1).is_some() {
        GapVerdict::K1InGapOfK2
    } else if k1.gap_containing(b0, b1).is_some() {
        GapVerdict::K2InGapOfK1
    } else {
        GapVerdict::Intersect
    };
    GapLemmaReport {
        verdict,
        tau_product,
        overlap,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub method: String,
    pub value: f64,
    pub diagnostics: serde_json::Value,
}

/// Minimal number of closed intervals of length `eps` covering the cover.
/// In one dimension the greedy left-to-right sweep is optimal.
pub fn covering_number(cover: &IntervalCover, eps: f64) -> u64 {
    let mut count = 0u64;
    let mut reach = f64::NEG_INFINITY;
    for &(l, r) in cover.intervals() {
        if r <= reach {
            continue;
        }
        let start = if l > reach { l } else { reach };
        let mut k = if r > start { ((r - start) / eps - 1e-12).ceil() as u64 } else { 0 };
        if l > reach {
            k = k.max(1);
        }
        count += k;
        reach = start + k as f64 * eps;
    }
    count
}

/// Box-counting slope over a dyadic ladder ε_j = S 2^{-j}, using the deepest
/// cover. Counts are minimal ε-coverings rather than fixed-grid boxes, which
/// removes the lattice bias of a dyadic grid on non-dyadic sets. The ladder
/// stops where ε reaches the cover's resolution (its longest interval);
/// exact covers (points, one interval) go to j = 20.
pub fn box_dimension(covers: &[IntervalCover]) -> Result<DimensionEstimate> {
    let cover = covers
        .iter()
        .max_by_key(|c| c.depth)
        .ok_or(Error::InsufficientRange { needed: 4, got: 0 })?;
    let (h0, h1) = cover.hull();
    let scale = if h1 > h0 { h1 - h0 } else { 1.0 };
    let resolution = if cover.len() > 1 {
        cover.intervals().iter().map(|&(l, r)| r - l).fold(0.0, f64::max)
    } else {
        0.0
    };
    let j_max = if resolution > 0.0 {
        ((scale / resolution).log2().floor() as i64).min(40)
    } else {
        20
    };
    let mut xs = vec![];
    let mut ys = vec![];
    let mut counts = vec![];
    for j in 1..=j_max.max(0) {
        let eps = scale / (1u64 << j) as f64;
        let n = covering_number(cover, eps);
        xs.push((1.0 / eps).ln());
        ys.push((n as f64).ln());
        counts.push((eps, n));
    }
    if xs.len() < 4 {
        return Err(Error::InsufficientRange { needed: 4, got: xs.len() });
    }
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok(DimensionEstimate {
        method: "box_counting_min_cover".into(),
        value: slope,
        diagnostics: json!({
            "r2": r2,
            "eps_max": counts[0].0,
            "eps_min": counts[counts.len() - 1].0,
            "depth": cover.depth,
            "counts": counts,
        }),
    })
}

/// Per-level multiplicity and gap bounds, stored as logarithms so that
/// super-exponential schedules stay representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorSchedule {
    pub log_m: Vec<f64>,
    pub log_eps: Vec<f64>,
}

impl CantorSchedule {
    pub fn new(m: &[f64], eps: &[f64]) -> Result<Self> {
        let s = CantorSchedule {
            log_m: m.iter().map(|v| v.ln()).collect(),
            log_eps: eps.iter().map(|v| v.ln()).collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn levels(&self) -> usize {
        self.log_m.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.log_m.len() != self.log_eps.len() {
            return Err(Error::InvalidSchedule("m and eps lengths differ".into()));
        }
        for (l, (&lm, &le)) in self.log_m.iter().zip(&self.log_eps).enumerate() {
            if !(lm >= -1e-12) || lm.is_nan() {
                return Err(Error::InvalidSchedule(format!("m < 1 at level {}", l + 1)));
            }
            if !le.is_finite() {
                return Err(Error::InvalidSchedule(format!("eps not positive at level {}", l + 1)));
            }
            if l > 0 && !(le < self.log_eps[l - 1]) {
                return Err(Error::InvalidSchedule(format!("eps not decreasing at level {}", l + 1)));
            }
        }
        Ok(())
    }

    /// The construction's formula schedule: n_l = 2^{c 2^l},
    /// ε_l = D' Λ^{-α n_l}, m_l = C'' Λ^{-n_{l-1} + α n_l}, l = 1..levels.
    pub fn doubly_exponential(alpha: f64, lambda: f64, c: f64, d_prime: f64, c2: f64, levels: usize) -> Result<Self> {
        let n = |l: usize| (c * 2f64.powi(l as i32) * std::f64::consts::LN_2).exp();
        let ll = lambda.ln();
        let mut log_m = vec![];
        let mut log_eps = vec![];
        for l in 1..=levels {
            let (nl, np) = (n(l), n(l - 1));
            if !nl.is_finite() {
                return Err(Error::ResolutionFloor(l));
            }
            log_m.push(c2.ln() + (alpha * nl - np) * ll);
            log_eps.push(d_prime.ln() - alpha * nl * ll);
        }
        let s = CantorSchedule { log_m, log_eps };
        s.validate()?;
        Ok(s)
    }
}

/// Lower bound log(m_1...m_{l-1}) / (-log(m_l ε_l)) on the dimension.
///
/// The ratio itself approaches its limit only like 1/l for geometric
/// schedules, so the reported value is the tail minimum of the increment
/// ratios log m_l / (D_{l+1} - D_l), D_l = -log(m_l ε_l). By Stolz-Cesàro
/// their liminf bounds the liminf of the ratios from below, and they are
/// exact for geometric schedules. The raw ratios are kept in diagnostics.
pub fn falconer_bound(schedule: &CantorSchedule) -> Result<DimensionEstimate> {
    schedule.validate()?;
    let levels = schedule.levels();
    if levels < 3 {
        return Err(Error::InvalidSchedule(format!("need at least 3 levels, got {levels}")));
    }
    let d: Vec<f64> = (0..levels).map(|l| -(schedule.log_m[l] + schedule.log_eps[l])).collect();
    let mut ratios = vec![];
    let mut numer = 0.0;
    for l in 1..levels {
        numer += schedule.log_m[l - 1];
        ratios.push(if d[l] > 0.0 { numer / d[l] } else { f64::NAN });
    }
    let mut increments = vec![];
    for l in 1..levels {
        let dd = d[l] - d[l - 1];
        increments.push(if dd > 0.0 { schedule.log_m[l - 1] / dd } else { f64::NAN });
    }
    let tail_min = |v: &[f64]| {
        let start = v.len() / 2;
        v[start..].iter().copied().filter(|x| !x.is_nan()).fold(f64::INFINITY, f64::min)
    };
    let value = tail_min(&increments);
    if !value.is_finite() {
        return Err(Error::InvalidSchedule("gap-multiplicity products do not decrease".into()));
    }
    let isolated_m1: Vec<usize> = (0..levels).filter(|&l| schedule.log_m[l].abs() < 1e-12).map(|l| l + 1).collect();
    Ok(DimensionEstimate {
        method: "falconer".into(),
        value,
        diagnostics: json!({
            "levels": levels,
            "ratio_sequence": ratios,
            "ratio_tail_min": tail_min(&ratios),
            "increment_sequence": increments,
            "levels_with_m_eq_1": isolated_m1,
        }),
    })
}

/// Minimal s with (iε)^{-2s} (i+1)ε < 1 for each bin; the bound is the max.
pub fn covering_upper_bound(epsilon: f64, bins: &[(u64, f64)]) -> Result<DimensionEstimate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams(format!("epsilon = {epsilon}")));
    }
    let mut per_bin = vec![];
    let mut best = f64::NEG_INFINITY;
    for &(i, rate) in bins {
        let s = covering_exponent(epsilon, i)?;
        per_bin.push(json!({"i": i, "count_rate": rate, "s": s}));
        best = best.max(s);
    }
    Ok(DimensionEstimate {
        method: "covering".into(),
        value: best,
        diagnostics: json!({ "epsilon": epsilon, "bins": per_bin }),
    })
}

pub fn covering_exponent(epsilon: f64, i: u64) -> Result<f64> {
    let ie = i as f64 * epsilon;
    if !(ie > 1.0) {
        return Err(Error::NonHyperbolicBin { i, epsilon });
    }
    Ok(((i + 1) as f64 * epsilon).ln() / (2.0 * ie.ln()))
}

/// s for the bin holding expansion `sigma` at each ε, showing the ε → 0 trend.
pub fn covering_trend(sigma: f64, epsilons: &[f64]) -> Result<Vec<(f64, f64)>> {
    epsilons
        .iter()
        .map(|&e| {
            let i = (sigma / e).round() as u64;
            Ok((e, covering_exponent(e, i)?))
        })
        .collect()
}
