//! Nested parameter Cantor sets built from stability-window data, and their
//! Falconer dimension estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cantor::{falconer_bound, CantorSchedule, DimensionEstimate};
use crate::error::{Error, Result};
use crate::windows::StabilityWindow;

/// Constants of a window source: ladder ratios Λ < Λ', distance exponent α
/// and distance constant D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConstants {
    pub lambda: f64,
    pub lambda_prime: f64,
    pub alpha: f64,
    pub d: f64,
}

impl SourceConstants {
    pub fn validate(&self) -> Result<()> {
        let SourceConstants { lambda, lambda_prime, alpha, d } = *self;
        if !(1.0 < lambda && lambda < lambda_prime && lambda_prime.is_finite()) {
            return Err(Error::InvalidParams(format!("need 1 < Λ < Λ', got {lambda}, {lambda_prime}")));
        }
        if !(0.0 < alpha && alpha < 0.5) {
            return Err(Error::InvalidParams(format!("need 0 < α < 1/2, got {alpha}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParams(format!("need D > 0, got {d}")));
        }
        Ok(())
    }

    /// C' = √Λ'.
    pub fn c_prime(&self) -> f64 {
        self.lambda_prime.sqrt()
    }

    /// D' = 4 D C'^α.
    pub fn d_prime(&self) -> f64 {
        4.0 * self.d * self.c_prime().powf(self.alpha)
    }

    /// C'' = (6 C' D')⁻¹.
    pub fn c_second(&self) -> f64 {
        1.0 / (6.0 * self.c_prime() * self.d_prime())
    }
}

/// Anything that answers "a window of length about ℓ near a₁".
pub trait WindowOracle: Sync {
    fn constants(&self) -> SourceConstants;
    /// A window with length in [ℓ/C', ℓC'] near `a1`, if the source has one.
    fn query(&self, a1: f64, len: f64) -> Result<Option<(f64, f64)>>;
}

/// Deterministic pseudo-random stand-in for windows accumulating at every
/// parameter: for each a₁ a ladder I_k(a₁) with |I_k|/|I_{k+1}| ∈ (Λ, Λ')
/// and dist(I_k, a₁) ≤ D|I_k|^α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    pub constants: SourceConstants,
    pub seed: u64,
}

pub fn synthetic_window_oracle(lambda: f64, lambda_prime: f64, alpha: f64, d: f64, seed: u64) -> Result<SyntheticSource> {
    let constants = SourceConstants { lambda, lambda_prime, alpha, d };
    constants.validate()?;
    Ok(SyntheticSource { constants, seed })
}

/// Ladder rungs generated lazily from a per-point stream.
struct Ladder {
    rng: ChaCha8Rng,
    len: f64,
}

impl SyntheticSource {
    fn ladder(&self, a1: f64) -> Ladder {
        let key = self.seed ^ a1.to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Ladder { rng: ChaCha8Rng::seed_from_u64(key), len: 1.0 }
    }

    fn place(&self, rng: &mut ChaCha8Rng, a1: f64, len: f64) -> (f64, f64) {
        let c = self.constants;
        let dist = c.d * len.powf(c.alpha) * rng.gen::<f64>();
        if rng.gen::<bool>() {
            (a1 + dist, a1 + dist + len)
        } else {
            (a1 - dist - len, a1 - dist)
        }
    }

    fn advance(&self, l: &mut Ladder) {
        let c = self.constants;
        let mut u = 0.0;
        while u == 0.0 {
            u = l.rng.gen::<f64>();
        }
        l.len /= c.lambda + (c.lambda_prime - c.lambda) * u;
    }

    /// The first `count` windows I_0(a₁), I_1(a₁), … of the ladder, |I_0| = 1.
    pub fn ladder_windows(&self, a1: f64, count: usize) -> Vec<(f64, f64)> {
        let mut l = self.ladder(a1);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let len = l.len;
            out.push(self.place(&mut l.rng, a1, len));
            self.advance(&mut l);
        }
        out
    }
}

impl WindowOracle for SyntheticSource {
    fn constants(&self) -> SourceConstants {
        self.constants
    }

    fn query(&self, a1: f64, len: f64) -> Result<Option<(f64, f64)>> {
        let cp = self.constants.c_prime();
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidParams(format!("target length {len}")));
        }
        if len / cp > 1.0 {
            return Ok(None);
        }
        let mut l = self.ladder(a1);
        loop {
            let rung = l.len;
            let w = self.place(&mut l.rng, a1, rung);
            if rung <= len * cp {
                return Ok(Some(w));
            }
            self.advance(&mut l);
        }
    }
}

/// Windows measured on a family, with the tangency they accumulate on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSource {
    pub constants: SourceConstants,
    pub a_star: f64,
    pub windows: Vec<StabilityWindow>,
}

impl WindowOracle for MeasuredSource {
    fn constants(&self) -> SourceConstants {
        self.constants
    }

    fn query(&self, a1: f64, len: f64) -> Result<Option<(f64, f64)>> {
        let cp = self.constants.c_prime();
        let dist = |w: &StabilityWindow| {
            let (lo, hi) = w.interval;
            if a1 < lo {
                lo - a1
            } else if a1 > hi {
                a1 - hi
            } else {
                0.0
            }
        };
        Ok(self
            .windows
            .iter()
            .filter(|w| {
                let l = w.length();
                l >= len / cp && l <= len * cp
            })
            .min_by(|a, b| dist(a).total_cmp(&dist(b)))
            .map(|w| w.interval))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum WindowSource {
    Synthetic(SyntheticSource),
    Measured(MeasuredSource),
}

impl WindowOracle for WindowSource {
    fn constants(&self) -> SourceConstants {
        match self {
            WindowSource::Synthetic(s) => s.constants(),
            WindowSource::Measured(s) => s.constants(),
        }
    }
    fn query(&self, a1: f64, len: f64) -> Result<Option<(f64, f64)>> {
        match self {
            WindowSource::Synthetic(s) => s.query(a1, len),
            WindowSource::Measured(s) => s.query(a1, len),
        }
    }
}

/// The scale sequence n_l.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScaleSchedule {
    /// n_l = ⌈s·2^l⌉.
    Desk { s: f64 },
    /// n_l = 2^{c·2^l}.
    #[serde(rename = "doubly-exp")]
    DoublyExponential { c: f64 },
    Explicit { n: Vec<f64> },
}

impl Default for ScaleSchedule {
    fn default() -> Self {
        ScaleSchedule::Desk { s: 4.0 }
    }
}

impl ScaleSchedule {
    pub fn n(&self, l: usize) -> Option<f64> {
        match self {
            ScaleSchedule::Desk { s } => Some((s * 2f64.powi(l as i32)).ceil()),
            ScaleSchedule::DoublyExponential { c } => Some(2f64.powf(c * 2f64.powi(l as i32))),
            ScaleSchedule::Explicit { n } => n.get(l).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeLevel {
    pub n_l: f64,
    /// Separation bound D'Λ^{−α n_l}.
    pub eps_l: f64,
    /// Fewest children of any parent at this level.
    pub m_l: usize,
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorTree {
    /// Level 0 is the root interval.
    pub levels: Vec<TreeLevel>,
    pub constants: SourceConstants,
    pub schedule: ScaleSchedule,
    pub d_prime: f64,
    pub c_second: f64,
    /// First level whose window lengths fell below double resolution.
    pub floor_level: Option<usize>,
}

impl CantorTree {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// (m_l, ε_l) for l ≥ 1.
    pub fn schedule_values(&self) -> (Vec<f64>, Vec<f64>) {
        self.levels[1..].iter().map(|l| (l.m_l as f64, l.eps_l)).unzip()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeOptions {
    /// Largest number of intervals a level may hold.
    pub max_intervals: usize,
    /// Window lengths below this multiple of the spacing of doubles at the
    /// root count as unresolved.
    pub resolution_ulps: f64,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions { max_intervals: 2_000_000, resolution_ulps: 1e3 }
    }
}

/// Children of one parent: subdivide into pieces of length in
/// (2D'Λ^{−αn}, 4D'Λ^{−αn}), query each internal endpoint, keep the
/// leftmost admissible windows separated by ε.
fn children(
    source: &dyn WindowOracle,
    parent: (f64, f64),
    piece: f64,
    target: f64,
    eps: f64,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = parent;
    let len = hi - lo;
    let k = (len / piece).floor() as usize;
    let mut kept: Vec<(f64, f64)> = vec![];
    for i in 1..k {
        let a1 = lo + len * i as f64 / k as f64;
        if let Some(w) = source.query(a1, target)? {
            if w.0 < lo || w.1 > hi {
                continue;
            }
            // Windows sit within a fraction of a piece of their endpoint, so
            // only the last few kept ones can be close.
            let clear = kept.iter().rev().take(4).all(|&(klo, khi)| w.0 - khi >= eps || klo - w.1 >= eps);
            if clear {
                kept.push(w);
            }
        }
    }
    kept.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(kept)
}

/// Runs the inductive construction from `root` (level 0) for up to
/// `levels_target` refinements.
pub fn build_tree(
    source: &dyn WindowOracle,
    schedule: &ScaleSchedule,
    levels_target: usize,
    root: (f64, f64),
    opts: &TreeOptions,
) -> Result<CantorTree> {
    let c = source.constants();
    c.validate()?;
    if !(root.0 < root.1) {
        return Err(Error::InvalidParams(format!("empty root {root:?}")));
    }
    let (dp, c2) = (c.d_prime(), c.c_second());
    let n0 = schedule.n(0).ok_or_else(|| Error::InvalidParams("schedule has no n_0".into()))?;
    let floor = opts.resolution_ulps * f64::EPSILON * root.0.abs().max(root.1.abs()).max(root.1 - root.0);
    let mut levels = vec![TreeLevel { n_l: n0, eps_l: 0.0, m_l: 1, intervals: vec![root] }];
    let mut floor_level = None;
    for l in 1..=levels_target {
        let n = schedule.n(l).ok_or_else(|| Error::InvalidParams(format!("schedule has no n_{l}")))?;
        let target = c.lambda.powf(-n);
        if !(target / c.c_prime() > floor) {
            if l == 1 {
                return Err(Error::ResolutionFloor(1));
            }
            floor_level = Some(l);
            break;
        }
        let eps = dp * c.lambda.powf(-c.alpha * n);
        let piece = 3.0 * eps;
        let parents = &levels[l - 1].intervals;
        let predicted: f64 = parents.iter().map(|p| ((p.1 - p.0) / piece).floor().max(0.0)).sum();
        if predicted > opts.max_intervals as f64 {
            return Err(Error::IntervalBudget { level: l, count: predicted.min(usize::MAX as f64) as usize });
        }
        let kids: Vec<Vec<(f64, f64)>> =
            parents.par_iter().map(|&p| children(source, p, piece, target, eps)).collect::<Result<_>>()?;
        let m = kids.iter().map(Vec::len).min().unwrap_or(0);
        if m < 2 {
            return Err(Error::MultiplicityCollapse { level: l, m });
        }
        levels.push(TreeLevel { n_l: n, eps_l: eps, m_l: m, intervals: kids.into_iter().flatten().collect() });
    }
    Ok(CantorTree {
        levels,
        constants: c,
        schedule: schedule.clone(),
        d_prime: dp,
        c_second: c2,
        floor_level,
    })
}

/// What an independent pass over the raw intervals finds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAudit {
    pub level: usize,
    pub nesting_violations: usize,
    /// Smallest gap between consecutive intervals.
    pub min_gap: f64,
    /// Fewest children of any parent.
    pub min_children: usize,
    /// Intervals with length outside [C'⁻¹Λ^{−n}, C'Λ^{−n}].
    pub length_violations: usize,
    /// m_l ≥ C''Λ^{−n_{l−1}+αn_l} holds for the observed multiplicity.
    pub multiplicity_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeAudit {
    pub levels: Vec<LevelAudit>,
    /// Nesting, separation, lengths and m ≥ 2 all hold, and the re-derived
    /// (m_l, ε_l) agree with the stored ones.
    pub valid: bool,
}

/// Re-derives nesting, gaps and multiplicities from the interval lists alone.
pub fn validate_tree(tree: &CantorTree) -> TreeAudit {
    let c = tree.constants;
    let cp = c.c_prime();
    let mut audits = vec![];
    let mut valid = true;
    for l in 1..tree.levels.len() {
        let (prev, cur) = (&tree.levels[l - 1], &tree.levels[l]);
        let mut sorted = cur.intervals.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut counts = vec![0usize; prev.intervals.len()];
        let mut nesting = 0;
        for &(lo, hi) in &sorted {
            let idx = prev.intervals.partition_point(|p| p.0 <= lo);
            match idx.checked_sub(1) {
                Some(j) if prev.intervals[j].1 >= hi => counts[j] += 1,
                _ => nesting += 1,
            }
        }
        let min_gap = sorted.windows(2).map(|w| w[1].0 - w[0].1).fold(f64::INFINITY, f64::min);
        let min_children = counts.iter().copied().min().unwrap_or(0);
        let target = c.lambda.powf(-cur.n_l);
        let tol = 1e-9;
        let length_violations = sorted
            .iter()
            .filter(|w| {
                let len = w.1 - w.0;
                len < target / cp * (1.0 - tol) || len > target * cp * (1.0 + tol)
            })
            .count();
        let bound = tree.c_second * c.lambda.powf(-prev.n_l + c.alpha * cur.n_l);
        let ok = nesting == 0
            && length_violations == 0
            && min_children >= 2
            && min_children == cur.m_l
            && min_gap >= cur.eps_l * (1.0 - tol);
        valid &= ok;
        audits.push(LevelAudit {
            level: l,
            nesting_violations: nesting,
            min_gap,
            min_children,
            length_violations,
            multiplicity_bound_holds: min_children as f64 >= bound,
        });
    }
    TreeAudit { levels: audits, valid }
}

/// Falconer estimate from the tree's (m_l, ε_l).
pub fn tree_dimension(tree: &CantorTree) -> Result<DimensionEstimate> {
    let (m, eps) = tree.schedule_values();
    let sched = CantorSchedule::new(&m, &eps)?;
    let mut est = falconer_bound(&sched)?;
    let n: Vec<f64> = tree.levels.iter().map(|l| l.n_l).collect();
    if let Some(obj) = est.diagnostics.as_object_mut() {
        obj.insert("n_l".into(), json!(n));
        obj.insert("m_l".into(), json!(m));
        obj.insert("eps_l".into(), json!(eps));
        obj.insert("alpha".into(), json!(tree.constants.alpha));
    }
    est.method = "falconer-tree".into();
    Ok(est)
}

/// The construction's formula values (m_l, ε_l) for `levels` levels, in
/// log form, for schedules beyond double precision.
pub fn formula_schedule(constants: &SourceConstants, schedule: &ScaleSchedule, levels: usize) -> Result<CantorSchedule> {
    constants.validate()?;
    let ll = constants.lambda.ln();
    let (dp, c2) = (constants.d_prime(), constants.c_second());
    let mut log_m = vec![];
    let mut log_eps = vec![];
    for l in 1..=levels {
        let (np, nl) = match (schedule.n(l - 1), schedule.n(l)) {
            (Some(a), Some(b)) if b.is_finite() => (a, b),
            _ => return Err(Error::ResolutionFloor(l)),
        };
        log_m.push(c2.ln() + (constants.alpha * nl - np) * ll);
        log_eps.push(dp.ln() - constants.alpha * nl * ll);
    }
    let s = CantorSchedule { log_m, log_eps };
    s.validate()?;
    Ok(s)
}
