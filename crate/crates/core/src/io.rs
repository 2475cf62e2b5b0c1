//! CSV exchange formats. Everything else round-trips through serde_json.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cantor::IntervalCover;
use crate::error::{Error, Result};
use crate::renorm::SampledMap;
use crate::tangency::ManifoldArc;
use crate::windows::{BoundaryKind, StabilityWindow};

#[derive(Debug, Serialize, Deserialize)]
struct CoverRow {
    depth: usize,
    left: f64,
    right: f64,
}

/// Rows (depth, left, right); several covers may share one file.
pub fn write_covers<W: Write>(w: W, covers: &[IntervalCover]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in covers {
        for &(left, right) in c.intervals() {
            out.serialize(CoverRow { depth: c.depth, left, right })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Covers grouped by depth, shallowest first.
pub fn read_covers<R: Read>(r: R) -> Result<Vec<IntervalCover>> {
    let mut by_depth: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: CoverRow = row?;
        by_depth.entry(row.depth).or_default().push((row.left, row.right));
    }
    if by_depth.is_empty() {
        return Err(Error::InvalidCover("no rows".into()));
    }
    by_depth.into_iter().map(|(d, iv)| IntervalCover::new(iv, d)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowRow {
    period: usize,
    sigma: Option<f64>,
    a_lo: f64,
    a_hi: f64,
    dist: Option<f64>,
}

/// Rows (period, sigma, a_lo, a_hi, dist); unknown sigma or dist are empty.
pub fn write_windows<W: Write>(w: W, windows: &[StabilityWindow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for win in windows {
        out.serialize(WindowRow {
            period: win.period,
            sigma: win.sigma,
            a_lo: win.interval.0,
            a_hi: win.interval.1,
            dist: win.dist,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Windows back from CSV. Boundary kinds and multipliers are not part of
/// the format and come back Unknown and NaN.
pub fn read_windows<R: Read>(r: R) -> Result<Vec<StabilityWindow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| {
            let row: WindowRow = row?;
            Ok(StabilityWindow {
                period: row.period,
                sigma: row.sigma,
                interval: (row.a_lo, row.a_hi),
                dist: row.dist,
                lo_kind: BoundaryKind::Unknown,
                hi_kind: BoundaryKind::Unknown,
                lo_multiplier: f64::NAN,
                hi_multiplier: f64::NAN,
            })
        })
        .collect()
}

/// Rows (branch, x, y), each branch starting at the saddle.
pub fn write_arc<W: Write>(w: W, arc: &ManifoldArc) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["branch", "x", "y"])?;
    for (k, branch) in arc.branches.iter().enumerate() {
        for p in branch {
            out.write_record([k.to_string(), num(p[0]), num(p[1])])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rows (x_in, y_in, a, x_out, y_out).
pub fn write_sampled_map<W: Write>(w: W, map: &SampledMap) -> Result<()> {
    write_table(w, &["x_in", "y_in", "a", "x_out", "y_out"], map.rows().iter().map(|r| r.as_slice()))
}

/// Plain numeric table with a header row.
pub fn write_table<'r, W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = &'r [f64]>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Parse(format!("row of {} columns under {} headers", row.len(), header.len())));
        }
        out.write_record(row.iter().map(|&v| num(v)))?;
    }
    out.flush()?;
    Ok(())
}

/// Shortest round-trip decimal, in exponent form for very large or small values.
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}
