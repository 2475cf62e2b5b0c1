//! One function per subcommand. Each reads its keys from a resolved
//! [`Config`] and writes its files through [`Outputs`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use newhouse::cantor::{
    box_dimension, covering_trend, covering_upper_bound, falconer_bound, gap_lemma, thickness, CantorSchedule, IntervalCover,
};
use newhouse::io;
use newhouse::paramcantor::{build_tree, synthetic_window_oracle, tree_dimension, validate_tree, CantorTree, ScaleSchedule, TreeOptions};
use newhouse::renorm::{conditions_c1_c2, fit_normal_form, return_map, RenormOptions};
use newhouse::tangency::{find_tangency, local_manifolds, ArcOptions, TangencyOptions, TangencyRecord};
use newhouse::unimodal::{alpha_ladder, cantor_cover, CantorKind, UnimodalMap};
use newhouse::windows::{scan_sinks, scaling_fit, window_near_tangency, Generator, StabilityWindow};
use newhouse::{Error, HenonLikeFamily, Result};
use serde::Serialize;

use crate::config::Config;
use crate::fixtures;

/// Files written by a run, in order.
pub struct Outputs {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Outputs { dir, written: vec![] }
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub const SUBCOMMANDS: [&str; 15] = [
    "scan-sinks",
    "windows",
    "scaling-fit",
    "find-tangency",
    "thickness",
    "gap-check",
    "cantor-cover",
    "box-dim",
    "falconer",
    "covering-upper",
    "renorm",
    "conditions",
    "param-cantor",
    "tree-dim",
    "validate-tree",
];

pub fn execute(cfg: &Config, out: &mut Outputs) -> Result<()> {
    match cfg.subcommand.as_str() {
        "scan-sinks" => cmd_scan_sinks(cfg, out),
        "windows" => cmd_windows(cfg, out),
        "scaling-fit" => cmd_scaling_fit(cfg, out),
        "find-tangency" => cmd_find_tangency(cfg, out),
        "thickness" => cmd_thickness(cfg, out),
        "gap-check" => cmd_gap_check(cfg, out),
        "cantor-cover" => cmd_cantor_cover(cfg, out),
        "box-dim" => cmd_box_dim(cfg, out),
        "falconer" => cmd_falconer(cfg, out),
        "covering-upper" => cmd_covering_upper(cfg, out),
        "renorm" => cmd_renorm(cfg, out),
        "conditions" => cmd_conditions(cfg, out),
        "param-cantor" => cmd_param_cantor(cfg, out),
        "tree-dim" => cmd_tree_dim(cfg, out),
        "validate-tree" => cmd_validate_tree(cfg, out),
        other => Err(Error::InvalidParams(format!("unknown subcommand {other}"))),
    }
}

fn family(cfg: &Config) -> Result<HenonLikeFamily> {
    match cfg.input("family") {
        Some(p) => {
            let f: HenonLikeFamily = serde_json::from_str(&fixtures::load(p)?)?;
            f.validate()?;
            Ok(f)
        }
        None => Ok(HenonLikeFamily::henon(cfg.num("b"))),
    }
}

fn tangency(cfg: &Config, fam: &HenonLikeFamily) -> Result<TangencyRecord> {
    let (a, x) = (cfg.num("saddle.a"), cfg.num("saddle.x"));
    let saddle = fam.find_periodic_orbit(a, 1, [x, fam.b * x], 1e-13)?;
    find_tangency(fam, (cfg.num("tangency.a_lo"), cfg.num("tangency.a_hi")), &saddle, &TangencyOptions::default())
}

fn generator(cfg: &Config, fam: &HenonLikeFamily) -> Result<Generator> {
    Generator::new(fam, &tangency(cfg, fam)?)
}

fn read_covers(cfg: &Config, key: &str) -> Result<Vec<IntervalCover>> {
    let name = cfg.input(key).ok_or_else(|| Error::InvalidParams(format!("{key} is required")))?;
    io::read_covers(fixtures::load(name)?.as_bytes())
}

/// The cover of the requested depth, or the deepest one when depth is 0.
fn pick_cover(cfg: &Config, key: &str, depth: usize) -> Result<IntervalCover> {
    let covers = read_covers(cfg, key)?;
    let found = if depth == 0 { covers.last() } else { covers.iter().find(|c| c.depth == depth) };
    found.cloned().ok_or_else(|| Error::InvalidCover(format!("no cover of depth {depth} in {key}")))
}

fn read_tree(cfg: &Config) -> Result<CantorTree> {
    let name = cfg.input("tree").ok_or_else(|| Error::InvalidParams("tree is required".into()))?;
    Ok(serde_json::from_str(&fixtures::load(name)?)?)
}

fn cmd_scan_sinks(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let fam = family(cfg)?;
    let obs = scan_sinks(
        &fam,
        (cfg.num("a_lo"), cfg.num("a_hi")),
        cfg.int("grid"),
        cfg.int("max_period"),
        cfg.int("transient"),
        cfg.num("tol"),
    );
    let rows: Vec<[f64; 2]> = obs.iter().map(|o| [o.a, o.period as f64]).collect();
    out.csv("sinks.csv", |w| io::write_table(w, &["a", "period"], rows.iter().map(|r| r.as_slice())))
}

fn cascade(cfg: &Config, fam: &HenonLikeFamily) -> Result<Vec<StabilityWindow>> {
    let gen = generator(cfg, fam)?;
    (cfg.int("period_min")..=cfg.int("period_max")).map(|p| window_near_tangency(fam, p, &gen)).collect()
}

fn cmd_windows(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let fam = family(cfg)?;
    let ws = cascade(cfg, &fam)?;
    out.csv("windows.csv", |w| io::write_windows(w, &ws))?;
    out.json("windows.json", &ws)
}

fn cmd_scaling_fit(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let ws = match cfg.input("windows") {
        Some(p) => io::read_windows(fixtures::load(p)?.as_bytes())?,
        None => cascade(cfg, &family(cfg)?)?,
    };
    let fit = scaling_fit(&ws)?;
    out.json("scaling.json", &fit)?;
    let rows: Vec<[f64; 3]> = ws
        .iter()
        .filter_map(|w| Some([w.sigma?.ln(), w.length().ln(), w.dist?.ln()]))
        .collect();
    out.csv("scaling.csv", |w| {
        io::write_table(w, &["log_sigma", "log_length", "log_dist"], rows.iter().map(|r| r.as_slice()))
    })
}

fn cmd_find_tangency(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let fam = family(cfg)?;
    let rec = tangency(cfg, &fam)?;
    out.json("tangency.json", &rec)?;
    let (stable, unstable) = local_manifolds(&fam, rec.a_star, &rec.saddle, &ArcOptions::default())?;
    out.csv("stable_arc.csv", |w| io::write_arc(w, &stable))?;
    out.csv("unstable_arc.csv", |w| io::write_arc(w, &unstable))
}

fn cmd_thickness(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let cover = pick_cover(cfg, "cover", cfg.int("depth"))?;
    let report = thickness(&cover);
    out.json("thickness.json", &report)?;
    let rows: Vec<[f64; 2]> = report.per_endpoint.iter().map(|&(u, t)| [u, t]).collect();
    out.csv("per_endpoint.csv", |w| io::write_table(w, &["u", "tau"], rows.iter().map(|r| r.as_slice())))
}

fn cmd_gap_check(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let k1 = pick_cover(cfg, "cover1", 0)?;
    let k2 = pick_cover(cfg, "cover2", 0)?;
    out.json("gap_lemma.json", &gap_lemma(&k1, &k2))
}

fn cmd_cantor_cover(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let fam = family(cfg)?;
    let p = UnimodalMap::new(cfg.num("a"), fam.perturb_a.clone())?;
    let kind = match cfg.str("kind") {
        "C1" => CantorKind::C1,
        "C2" => CantorKind::C2,
        other => return Err(Error::InvalidParams(format!("kind must be C1 or C2, got {other}"))),
    };
    let covers: Vec<IntervalCover> = (0..=cfg.int("depth")).map(|d| cantor_cover(&p, kind, d)).collect::<Result<_>>()?;
    out.csv("cover.csv", |w| io::write_covers(w, &covers))?;
    let n = cfg.int("ladder");
    if n > 0 {
        out.json("ladder.json", &alpha_ladder(&p, n)?)?;
    }
    Ok(())
}

fn cmd_box_dim(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let est = box_dimension(&read_covers(cfg, "cover")?)?;
    out.json("dimension.json", &est)
}

fn cmd_falconer(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let name = cfg.input("schedule").ok_or_else(|| Error::InvalidParams("schedule is required".into()))?;
    let schedule: CantorSchedule = serde_json::from_str(&fixtures::load(name)?)?;
    out.json("dimension.json", &falconer_bound(&schedule)?)
}

fn cmd_covering_upper(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let (is, rates) = (cfg.nums("bins.i"), cfg.nums("bins.rate"));
    if is.len() != rates.len() {
        return Err(Error::InvalidParams("bins.i and bins.rate differ in length".into()));
    }
    let bins: Vec<(u64, f64)> = is.iter().zip(&rates).map(|(&i, &r)| (i as u64, r)).collect();
    out.json("covering.json", &covering_upper_bound(cfg.num("epsilon"), &bins)?)?;
    let sigma = cfg.num("trend.sigma");
    if sigma > 0.0 {
        let trend = covering_trend(sigma, &cfg.nums("trend.epsilons"))?;
        let rows: Vec<[f64; 2]> = trend.iter().map(|&(e, s)| [e, s]).collect();
        out.csv("trend.csv", |w| io::write_table(w, &["epsilon", "s"], rows.iter().map(|r| r.as_slice())))?;
    }
    Ok(())
}

fn renorm_options(cfg: &Config) -> RenormOptions {
    RenormOptions {
        box_side: cfg.num("renorm.box_side"),
        grid: cfg.int("renorm.grid"),
        params: cfg.int("renorm.params"),
        param_span: cfg.num("renorm.param_span"),
        ..RenormOptions::default()
    }
}

fn cmd_renorm(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let fam = family(cfg)?;
    let gen = generator(cfg, &fam)?;
    let sm = return_map(&fam, &gen, cfg.int("n"), &renorm_options(cfg))?;
    out.csv("sampled_map.csv", |w| io::write_sampled_map(w, &sm))?;
    out.json("renormalized.json", &fit_normal_form(&sm)?)
}

fn cmd_conditions(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let fam = family(cfg)?;
    let gen = generator(cfg, &fam)?;
    let rf = fit_normal_form(&return_map(&fam, &gen, cfg.int("n"), &renorm_options(cfg))?)?;
    // The parameter whose renormalized image is a_renorm.
    let a = rf.a_map.centre + (cfg.num("a_renorm") - rf.a_map.offset) / rf.a_map.slope;
    out.json("conditions.json", &conditions_c1_c2(&rf, a, fam.b, cfg.num("margin"))?)
}

fn cmd_param_cantor(cfg: &Config, out: &mut Outputs) -> Result<()> {
    let src = synthetic_window_oracle(
        cfg.num("oracle.lambda"),
        cfg.num("oracle.lambda_prime"),
        cfg.num("oracle.alpha"),
        cfg.num("oracle.d"),
        cfg.int("seed") as u64,
    )?;
    let schedule = match cfg.str("schedule.kind") {
        "desk" => ScaleSchedule::Desk { s: cfg.num("schedule.s") },
        "doubly-exp" => ScaleSchedule::DoublyExponential { c: cfg.num("schedule.c") },
        "explicit" => ScaleSchedule::Explicit { n: cfg.nums("schedule.n") },
        other => return Err(Error::InvalidSchedule(format!("schedule.kind must be desk, doubly-exp or explicit, got {other}"))),
    };
    let opts = TreeOptions { max_intervals: cfg.int("max_intervals"), ..TreeOptions::default() };
    let tree = build_tree(&src, &schedule, cfg.int("levels"), (cfg.num("root.lo"), cfg.num("root.hi")), &opts)?;
    out.json("tree.json", &tree)
}

fn cmd_tree_dim(cfg: &Config, out: &mut Outputs) -> Result<()> {
    out.json("dimension.json", &tree_dimension(&read_tree(cfg)?)?)
}

fn cmd_validate_tree(cfg: &Config, out: &mut Outputs) -> Result<()> {
    out.json("audit.json", &validate_tree(&read_tree(cfg)?))
}
