use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use newhouse_cli::acceptance;
use newhouse_cli::config::parse_override;

#[derive(Parser)]
#[command(name = "newhouse", version, about = "Experiments on dissipative Hénon-like families")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config with flat dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; the value is parsed as JSON, else taken as a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (same as --set out=DIR).
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (same as --set threads=N).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Grid scan of a parameter range for attracting cycles.
    ScanSinks(RunArgs),
    /// Stability windows of the cascade generated by a tangency.
    Windows(RunArgs),
    /// Log-log scaling of window length and distance against sigma.
    ScalingFit(RunArgs),
    /// Homoclinic tangency of the saddle beta and its local manifolds.
    FindTangency(RunArgs),
    /// Thickness of an interval cover.
    Thickness(RunArgs),
    /// Gap lemma verdict for two covers.
    GapCheck(RunArgs),
    /// Finite-depth covers of the unimodal Cantor sets.
    CantorCover(RunArgs),
    /// Box-counting dimension of a cover.
    BoxDim(RunArgs),
    /// Falconer lower bound for a multiplicity/gap schedule.
    Falconer(RunArgs),
    /// Covering upper bound on the dimension.
    CoveringUpper(RunArgs),
    /// Sampled return map near a tangency and its fitted normal form.
    Renorm(RunArgs),
    /// Conditions C1 and C2 on a renormalized family.
    Conditions(RunArgs),
    /// Nested parameter Cantor tree from a window oracle.
    ParamCantor(RunArgs),
    /// Falconer dimension of a parameter Cantor tree.
    TreeDim(RunArgs),
    /// Independent audit of a parameter Cantor tree.
    ValidateTree(RunArgs),
    /// Run the acceptance criteria, one PASS/FAIL line each.
    Acceptance {
        /// Run a single criterion (1-12).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=12))]
        criterion: Option<u8>,
    },
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let name = matches.subcommand_name().expect("subcommand required").to_string();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let args = match cli.cmd {
        Cmd::Acceptance { criterion } => {
            let ids: Vec<u8> = criterion.map_or_else(|| acceptance::CRITERIA.collect(), |c| vec![c]);
            let mut ok = true;
            for id in ids {
                let r = acceptance::run_criterion(id);
                println!("{r}");
                ok &= r.pass;
            }
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
        Cmd::ScanSinks(a)
        | Cmd::Windows(a)
        | Cmd::ScalingFit(a)
        | Cmd::FindTangency(a)
        | Cmd::Thickness(a)
        | Cmd::GapCheck(a)
        | Cmd::CantorCover(a)
        | Cmd::BoxDim(a)
        | Cmd::Falconer(a)
        | Cmd::CoveringUpper(a)
        | Cmd::Renorm(a)
        | Cmd::Conditions(a)
        | Cmd::ParamCantor(a)
        | Cmd::TreeDim(a)
        | Cmd::ValidateTree(a) => a,
    };
    let mut overrides = vec![];
    for s in &args.set {
        match parse_override(s) {
            Ok(kv) => overrides.push(kv),
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(newhouse_cli::EXIT_CONFIG as u8);
            }
        }
    }
    if let Some(o) = args.out {
        overrides.push(("out".into(), o.into()));
    }
    if let Some(t) = args.threads {
        overrides.push(("threads".into(), t.into()));
    }
    let code = newhouse_cli::run(&name, args.config.as_deref(), &overrides);
    ExitCode::from(code as u8)
}
