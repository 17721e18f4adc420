use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stripes_cli::{error_record, run_experiment, ExperimentConfig, Kind};
use stripes_core::Error;

#[derive(Parser)]
#[command(name = "stripes", version, about = "Experiments on periodic sets under local/nonlocal perimeter functionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; defaults to `results/<experiment>`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed, overriding the one in the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Reject exponents with p < d + 3.
    #[arg(long, global = true)]
    strict_p: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Closed-form constants against quadrature.
    Constants,
    /// Stripe energy over admissible half-periods and its model fit.
    StripeScan,
    /// Slicing estimates against one-dimensional energies.
    SliceCheck,
    /// Grid energies of axis stripes under refinement.
    LatticeCheck,
    /// Ranking of candidate patterns.
    Compare,
    /// Simulated annealing from a random field.
    Anneal,
    /// Nonlocal curvature refinement and excess at a boundary point.
    Curvature,
    /// Charges and energies as tau decreases.
    GammaCheck,
}

impl From<Command> for Kind {
    fn from(c: Command) -> Kind {
        match c {
            Command::Constants => Kind::Constants,
            Command::StripeScan => Kind::StripeScan,
            Command::SliceCheck => Kind::SliceCheck,
            Command::LatticeCheck => Kind::LatticeCheck,
            Command::Compare => Kind::Compare,
            Command::Anneal => Kind::Anneal,
            Command::Curvature => Kind::Curvature,
            Command::GammaCheck => Kind::GammaCheck,
        }
    }
}

/// One JSON line on stderr.
fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn report(e: &Error) -> ExitCode {
    let (code, line) = error_record(e);
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail("usage", e.to_string().lines().next().unwrap_or("invalid arguments"), 2),
    };
    let kind = Kind::from(cli.command);
    let Some(path) = cli.config else {
        return fail("config", "--config is required: p, d, tau and L have no defaults", 2);
    };
    let mut cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.strict_p |= cli.strict_p;
    let out = cli.out.unwrap_or_else(|| PathBuf::from("results").join(kind.as_str()));
    match run_experiment(&cfg, kind, &out, cli.threads) {
        Ok(m) => {
            println!(
                "{}: {} outputs in {} ({} flagged rows, {:.2} s)",
                kind.as_str(),
                m.outputs.len() + 1,
                out.display(),
                m.flagged_rows,
                m.wall_time_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}
