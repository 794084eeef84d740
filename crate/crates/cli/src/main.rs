use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use condenser_cli::commands::ThinnessFlags;
use condenser_cli::{run, write_records, Command, Format, ProblemConfig};
use condenser_core::Profile;

#[derive(Parser)]
#[command(
    name = "condenser",
    version,
    about = "Constrained weighted-energy problems on signed condensers"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Problem config (JSON).
    config: PathBuf,
    /// Write records here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Sub {
    /// Minimize the weighted energy.
    Solve(Common),
    /// Equilibrium measure and capacity of the plate nodes.
    Capacity(Common),
    /// Sweep the configured source onto the plate nodes.
    Balayage(Common),
    /// Solve on growing node prefixes.
    Exhaust(Common),
    /// Capacity of a truncated thin rotational body at several radii.
    Thinness {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_profile)]
        profile: Option<Profile>,
        #[arg(long)]
        s: Option<f64>,
        /// Comma-separated truncation radii.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// Positive-definiteness diagnosis of the Gram matrix.
    CheckPd(Common),
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    serde_json::from_value(serde_json::Value::from(s))
        .map_err(|_| format!("unknown profile `{s}` (power_s, exp_s_le1, exp_s_gt1)"))
}

fn execute(cli: Cli) -> Result<bool> {
    let (cmd, common, flags) = match cli.command {
        Sub::Solve(c) => (Command::Solve, c, ThinnessFlags::default()),
        Sub::Capacity(c) => (Command::Capacity, c, ThinnessFlags::default()),
        Sub::Balayage(c) => (Command::Balayage, c, ThinnessFlags::default()),
        Sub::Exhaust(c) => (Command::Exhaust, c, ThinnessFlags::default()),
        Sub::CheckPd(c) => (Command::CheckPd, c, ThinnessFlags::default()),
        Sub::Thinness {
            common,
            profile,
            s,
            radii,
        } => (Command::Thinness, common, ThinnessFlags { profile, s, radii }),
    };
    let mut cfg = ProblemConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.solver.seed = seed;
    }
    let output = run(cmd, &cfg, &flags)?;
    let mut sink: Box<dyn Write> = match &common.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    write_records(&mut sink, &output.records, common.format)?;
    sink.flush()?;
    Ok(output.converged)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: iteration limit reached before convergence");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
