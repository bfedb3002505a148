use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quadgrad::config::ExperimentConfig;
use quadgrad::experiment::{cmd_check, cmd_constants, cmd_solve, cmd_sweep, cmd_verify, exit, exit_code, Experiment};

#[derive(Parser)]
#[command(name = "quadgrad", version, about = "Critical constants and truncated fixed-point solves for elliptic problems with quadratic gradient growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical parameters, smallness margins and C_N provenance as JSON.
    Constants(Common),
    /// Smallness verdicts; exit 0 iff both hold.
    Check(Common),
    /// Continuation solve; writes fields, trace and residuals.
    Solve(Common),
    /// Delta or norm-scaling sweep written as CSV.
    Sweep(Common),
    /// Invariant suite.
    Verify(Common),
}

fn emit<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn run(cli: Cli) -> quadgrad::Result<i32> {
    match cli.command {
        Command::Constants(c) => {
            let exp = Experiment::load(&c.config, c.seed)?;
            emit(&cmd_constants(&exp)?);
            Ok(exit::SUCCESS)
        }
        Command::Check(c) => {
            let exp = Experiment::load(&c.config, c.seed)?;
            let rep = cmd_check(&exp)?;
            emit(&rep);
            Ok(if rep.admissible { exit::SUCCESS } else { exit::SMALLNESS })
        }
        Command::Solve(c) => {
            let exp = Experiment::load(&c.config, c.seed)?;
            let rep = cmd_solve(&exp, &exp.out_dir(c.out.as_deref()))?;
            emit(&rep);
            Ok(rep.status.exit_code())
        }
        Command::Sweep(c) => {
            let exp = Experiment::load(&c.config, c.seed)?;
            emit(&cmd_sweep(&exp, &exp.out_dir(c.out.as_deref()))?);
            Ok(exit::SUCCESS)
        }
        Command::Verify(c) => {
            let cfg = ExperimentConfig::load(&c.config)?;
            let rep = cmd_verify(&cfg, c.seed);
            emit(&rep);
            Ok(if rep.passed { exit::SUCCESS } else { exit::INVARIANT })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
