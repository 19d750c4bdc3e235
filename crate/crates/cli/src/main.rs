//! `ctdd`: data generation, excitation checks, identification, data-driven
//! simulation and data-driven LQR from the command line.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::commands::Context;
use crate::config::{Experiment, ExperimentConfig};
use crate::output::OutDir;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{failed} reproduction check(s) failed")]
    ChecksFailed { failed: usize },
}

#[derive(Parser, Debug)]
#[command(
    name = "ctdd",
    version,
    about = "Continuous-time data-driven analysis and LQR"
)]
struct Cli {
    /// TOML experiment configuration (defaults to the built-in example).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Number of Gauss-Legendre nodes, overriding the configuration.
    #[arg(long, global = true)]
    quad: Option<usize>,
    /// Seed for random systems and excitations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print the report as JSON instead of a summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the informative trajectory to CSV.
    GenData,
    /// Certify persistency of excitation of the input.
    CheckPe {
        /// Excitation order (defaults to L + n).
        #[arg(long)]
        order: Option<usize>,
        /// Read the input from a CSV with `t` and `u{c}_d0` columns.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Identify (A, B) from the data dictionary.
    Identify,
    /// Simulate the configured input from data alone.
    DdSimulate,
    /// Solve the data-driven LQR for each truncation order.
    Lqr,
    /// Run the whole pipeline on the built-in example and check the results.
    Reproduce,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::CheckPe { .. } => "check-pe",
            Command::Identify => "identify",
            Command::DdSimulate => "dd-simulate",
            Command::Lqr => "lqr",
            Command::Reproduce => "reproduce",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<CliError>() {
                Some(CliError::Config(_)) => ExitCode::from(2),
                Some(CliError::ChecksFailed { .. }) => ExitCode::from(3),
                None => ExitCode::from(1),
            }
        }
    }
}

fn emit<S: Serialize>(
    json: bool,
    report: &S,
    summary: impl FnOnce() -> String,
) -> anyhow::Result<()> {
    let text = if json {
        serde_json::to_string_pretty(report)?
    } else {
        summary()
    };
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut config = match (&cli.command, &cli.config) {
        (Command::Reproduce, Some(_)) => {
            log::warn!("reproduce always runs the built-in example; ignoring --config");
            ExperimentConfig::default()
        }
        (_, Some(path)) => ExperimentConfig::load(path)?,
        (_, None) => ExperimentConfig::default(),
    };
    if let Some(q) = cli.quad {
        config.quadrature = q;
    }
    let canonical = config.canonical();
    let exp = Experiment::new(config, cli.seed)?;
    let out = OutDir::create(&cli.out)?;
    out.write_meta(cli.command.name(), &canonical)?;
    let ctx = Context { exp, out };

    match &cli.command {
        Command::GenData => {
            let r = ctx.gen_data()?;
            emit(cli.json, &r, || {
                format!(
                    "wrote {} ({} rows) and {} ({} rows)",
                    r.nodes_csv, r.node_count, r.grid_csv, r.grid_count
                )
            })
        }
        Command::CheckPe { order, csv } => {
            let r = ctx.check_pe(*order, csv.as_deref())?;
            emit(cli.json, &r, || {
                format!(
                    "order {}: min eigenvalue {:.6e} ({})",
                    r.order,
                    r.min_eigenvalue,
                    if r.is_pe {
                        "persistently exciting"
                    } else {
                        "not persistently exciting"
                    }
                )
            })
        }
        Command::Identify => {
            let r = ctx.identify()?;
            emit(cli.json, &r, || {
                format!(
                    "A = {:?}\nB = {:?}\nresidual {:.3e}, deviation from model {:.3e}",
                    r.a_tilde, r.b_tilde, r.residual, r.model_error
                )
            })
        }
        Command::DdSimulate => {
            let r = ctx.dd_simulate()?;
            emit(cli.json, &r, || {
                format!(
                    "N = {}: residual {:.3e}, max state error {:.3e}; wrote {}",
                    r.n, r.residual, r.max_state_error, r.csv
                )
            })
        }
        Command::Lqr => {
            let r = ctx.lqr()?;
            emit(cli.json, &r, || {
                let mut s = format!(
                    "J* = {:.12} ({} reference)\n{:>4} {:>22} {:>12} {:>12}",
                    r.j_star, r.reference, "N", "J_N", "gap", "traj_gap"
                );
                for row in &r.rows {
                    s += &format!(
                        "\n{:>4} {:>22.15} {:>12.3e} {:>12.3e}",
                        row.n, row.j_n, row.gap, row.traj_gap
                    );
                }
                s
            })
        }
        Command::Reproduce => {
            let r = commands::reproduce(&ctx)?;
            emit(cli.json, &r, || {
                let mut s = String::new();
                for c in &r.checks {
                    s += &format!(
                        "{} {}: {:.6e} (expected {})\n",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.value,
                        c.expected
                    );
                }
                s + &format!("{} passed, {} failed", r.passed, r.failed)
            })?;
            if r.failed > 0 {
                return Err(CliError::ChecksFailed { failed: r.failed }.into());
            }
            Ok(())
        }
    }
}
