//! Configuration files, reports and subcommands of the `subelliptic` tool.

pub mod commands;
pub mod config;
mod error;
pub mod expr;

pub use error::CliError;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "subelliptic", version, about = "Galerkin solver for degenerate elliptic Dirichlet problems")]
pub struct Cli {
    /// Subcommand.
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the configured route.
    #[arg(long, global = true, value_enum)]
    pub route: Option<RouteArg>,
    /// Solve even when a hypothesis check fails.
    #[arg(long, global = true)]
    pub force: bool,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override the safety factor on the shift.
    #[arg(long, global = true)]
    pub safety: Option<f64>,
}

/// Subcommands.
#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Check the structural hypotheses (exit 2 on failure).
    Check,
    /// Solve and report.
    Solve,
    /// Convergence table over the refinement list.
    Converge,
    /// Print the constant chain.
    Constants,
}

/// `--route` values.
#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum RouteArg {
    /// Direct solve.
    Direct,
    /// Shifted Fredholm solve.
    Fredholm,
    /// Both routes.
    Both,
}

impl RouteArg {
    fn name(self) -> &'static str {
        match self {
            RouteArg::Direct => "direct",
            RouteArg::Fredholm => "fredholm",
            RouteArg::Both => "both",
        }
    }
}

/// Run a parsed command line; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = config::RunConfig::load(path)?;
    if let Some(r) = cli.route {
        cfg.route = Some(r.name().into());
    }
    if let Some(s) = cli.safety {
        cfg.safety = s;
    }
    cfg.validate()?;
    let outcome = match cli.command {
        Command::Check => commands::check(&cfg)?,
        Command::Solve => commands::solve(&cfg, cli.force)?,
        Command::Converge => commands::converge(&cfg)?,
        Command::Constants => commands::constants(&cfg)?,
    };
    let target = cli.out.clone().or_else(|| cfg.output.report.as_ref().map(|p| cfg.resolve(p)));
    match target {
        Some(p) => commands::write_file(&p, &outcome.text)?,
        None => print!("{}", outcome.text),
    }
    Ok(outcome.code)
}
