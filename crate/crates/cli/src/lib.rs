//! Command-line surface for `advbound`: JSON problem, plan, certificate and
//! trace files, plus one subcommand per stage of the pipeline.
//!
//! Exit codes: 0 success, 1 domain failure, 2 input or parse failure.

pub mod commands;
pub mod wire;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Parser, Subcommand};

use commands::{CliError, Outcome, Steps};

#[derive(Debug, Parser)]
#[command(name = "advbound", version, about = "Adversary bounds and universal algorithms for state conversion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural assumptions on a problem file.
    Validate { problem: PathBuf },
    /// Compute the adversary bound and its duality gap.
    Bound {
        problem: PathBuf,
        /// Add the per-subspace refinement table.
        #[arg(long)]
        refined: bool,
        /// Write the optimal catalyst and dual certificate here.
        #[arg(long)]
        certificates_out: Option<PathBuf>,
    },
    /// Synthesize and compile an algorithm.
    #[command(group(ArgGroup::new("length").required(true).multiple(true).args(["epsilon", "steps"])))]
    Synthesize {
        problem: PathBuf,
        /// Target error; the step count is ceil(adv / epsilon^2).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Explicit step count, overriding any epsilon.
        #[arg(long)]
        steps: Option<usize>,
        /// Write the plan here instead of standard output.
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
    /// Run a plan on xi and compare the error with the bound.
    Simulate {
        plan: PathBuf,
        problem: PathBuf,
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Verify certificates without the solver.
    #[command(group(ArgGroup::new("certificate").required(true).multiple(true).args(["pibar", "gamma"])))]
    Certify {
        problem: PathBuf,
        #[arg(long)]
        pibar: Option<PathBuf>,
        #[arg(long)]
        gamma: Option<PathBuf>,
    },
    /// Write a bundled instance (deutsch_phase, grover_phase:N, noisy_damp:P) as a problem file.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the instance's hand-derived certificates.
        #[arg(long)]
        certificates_out: Option<PathBuf>,
    },
}

pub fn execute(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Validate { problem } => commands::cmd_validate(&problem),
        Command::Bound { problem, refined, certificates_out } => {
            commands::cmd_bound(&problem, refined, certificates_out.as_deref())
        }
        Command::Synthesize { problem, epsilon, steps, plan_out } => {
            let steps = match (steps, epsilon) {
                (Some(t), _) => Steps::Fixed(t),
                (None, Some(e)) => Steps::Epsilon(e),
                (None, None) => return Err(CliError::Input("one of --epsilon or --steps is required".into())),
            };
            commands::cmd_synthesize(&problem, steps, plan_out.as_deref())
        }
        Command::Simulate { plan, problem, trace_out } => commands::cmd_simulate(&plan, &problem, trace_out.as_deref()),
        Command::Certify { problem, pibar, gamma } => commands::cmd_certify(&problem, pibar.as_deref(), gamma.as_deref()),
        Command::Export { name, out, certificates_out } => {
            commands::cmd_export(&name, out.as_deref(), certificates_out.as_deref())
        }
    }
}

/// Parses `args`, runs the command and prints its report. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
            // a closed pipe on standard output is not an error of the command
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            if let Some(msg) = outcome.diagnostic {
                eprintln!("advbound: {msg}");
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("advbound: {e}");
            e.exit_code()
        }
    }
}
