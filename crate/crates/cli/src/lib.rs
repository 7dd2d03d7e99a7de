//! The `dnas` command line.

mod data;
mod grid;
mod report;
mod run;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use dnas_core::Error;

pub use data::{GenerateArgs, VerifyArgs};
pub use grid::ExhaustiveArgs;
pub use report::ReportArgs;
pub use run::{CallSummary, RunArgs, RunSummary, Timing};

#[derive(Debug, Parser)]
#[command(name = "dnas", version, about = "Evolutionary search for minimal recurrent network models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the surrogate plant and write learning/verification CSVs.
    GenerateData(GenerateArgs),
    /// Run repeated calls of a search algorithm.
    Run(RunArgs),
    /// Train every architecture of a small grid.
    Exhaustive(ExhaustiveArgs),
    /// Closed-loop errors of a saved genome on data sets.
    Verify(VerifyArgs),
    /// Print the indicators of a finished run directory.
    Report(ReportArgs),
}

/// Worker-thread options shared by the compute-heavy commands.
#[derive(Debug, Clone, Args)]
pub struct Parallelism {
    /// Worker threads for evaluation and training (0: one per core).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

impl Parallelism {
    pub(crate) fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.threads).build()?;
        Ok(pool.install(f))
    }
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Exit code for an error: 2 for configuration and input-format problems,
/// 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            if matches!(e, Error::Config(_) | Error::Parse { .. }) {
                return EXIT_CONFIG;
            }
        }
    }
    EXIT_FAILURE
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData(a) => data::generate(&a),
        Command::Run(a) => run::run(&a),
        Command::Exhaustive(a) => grid::exhaustive(&a),
        Command::Verify(a) => data::verify(&a),
        Command::Report(a) => report::report(&a),
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn main_with<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub(crate) fn ensure_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))
}

pub(crate) fn write_json<T: serde::Serialize>(path: PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
}
