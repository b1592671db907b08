//! Command-line driver: `trace`, `align`, `filter`, `report` and `fixture`.

mod align;
mod filter;
mod fixture;
mod report;
mod trace;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cmtrace::model::Modality;

pub use align::{cmd_align, AlignArgs};
pub use filter::{cmd_filter, FilterArgs, FilterSummary};
pub use fixture::{cmd_fixture, FixtureArgs, FIXTURE_TRANSCRIPT};
pub use report::{cmd_report, ReportArgs, ReportFormat};
pub use trace::{cmd_trace, TargetModeArg, TraceArgs, TraceSummary};

#[derive(Debug, Parser)]
#[command(name = "cmtrace", version, about = "Causal tracing and CTC alignment for toy speech/text models")]
pub struct Cli {
    /// Worker threads (defaults to available parallelism).
    #[arg(long, global = true, env = "CMTRACE_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run causal traces over a dataset and write tables, grids and heatmaps.
    Trace(TraceArgs),
    /// Force-align a transcript against frame emissions.
    Align(AlignArgs),
    /// Keep the records a model answers correctly.
    Filter(FilterArgs),
    /// Export tables and heatmaps for saved grids.
    Report(ReportArgs),
    /// Write the planted-fact demo bundle.
    Fixture(FixtureArgs),
}

/// Output directory shared by every command.
#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, short = 'o', env = "CMTRACE_OUTPUT_DIR", default_value = "cmtrace-out")]
    pub output_dir: PathBuf,
}

impl OutputArgs {
    pub fn prepare(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.output_dir).with_context(|| format!("creating {}", self.output_dir.display()))?;
        Ok(&self.output_dir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    #[value(alias = "text")]
    T2t,
    #[value(alias = "speech")]
    S2t,
}

impl ModalityArg {
    pub fn modality(self) -> Modality {
        match self {
            ModalityArg::T2t => Modality::Text,
            ModalityArg::S2t => Modality::Speech,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModalityArg::T2t => "t2t",
            ModalityArg::S2t => "s2t",
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        anyhow::ensure!(n > 0, "--jobs must be at least 1");
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building worker pool")?;
    pool.install(|| match cli.command {
        Command::Trace(a) => cmd_trace(&a).map(|s| println!("{s}")),
        Command::Align(a) => cmd_align(&a).map(|n| println!("aligned {n} spoken tokens")),
        Command::Filter(a) => cmd_filter(&a).map(|s| println!("{s}")),
        Command::Report(a) => cmd_report(&a).map(|n| println!("reported {n} grid(s)")),
        Command::Fixture(a) => cmd_fixture(&a).map(|p| println!("fixture written to {}", p.display())),
    })
}

/// Bad invocation, as opposed to a failure while processing valid inputs.
/// The binary exits with status 2 for these, like argument errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Exit status for a failed command: 2 for usage errors, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        2
    } else {
        1
    }
}

pub(crate) fn require_files(paths: &[(&str, &Path)]) -> Result<()> {
    for (flag, path) in paths {
        if !path.is_file() {
            return Err(UsageError(format!("{flag}: {} does not exist or is not a file", path.display())).into());
        }
    }
    Ok(())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
