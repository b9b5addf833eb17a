//! Command-line front end for the adaptive clustering experiment runner.
//!
//! `run` executes a configured experiment and writes CSV reports; `ingest`
//! validates a directory of proximity matrices without running anything.
//! Exit codes: 0 on success, 2 when the configuration is at fault, 3 when
//! execution fails.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use affect::io;
use affect::runner::{self, RunConfig};
use affect::{Error, ProximityKind};

#[derive(Parser)]
#[command(name = "affect", version, about = "Adaptive clustering of time-varying proximity data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write metrics.csv, alpha.csv and
    /// summary.csv to the output directory.
    Run {
        /// TOML experiment description.
        #[arg(long)]
        config: PathBuf,
        /// Override the number of replicated runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Override the base random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the report directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a directory of step_NNNN.csv proximity matrices and report
    /// its contents.
    Ingest {
        /// Directory holding the step files.
        #[arg(long)]
        dir: PathBuf,
        /// How matrix entries are interpreted.
        #[arg(long, value_enum)]
        kind: KindArg,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum KindArg {
    Similarity,
    Dissimilarity,
}

impl From<KindArg> for ProximityKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Similarity => ProximityKind::Similarity,
            KindArg::Dissimilarity => ProximityKind::Dissimilarity,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn config_failure(error: Error) -> Failure {
    Failure {
        code: 2,
        message: error.to_string(),
    }
}

fn runtime_failure(error: Error) -> Failure {
    Failure {
        code: 3,
        message: error.to_string(),
    }
}

/// Errors surfacing mid-run: a bad derived configuration is still the
/// config's fault, everything else is an execution failure.
fn split_failure(error: Error) -> Failure {
    match error {
        Error::BadConfig(_) => config_failure(error),
        other => runtime_failure(other),
    }
}

/// Writes one status line, treating a closed pipe as silence so piping
/// through `head` does not abort the command.
fn emit(line: std::fmt::Arguments) -> Result<(), Failure> {
    match writeln!(std::io::stdout(), "{line}") {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure {
            code: 3,
            message: e.to_string(),
        }),
    }
}

fn run_command(
    path: &Path,
    runs: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut config: RunConfig = runner::load_config(path).map_err(config_failure)?;
    if let Some(runs) = runs {
        config.runs = runs;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.out = Some(out.to_string_lossy().into_owned());
    }
    let dir = runner::output_dir(&config);
    let result = runner::run_experiment(&config).map_err(split_failure)?;
    runner::write_reports(&result, &dir).map_err(runtime_failure)?;
    for row in &result.summary {
        match (row.mean_rand, row.std_error) {
            (Some(mean), Some(se)) => {
                emit(format_args!("{}: mean rand {mean:.4} (se {se:.4})", row.method))?
            }
            _ => emit(format_args!("{}: no ground truth", row.method))?,
        }
    }
    emit(format_args!("reports written to {}", dir.display()))?;
    Ok(())
}

fn ingest_command(dir: &Path, kind: ProximityKind) -> Result<(), Failure> {
    let files = io::step_files(dir).map_err(runtime_failure)?;
    for path in &files {
        let matrix = io::read_proximity_csv(path, kind).map_err(runtime_failure)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        emit(format_args!("{name}: {} objects", matrix.ids().len()))?;
    }
    emit(format_args!("ok: {} steps", files.len()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            runs,
            seed,
            out,
        } => run_command(&config, runs, seed, out),
        Command::Ingest { dir, kind } => ingest_command(&dir, kind.into()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
