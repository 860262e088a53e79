//! `retrodict`: preparation/measurement probability tables from device files.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, every cross-check within tolerance |
//! | 2 | usage error |
//! | 3 | file could not be read or written |
//! | 4 | syntax or schema error in the device file |
//! | 5 | validation error (non-Hermitian, not PSD, bad basis, ...) |
//! | 6 | numerical failure or degenerate device pair |
//! | 7 | an internal cross-check exceeded its tolerance |

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use retrodict_core::io::{conditional_csv, frequency_csv, joint_csv, log_csv, parse_device_file, Setup};
use retrodict_core::probability::{joint, predictive, retrodictive};
use retrodict_core::scenarios::belinfante_retrodictive;
use retrodict_core::sim::{run_experiment_chunked, tabulate, worker_count, RngSeed};
use retrodict_core::{Error, Tolerances};

use report::{Builder, Document};

#[derive(Parser)]
#[command(
    name = "retrodict",
    version,
    about = "Predictive and retrodictive probabilities for preparation/measurement devices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Warn about unknown keys instead of rejecting the file.
    #[arg(long, global = true)]
    lenient: bool,

    #[arg(long, global = true, default_value_t = Tolerances::default().herm)]
    tol_herm: f64,
    #[arg(long, global = true, default_value_t = Tolerances::default().psd)]
    tol_psd: f64,
    #[arg(long, global = true, default_value_t = Tolerances::default().unitary)]
    tol_unitary: f64,
    #[arg(long, global = true, default_value_t = Tolerances::default().prop)]
    tol_prop: f64,
    #[arg(long, global = true, default_value_t = Tolerances::default().denom)]
    tol_denom: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct FileArg {
    /// Device definition file (JSON).
    file: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to available parallelism capped by RETRODICT_THREADS.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    chunks: Option<u64>,
    /// Also write the event log (trial,i,k) as CSV.
    #[arg(long)]
    log_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a device file.
    Validate(FileArg),
    /// Bias classification of both devices.
    Classify(FileArg),
    /// Joint distribution P(i,j) with marginals.
    Joint(FileArg),
    /// Predictive table P(j|i).
    Predict(FileArg),
    /// Retrodictive table P(i|j).
    Retrodict(FileArg),
    /// Retrodiction across the evolution block, computed both ways.
    EvolveRetrodict(FileArg),
    /// Garbled-state retrodiction for the scenario block.
    Belinfante(FileArg),
    /// Joint distribution rebuilt from the extended measurement.
    AppendixCheck(FileArg),
    /// Monte Carlo run of the preparation/measurement experiment.
    Simulate {
        #[command(flatten)]
        file: FileArg,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Every applicable section in one document.
    Report {
        #[command(flatten)]
        file: FileArg,
        /// Include a simulation with this many trials.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: Option<u64>,
        #[command(flatten)]
        sim: SimArgs,
    },
}

enum Failure {
    Usage(String),
    Core(Error),
    CrossCheck(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Syntax { .. } | Error::Schema { .. } => 4,
        Error::EigenFailure
        | Error::DegeneratePair(_)
        | Error::InternalNumerical { .. }
        | Error::NoTrials
        | Error::EmptyKeptSet => 6,
        _ => 5,
    }
}

impl Cli {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            herm: self.tol_herm,
            psd: self.tol_psd,
            unitary: self.tol_unitary,
            prop: self.tol_prop,
            denom: self.tol_denom,
        }
    }

    fn file(&self) -> &Path {
        match &self.command {
            Command::Validate(f)
            | Command::Classify(f)
            | Command::Joint(f)
            | Command::Predict(f)
            | Command::Retrodict(f)
            | Command::EvolveRetrodict(f)
            | Command::Belinfante(f)
            | Command::AppendixCheck(f) => &f.file,
            Command::Simulate { file, .. } | Command::Report { file, .. } => &file.file,
        }
    }

    fn name(&self) -> &'static str {
        match &self.command {
            Command::Validate(_) => "validate",
            Command::Classify(_) => "classify",
            Command::Joint(_) => "joint",
            Command::Predict(_) => "predict",
            Command::Retrodict(_) => "retrodict",
            Command::EvolveRetrodict(_) => "evolve-retrodict",
            Command::Belinfante(_) => "belinfante",
            Command::AppendixCheck(_) => "appendix-check",
            Command::Simulate { .. } => "simulate",
            Command::Report { .. } => "report",
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn chunks_for(sim: &SimArgs) -> usize {
    sim.chunks.map(|c| c as usize).unwrap_or_else(worker_count)
}

fn write_log(sim: &SimArgs, log: &retrodict_core::sim::ExperimentLog) -> Result<(), Error> {
    if let Some(path) = &sim.log_out {
        write_output(Some(path), &log_csv(log)?)?;
    }
    Ok(())
}

fn csv_output(cli: &Cli, setup: &Setup) -> Result<String, Failure> {
    let jd = || joint(&setup.prep, &setup.meas);
    Ok(match &cli.command {
        Command::Joint(_) => joint_csv(&jd()?)?,
        Command::Predict(_) => conditional_csv(&predictive(&jd()?))?,
        Command::Retrodict(_) => conditional_csv(&retrodictive(&jd()?))?,
        Command::Belinfante(_) => {
            let scenario = setup.scenario.as_ref().ok_or_else(|| Error::Schema {
                field: "scenario".into(),
                message: "this command needs the block".into(),
            })?;
            conditional_csv(&belinfante_retrodictive(scenario)?.pipeline)?
        }
        Command::Simulate { trials, sim, .. } => {
            let log = run_experiment_chunked(&setup.prep, &setup.meas, *trials, RngSeed(sim.seed), chunks_for(sim))?;
            write_log(sim, &log)?;
            frequency_csv(&tabulate(&log, &setup.prep, &setup.meas)?)?
        }
        _ => {
            return Err(Failure::Usage(format!(
                "`{}` has no CSV form; use --format json",
                cli.name()
            )))
        }
    })
}

fn document(cli: &Cli, setup: &Setup, warnings: Vec<String>) -> Result<Document, Failure> {
    let mut b = Builder::new(cli.name(), setup, cli.tolerances(), warnings);
    match &cli.command {
        Command::Validate(_) => b.devices(),
        Command::Classify(_) => b.classification()?,
        Command::Joint(_) => b.joint()?,
        Command::Predict(_) => b.predictive()?,
        Command::Retrodict(_) => b.retrodictive()?,
        Command::EvolveRetrodict(_) => b.evolution()?,
        Command::Belinfante(_) => b.belinfante()?,
        Command::AppendixCheck(_) => b.appendix()?,
        Command::Simulate { trials, sim, .. } => {
            let log = b.simulation(*trials, sim.seed, chunks_for(sim))?;
            write_log(sim, &log)?;
        }
        Command::Report { trials, sim, .. } => {
            b.devices();
            b.classification()?;
            b.joint()?;
            b.predictive()?;
            b.retrodictive()?;
            b.appendix()?;
            if setup.evolution.is_some() {
                b.evolution()?;
            }
            if setup.scenario.is_some() {
                b.belinfante()?;
            }
            if let Some(trials) = trials {
                let log = b.simulation(*trials, sim.seed, chunks_for(sim))?;
                write_log(sim, &log)?;
            }
        }
    }
    Ok(b.finish())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let parsed = parse_device_file(cli.file(), cli.lenient)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let setup = parsed.file.build(&cli.tolerances())?;
    if cli.format == Format::Csv {
        write_output(cli.out.as_deref(), &csv_output(cli, &setup)?)?;
        return Ok(());
    }
    let doc = document(cli, &setup, parsed.warnings)?;
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    write_output(cli.out.as_deref(), &text)?;
    let failed: Vec<String> = doc
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} deviation {:e} exceeds {:e}", c.name, c.value, c.tolerance))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::CrossCheck(failed))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::CrossCheck(failed)) => {
            for f in failed {
                eprintln!("cross-check failed: {f}");
            }
            ExitCode::from(7)
        }
    }
}
