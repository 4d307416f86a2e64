use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phasemi::design::{snr_db_to_sigma_sq, DesignBudget};
use phasemi::harness::{
    build_matrix, emit_frobenius, emit_results, prepare, run_complexity_sweep, run_frobenius_comparison,
    run_snr_sweep, verify, ExperimentConfig, MatrixLabel, OutputFormat, ResultTable, SoiSpec,
};
use phasemi::retrieval::Algorithm;
use phasemi::rng::stream_key;
use phasemi::{Error, MeasurementMatrix, RngStream};

/// Measurement matrix design for phase retrieval and Monte Carlo evaluation.
#[derive(Parser)]
#[command(name = "phasemi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one measurement matrix and write it as JSON.
    Design(DesignArgs),
    /// Mean recovery error against SNR at a fixed number of observations.
    SnrSweep(RunArgs),
    /// Mean recovery error against the ratio m/n at a fixed SNR.
    ComplexitySweep(RunArgs),
    /// Design objective of the optimized and identity-aligned designs.
    FrobeniusTable(RunArgs),
    /// Run the invariant checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Defaults to the standard sweep of the subcommand for the chosen SOI.
    #[arg(long)]
    config: Option<PathBuf>,
    /// SOI used when no config is given.
    #[arg(long, default_value = "sum_exponentials", value_parser = parse_soi)]
    soi: SoiSpec,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: OutputFormat,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_parser = parse_algorithm)]
    recovery: Option<Algorithm>,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    /// Matrix family: OK, UC, MF, RG, CD, UC_I or MF_I.
    #[arg(long, default_value = "UC", value_parser = parse_label)]
    label: MatrixLabel,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    snr_db: f64,
    /// Number of observations; defaults to the first cell of the config's sweep.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the outcomes as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_soi(s: &str) -> Result<SoiSpec, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_label(s: &str) -> Result<MatrixLabel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_COLLAPSE: u8 = 3;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::DesignCollapsed => EXIT_COLLAPSE,
        Error::InvalidArgument(_)
        | Error::InvalidBudget(_)
        | Error::Dimension(_)
        | Error::Serde(_)
        | Error::TooFewSamples { .. } => EXIT_VALIDATION,
        _ => 1,
    }
}

fn load_config(common: &Common, default: fn(SoiSpec) -> ExperimentConfig) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::read(path)?,
        None => default(common.soi),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn run_config(args: &RunArgs, default: fn(SoiSpec) -> ExperimentConfig) -> Result<ExperimentConfig, Error> {
    let mut config = load_config(&args.common, default)?;
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(recovery) = args.recovery {
        config.recovery = recovery;
    }
    config.validate()?;
    Ok(config)
}

fn finish_sweep(table: &ResultTable, out: &Path, format: OutputFormat) -> Result<u8, Error> {
    emit_results(table, out, format)?;
    for f in &table.failures {
        eprintln!("cell {} snr {} m {} failed: {}", f.label, f.snr_db, f.m, f.message);
    }
    Ok(if table.failures.iter().any(|f| f.collapsed) { EXIT_COLLAPSE } else { 0 })
}

fn design(args: &DesignArgs) -> Result<u8, Error> {
    let config = load_config(&args.common, ExperimentConfig::snr_default)?;
    config.validate()?;
    let m = args.m.unwrap_or(config.cells()[0].0);
    let budget = DesignBudget::unit_rows(m, config.n, snr_db_to_sigma_sq(args.snr_db))?;
    let prep = prepare(&config)?;
    let key = stream_key(&[b"design", args.label.as_str().as_bytes()]);
    let mut rng = RngStream::new(config.master_seed, key).generator();
    let entries = build_matrix(&prep, args.label, &budget, &config.design, &mut rng)?;
    MeasurementMatrix::new(args.label.as_str(), budget.p, entries)?.write(&args.out)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Design(args) => design(&args),
        Command::SnrSweep(args) => {
            let table = run_snr_sweep(&run_config(&args, ExperimentConfig::snr_default)?)?;
            finish_sweep(&table, &args.out, args.format)
        }
        Command::ComplexitySweep(args) => {
            let table = run_complexity_sweep(&run_config(&args, ExperimentConfig::complexity_default)?)?;
            finish_sweep(&table, &args.out, args.format)
        }
        Command::FrobeniusTable(args) => {
            let table = run_frobenius_comparison(&run_config(&args, ExperimentConfig::snr_default)?)?;
            emit_frobenius(&table, &args.out, args.format)?;
            Ok(0)
        }
        Command::Verify(args) => {
            let outcomes = verify::run_all(args.seed);
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            if let Some(path) = &args.out {
                let text = serde_json::to_string_pretty(&outcomes)? + "\n";
                std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            }
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { EXIT_VALIDATION })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
