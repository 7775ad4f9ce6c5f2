//! `ratefit`: simulate measurements, fit them, and run the cross-method
//! comparison.

mod config;
mod error;
mod fit;
mod simulate;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ratefit_core::pipeline::{ramsey_ensemble, run_pipeline, EnsembleReport, PipelineReport};
use serde::Serialize;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::fit::FitKind;
use crate::simulate::SimKind;

#[derive(Parser)]
#[command(name = "ratefit", version, about = "Decay rates of a qubit coupled to a waveguide")]
struct Cli {
    /// Suppress everything but errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Noise seed; overrides `chain.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic measurement as CSV.
    Simulate {
        #[arg(value_enum)]
        kind: SimKind,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a CSV measurement and write the result as JSON.
    Fit {
        #[arg(value_enum)]
        kind: FitKind,
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every method on one device and compare the rates.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Serialize)]
struct Meta<'a> {
    schema_version: u32,
    command: &'a str,
    kind: Option<&'a str>,
    seed: u64,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct PipelineOutput<'a> {
    #[serde(flatten)]
    report: &'a PipelineReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<&'a EnsembleReport>,
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.chain.seed = seed;
    }
    Ok(cfg)
}

fn write_meta(common: &Common, command: &str, kind: Option<&str>, cfg: &RunConfig) -> Result<(), CliError> {
    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        command,
        kind,
        seed: cfg.chain.seed,
        config: cfg,
    };
    write_json(&sidecar(&common.out), &meta)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("RATEFIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Schema(format!("RATEFIT_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { kind, common } => {
            let cfg = load(&common)?;
            simulate::simulate(kind, &cfg, &common.out)?;
            write_meta(&common, "simulate", Some(kind.name()), &cfg)?;
            if !cli.quiet {
                eprintln!("wrote {}", common.out.display());
            }
            Ok(())
        }
        Command::Fit { kind, data, common } => {
            let cfg = load(&common)?;
            let t = table::read_table(&data)?;
            let report = fit::fit(kind, &t, &cfg)?;
            write_json(&common.out, &report)?;
            write_meta(&common, "fit", Some(kind.name()), &cfg)?;
            if !cli.quiet {
                for p in &report.params {
                    println!("{:>12} = {:.6e} ± {:.2e} {}", p.name, p.value, p.sigma, p.unit);
                }
                println!("reduced chi2 = {:.4}", report.reduced_chi2);
            }
            if !report.all_converged() {
                return Err(CliError::NotConverged(format!(
                    "{} fit stopped after {} iterations; result written to {}",
                    kind.name(),
                    report.n_iter,
                    common.out.display()
                )));
            }
            Ok(())
        }
        Command::Pipeline { common } => {
            let cfg = load(&common)?;
            let pc = cfg.pipeline_config()?;
            let report = run_pipeline(&pc)?;
            let ensemble = match &cfg.pipeline.ensemble {
                Some(e) => Some(ramsey_ensemble(&pc.device, &pc.chain, e)?),
                None => None,
            };
            write_json(
                &common.out,
                &PipelineOutput {
                    report: &report,
                    ensemble: ensemble.as_ref(),
                },
            )?;
            write_meta(&common, "pipeline", None, &cfg)?;
            if !cli.quiet {
                print!("{}", report.table());
                if let Some(e) = &ensemble {
                    println!(
                        "ensemble: {} traces, Γ₂ width {:.2} kHz, typical error {:.2} kHz, ratio {:.2}",
                        e.gamma_2.len(),
                        e.excess * e.typical_error_hz / 1e3,
                        e.typical_error_hz / 1e3,
                        e.excess
                    );
                }
            }
            if report.failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::RowsFailed(report.failed.clone()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ratefit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
