//! `curvhom`: verify curvature closed forms, classify homogeneity and
//! tabulate invariants over sample grids.
//!
//! Exit codes: 0 ok, 1 check failure, 2 configuration or parse error,
//! 3 hypotheses violated at every sample point.

mod config;
mod render;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curvhom::classify::{ClassifyOptions, Execution};
use curvhom::verify::CheckStatus;
use curvhom::{classify, invariant_table, verify};

use config::{ConfigError, Format, RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "curvhom", version, about = "Curvature homogeneity checks for three-dimensional metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare the curvature engine with the closed forms and check the identities.
    Verify(RunArgs),
    /// Report curvature homogeneity verdicts over the grid.
    Classify(RunArgs),
    /// Tabulate invariants at each grid point.
    Invariants(RunArgs),
}

const EXIT_OK: u8 = 0;
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_HYPOTHESIS: u8 = 3;

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

fn execution(cfg: &RunConfig) -> Execution {
    if cfg.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn emit(cfg: &RunConfig, body: &str) -> Result<(), RunError> {
    match &cfg.output {
        Some(path) => fs::write(path, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn run_verify(args: &RunArgs) -> Result<u8, RunError> {
    let cfg = args.resolve()?;
    let report = verify(&cfg.spec, &cfg.samples, cfg.order, execution(&cfg)).map_err(|e| RunError::Usage(e.to_string()))?;
    let body = match cfg.format {
        Format::Json => render::json(&report),
        Format::Text => render::verify_text(&report),
        Format::Csv => return Err(RunError::Usage("csv output is only available for `invariants`".into())),
    };
    emit(&cfg, &body)?;
    Ok(if report.all_points_excluded() {
        EXIT_HYPOTHESIS
    } else if report.verdicts.iter().any(|v| v.status == CheckStatus::Fail) {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    })
}

fn run_classify(args: &RunArgs) -> Result<u8, RunError> {
    let cfg = args.resolve()?;
    let opts = ClassifyOptions { order: cfg.order, tol: cfg.tol, execution: execution(&cfg) };
    let report = classify(&cfg.spec, &cfg.samples, opts).map_err(|e| RunError::Usage(e.to_string()))?;
    let body = match cfg.format {
        Format::Json => render::json(&report),
        Format::Text => render::classify_text(&report),
        Format::Csv => return Err(RunError::Usage("csv output is only available for `invariants`".into())),
    };
    emit(&cfg, &body)?;
    let inconsistent = report.verdicts.iter().any(|v| v.notes.iter().any(|n| n.starts_with("downgraded")));
    Ok(if report.all_points_violate_hypotheses() {
        EXIT_HYPOTHESIS
    } else if inconsistent {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    })
}

fn run_invariants(args: &RunArgs) -> Result<u8, RunError> {
    let cfg = args.resolve()?;
    let table = invariant_table(&cfg.spec, &cfg.samples, cfg.order, execution(&cfg)).map_err(|e| RunError::Usage(e.to_string()))?;
    let body = match cfg.format {
        Format::Json => render::json(&render::invariants_report(&cfg, &table)),
        Format::Csv => render::invariants_csv(&table)?,
        Format::Text => render::invariants_text(&table),
    };
    emit(&cfg, &body)?;
    Ok(if table.all_rows_excluded() { EXIT_HYPOTHESIS } else { EXIT_OK })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => run_verify(a),
        Command::Classify(a) => run_classify(a),
        Command::Invariants(a) => run_invariants(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
