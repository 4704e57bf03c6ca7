// `!(a < b)` is used on purpose: NaN has to fail these checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use ssf_core::checks::{run_suite, SUITES};
use ssf_core::engine::{
    determinant_trace, invariance_theta_samples, mu_via_flow, mu_via_index, sweep, FlowRoute,
    MuFunction, SsfConfig, SsfRecord,
};

use config::{Format, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Failure(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failure(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ssf-lab",
    version,
    about = "Spectral shift function sweeps, μ computations and property checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Flow,
    Index,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// ξ(λ) on the configured grid, one record per λ.
    Ssf {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, env = "SSF_LAB_JOBS", default_value_t = 1)]
        jobs: usize,
    },
    /// μ(·; λ) as a step function on the circle.
    Mu {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, value_enum, default_value = "flow")]
        method: MethodArg,
    },
    /// Samples of D(λ + iy) with the continued argument.
    Det {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
    },
    /// Seeded property suite.
    Check {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json_line<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

/// Same number formatting as the JSON-lines output; `None` is an empty cell.
fn cell<T: Serialize>(v: Option<T>) -> String {
    v.and_then(|x| serde_json::to_string(&x).ok())
        .unwrap_or_default()
}

fn write_csv(out: Box<dyn Write>, records: &[SsfRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Io(io::Error::other(e));
    w.write_record([
        "lambda",
        "xi_det",
        "xi_mu",
        "xi_index",
        "xi_oracle",
        "bk_defect",
    ])
    .map_err(csv_err)?;
    for r in records {
        w.write_record([
            cell(Some(r.lambda)),
            cell(r.xi_det),
            cell(r.xi_mu),
            cell(r.xi_index),
            cell(r.xi_oracle),
            cell(r.bk_defect),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_ssf(
    config: &Path,
    out: Option<PathBuf>,
    format: Option<Format>,
    jobs: usize,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let model = cfg.build_model()?;
    let lambdas = cfg
        .lambda_grid
        .as_ref()
        .ok_or_else(|| CliError::Config("lambda_grid is required for ssf".into()))?
        .points();
    let ssf_cfg = SsfConfig {
        flow: cfg.flow_config(),
        det: cfg.det_config(&model),
        route: FlowRoute::Scattering,
        transform: cfg.transform,
        jobs,
    };
    let records = sweep(&model, &lambdas, &ssf_cfg);
    let path = out.or(cfg.output.path.clone());
    let mut w = open_output(path.as_deref())?;
    match format.unwrap_or(cfg.output.format) {
        Format::Jsonl => {
            for r in &records {
                write_json_line(&mut *w, r)?;
            }
            w.flush()?;
        }
        Format::Csv => write_csv(w, &records)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct MuComparison<'a> {
    lambda: f64,
    flow: &'a MuFunction,
    index: &'a MuFunction,
    equal: bool,
    /// Largest `|μ_flow − μ_index|` over the sampled phases.
    max_defect: i64,
}

fn cmd_mu(config: &Path, lambda: f64, method: MethodArg) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let model = cfg.build_model()?;
    let flow_cfg = cfg.flow_config();
    let fail = |e: ssf_core::engine::EngineError| CliError::Failure(format!("λ = {lambda}: {e}"));
    let mut out = open_output(None)?;
    match method {
        MethodArg::Flow => {
            let mu = mu_via_flow(&model, lambda, &flow_cfg, FlowRoute::Scattering).map_err(fail)?;
            write_json_line(&mut *out, &mu)?;
        }
        MethodArg::Index => {
            let mu = mu_via_index(&model, lambda).map_err(fail)?;
            write_json_line(&mut *out, &mu)?;
        }
        MethodArg::Both => {
            let flow =
                mu_via_flow(&model, lambda, &flow_cfg, FlowRoute::Scattering).map_err(fail)?;
            let index = mu_via_index(&model, lambda).map_err(fail)?;
            let n = cfg.theta_samples;
            let mut thetas = invariance_theta_samples(&[&flow, &index]);
            thetas.extend((0..n).map(|k| (k as f64 + 0.5) * std::f64::consts::TAU / n as f64));
            let max_defect = thetas
                .iter()
                .map(|&t| (flow.value_at(t) - index.value_at(t)).abs())
                .max()
                .unwrap_or(0);
            let equal = max_defect == 0;
            write_json_line(
                &mut *out,
                &MuComparison {
                    lambda,
                    flow: &flow,
                    index: &index,
                    equal,
                    max_defect,
                },
            )?;
            out.flush()?;
            if !equal {
                return Err(CliError::Failure(format!(
                    "MethodDisagreement: μ by flow and by index differ at λ = {lambda}"
                )));
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_det(config: &Path, lambda: f64) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let model = cfg.build_model()?;
    let trace = determinant_trace(&model, lambda, &cfg.det_config(&model))
        .map_err(|e| CliError::Failure(format!("λ = {lambda}: {e}")))?;
    let mut out = open_output(None)?;
    write_json_line(&mut *out, &trace)?;
    out.flush()?;
    Ok(())
}

fn cmd_check(suite: &str, seed: u64) -> Result<(), CliError> {
    let report = run_suite(suite, seed).ok_or_else(|| {
        CliError::Config(format!(
            "unknown suite {suite:?}; expected one of {}",
            SUITES.join(", ")
        ))
    })?;
    let mut out = open_output(None)?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .criteria
            .iter()
            .filter(|t| !t.passed())
            .map(|t| t.name.as_str())
            .collect();
        Err(CliError::Failure(format!("failed: {}", failed.join("; "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ssf {
            config,
            out,
            format,
            jobs,
        } => cmd_ssf(&config, out, format, jobs),
        Command::Mu {
            config,
            lambda,
            method,
        } => cmd_mu(&config, lambda, method),
        Command::Det { config, lambda } => cmd_det(&config, lambda),
        Command::Check { suite, seed } => cmd_check(&suite, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ssf-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
