//! Batch runner: selects identity checks, executes them, and writes one
//! report file per check. Exit code is the suite verdict: 0 all pass,
//! 1 any fail, 3 any inconclusive without a failure, 2 configuration or
//! output errors.

mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_model, ConfigError, RunConfig, SimModel};
use qsigma::{IdentityReport, TimeGrid, Verdict};

#[derive(Parser)]
#[command(name = "qsigma", version, about = "Identity verification suites for last-passage measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key = value config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per estimator side.
    #[arg(long)]
    samples: Option<u64>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity suite (default or configured selection).
    Verify(CommonArgs),
    /// Run the put-price last-passage report.
    Price(CommonArgs),
    /// Run the zero-set age identity suite.
    Azema(CommonArgs),
    /// Dump one simulated path as CSV (time, value per row).
    Simulate(CommonArgs),
}

fn resolve(common: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => config::parse_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = common.samples {
        cfg.n = n;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(format) = &common.format {
        cfg.format = format.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn suite_exit(reports: &[IdentityReport]) -> ExitCode {
    let any_fail = reports.iter().any(|r| r.verdict == Verdict::Fail);
    let any_open = reports.iter().any(|r| r.verdict == Verdict::Inconclusive);
    if any_fail {
        ExitCode::from(1)
    } else if any_open {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn print_summary(reports: &[IdentityReport]) {
    for r in reports {
        println!(
            "{:<12} {}  lhs {:.6} (se {:.2e})  rhs {:.6} (se {:.2e})  z {:+.3}  budget {:.2e}",
            r.verdict.to_string(),
            r.id,
            r.lhs.mean,
            r.lhs.stderr,
            r.rhs.mean,
            r.rhs.stderr,
            r.z,
            r.bias_budget
        );
    }
    let pass = reports.iter().filter(|r| r.verdict == Verdict::Pass).count();
    let fail = reports.iter().filter(|r| r.verdict == Verdict::Fail).count();
    let open = reports.len() - pass - fail;
    println!("suite: {} reports, {pass} pass, {fail} fail, {open} inconclusive", reports.len());
}

fn emit_and_conclude(cfg: &RunConfig, reports: Vec<IdentityReport>) -> ExitCode {
    match emit::write_reports(&cfg.out, cfg.format, &reports) {
        Ok(paths) => {
            print_summary(&reports);
            println!("wrote {} report file(s) under {}", paths.len(), cfg.out.display());
            suite_exit(&reports)
        }
        Err(e) => {
            eprintln!("cannot write reports under {}: {e}", cfg.out.display());
            ExitCode::from(2)
        }
    }
}

fn run_reports(
    cfg: &RunConfig,
    selection: Option<&[String]>,
) -> Result<Vec<IdentityReport>, qsigma::EngineError> {
    qsigma::run_suite(&cfg.verify_config(), selection)
}

fn cmd_verify(common: &CommonArgs) -> ExitCode {
    let cfg = match resolve(common) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    match run_reports(&cfg, cfg.identities.as_deref()) {
        Ok(reports) => emit_and_conclude(&cfg, reports),
        Err(e) => engine_failure(&e),
    }
}

fn cmd_fixed_selection(common: &CommonArgs, ids: &[&str]) -> ExitCode {
    let cfg = match resolve(common) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    let selection: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
    match run_reports(&cfg, Some(&selection)) {
        Ok(reports) => emit_and_conclude(&cfg, reports),
        Err(e) => engine_failure(&e),
    }
}

fn cmd_simulate(common: &CommonArgs) -> ExitCode {
    let cfg = match resolve(common) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    let model = match parse_model(cfg.model.as_deref().unwrap_or("bm")) {
        Ok(m) => m,
        Err(e) => return config_failure(&e),
    };
    let grid = match TimeGrid::new(cfg.step, cfg.horizon) {
        Ok(g) => g,
        Err(e) => return engine_failure(&e),
    };
    let values = match simulate_values(model, cfg.seed, &grid) {
        Ok(v) => v,
        Err(e) => return engine_failure(&e),
    };
    let mut body = String::from("time,value\n");
    for (i, v) in values.iter().enumerate() {
        body.push_str(&format!("{:.16e},{:.16e}\n", grid.time(i), v));
    }
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        eprintln!("cannot create output directory {}: {e}", cfg.out.display());
        return ExitCode::from(2);
    }
    let path = cfg.out.join("path.csv");
    match std::fs::write(&path, body) {
        Ok(()) => {
            println!("wrote {} ({} points)", path.display(), values.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cannot write {}: {e}", path.display());
            ExitCode::from(2)
        }
    }
}

fn simulate_values(
    model: SimModel,
    seed: u64,
    grid: &TimeGrid,
) -> Result<Vec<f64>, qsigma::EngineError> {
    Ok(match model {
        SimModel::Bm => qsigma::simulate_bm(seed, grid, 0.0).values,
        SimModel::AbsBm => qsigma::sigma::build_abs_bm_levy(seed, grid).x,
        SimModel::ExpMart => qsigma::simulate_exp_martingale(seed, grid, 1.0)?.values,
        SimModel::Bessel3 => qsigma::simulate_bessel(seed, grid, 3.0, 0.0)?.values,
        SimModel::Bessel(delta) => qsigma::simulate_bessel(seed, grid, delta, 0.0)?.values,
    })
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("configuration error: {e}");
    ExitCode::from(2)
}

fn engine_failure(e: &qsigma::EngineError) -> ExitCode {
    eprintln!("configuration error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Verify(common) => cmd_verify(common),
        Command::Price(common) => cmd_fixed_selection(common, &["pricing"]),
        Command::Azema(common) => {
            cmd_fixed_selection(common, &["azema_identity_const", "azema_identity_window", "azema_slope"])
        }
        Command::Simulate(common) => cmd_simulate(common),
    }
}
