//! Command-line runner for scenario configs.
//!
//! Exit codes: 0 all checks pass, 1 a check fails, 2 config or I/O error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wick_lab::config::{Format, ScenarioConfig};
use wick_lab::report::{json, samples_csv, RunReport};
use wick_lab::runner::{convergence_study, kernel_samples, run_scenario, strip_samples, Group, Options};
use wick_lab::Error;

#[derive(Parser)]
#[command(name = "wick-lab", version, about = "Calderón, two-point and Wick-rotation checks for scenario configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hypotheses and the discrete elliptic operator.
    Check(Common),
    /// Calderón identities.
    Calderon(Common),
    /// Two-point function properties; also writes `kernel.csv`.
    Twopoint(Common),
    /// Two-time Wick continuation.
    Wick(Common),
    /// KMS identities; also writes `strip.csv`.
    Kms(Common),
    /// Refinement study of the discretized checks.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Number of refinement levels (at least 3).
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Every check listed in the config.
    All(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario config file.
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format, `csv` or `json` (overrides `output.format`).
    #[arg(long)]
    format: Option<String>,
    /// Largest Fourier index `|m|` (overrides `sigma.mode_max`).
    #[arg(long)]
    modes: Option<usize>,
    /// Multiplies every tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

struct Loaded {
    cfg: ScenarioConfig,
    out: PathBuf,
    format: Format,
    opts: Options,
}

fn load(c: &Common) -> Result<Loaded, Error> {
    let cfg = ScenarioConfig::load(&c.config)?;
    let format = match &c.format {
        Some(f) => Format::parse(f).ok_or_else(|| Error::config("--format", format!("expected csv or json, got {f:?}")))?,
        None => cfg.format,
    };
    if !(c.tol_scale >= 0.0) {
        return Err(Error::config("--tol-scale", format!("must be non-negative, got {}", c.tol_scale)));
    }
    let out = c.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok(Loaded { opts: Options { mode_max: c.modes, tol_scale: c.tol_scale }, cfg, out, format })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Io(_) => 2,
        _ => 3,
    }
}

fn summarize(report: &RunReport) {
    println!("scenario {} ({})", report.scenario, &report.config_hash[..12]);
    for c in &report.checks {
        let status = if c.failures == 0 { "pass" } else { "FAIL" };
        println!("  {:<24} {status}  {:>4} records  worst {:.3e}  {:.2}s", c.check.name(), c.records, c.worst_residual, c.seconds);
    }
    for r in report.failures() {
        println!("  failed: {} mode {} residual {:.3e} > {:.3e}", r.check.name(), r.mode, r.residual, r.tolerance);
    }
    println!("{} in {:.2}s", if report.pass { "PASS" } else { "FAIL" }, report.seconds);
}

fn run_group(c: &Common, group: Group) -> Result<bool, Error> {
    let l = load(c)?;
    let report = run_scenario(&l.cfg, group, l.opts)?;
    report.write(&l.out, l.format)?;
    let mut cfg = l.cfg.clone();
    if let Some(m) = l.opts.mode_max {
        cfg.mode_max = m;
    }
    let m = cfg.mode_max.min(1) as i32;
    match group {
        Group::TwoPoint => std::fs::write(l.out.join("kernel.csv"), samples_csv(&cfg.name, "kernel", &kernel_samples(&cfg, m, 81)?))?,
        Group::Kms => std::fs::write(l.out.join("strip.csv"), samples_csv(&cfg.name, "strip", &strip_samples(&cfg, m, 81)?))?,
        _ => {}
    }
    summarize(&report);
    Ok(report.pass)
}

fn converge(c: &Common, levels: usize) -> Result<bool, Error> {
    let l = load(c)?;
    let study = convergence_study(&l.cfg, levels, l.opts)?;
    std::fs::create_dir_all(&l.out)?;
    write(&l.out.join("convergence.csv"), &study.to_csv())?;
    write(&l.out.join("convergence.json"), &json(&study))?;
    println!("scenario {}", study.scenario);
    println!("  {:<24} {:>6} {:>6} {:>12} {:>8}", "check", "n_s", "n_t", "residual", "order");
    for r in &study.rows {
        let order = match (r.order, r.at_floor) {
            (_, true) => "floor".into(),
            (Some(o), false) => format!("{o:.2}"),
            (None, false) => "-".into(),
        };
        println!("  {:<24} {:>6} {:>6} {:>12.3e} {:>8}", r.check.name(), r.n_s, r.n_t, r.residual, order);
    }
    for (id, target, got) in &study.targets {
        let got = got.map_or("floor".to_string(), |o| format!("{o:.2}"));
        println!("  {:<24} required {target:.1}, observed {got}", id.name());
    }
    println!("{}", if study.pass { "PASS" } else { "FAIL" });
    Ok(study.pass)
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    Ok(std::fs::write(path, text)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, cfg_path) = match &cli.command {
        Command::Check(c) => (run_group(c, Group::Check), &c.config),
        Command::Calderon(c) => (run_group(c, Group::Calderon), &c.config),
        Command::Twopoint(c) => (run_group(c, Group::TwoPoint), &c.config),
        Command::Wick(c) => (run_group(c, Group::Wick), &c.config),
        Command::Kms(c) => (run_group(c, Group::Kms), &c.config),
        Command::Converge { common, levels } => (converge(common, *levels), &common.config),
        Command::All(c) => (run_group(c, Group::All), &c.config),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}: {e}", cfg_path.display());
            ExitCode::from(exit_code(&e))
        }
    }
}
