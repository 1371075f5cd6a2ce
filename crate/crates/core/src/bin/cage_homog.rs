//! Command-line front end: studies, single solves and the check battery,
//! all driven by a declarative TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cage_homog::geometry::build_mesh;
use cage_homog::harness::{self, FaultMode, StudyConfig};
use cage_homog::problems::{solve_delta_problem, solve_limit, ResonanceGate};
use cage_homog::vtk;

#[derive(Parser)]
#[command(
    name = "cage-homog",
    about = "Helmholtz solvers and homogenization studies for thin high-contrast shielding layers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Study configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override worker count for independent cases.
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArg {
    fn load(&self) -> anyhow::Result<StudyConfig> {
        let mut cfg = StudyConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the layer-resolved problem at one δ and report norms.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        /// Number of periods N (δ = extent/N); defaults to the first list entry.
        #[arg(long)]
        periods: Option<usize>,
    },
    /// Solve the interface limit problem.
    Limit {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Solve the strip cell problem and fit the corrector decay.
    Cell {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// δ-convergence study against the limit solution.
    Converge {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// θ-regularization convergence at fixed δ.
    Regularize {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Transmitted/interface energy vs δ, with a contrast ablation sweep.
    Shielding {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Explicit coercivity/ellipticity constants and a-priori bounds.
    Constants {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        omega: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        diam: f64,
        #[arg(long, default_value_t = 1.0)]
        fnorm: f64,
    },
    /// Run the seeded invariant battery (nonzero exit on failure).
    Check {
        #[command(flatten)]
        config: ConfigArg,
        /// Fault-injection mode for self-test of the battery.
        #[arg(long, value_parser = ["unfold-index"])]
        fault: Option<String>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { config, periods } => {
            let cfg = config.load()?;
            let n = periods.unwrap_or(cfg.study.delta_periods[0]);
            let spec = cfg.domain_spec()?;
            let pattern = cfg.layer_pattern()?;
            let mesh = build_mesh(&spec, &pattern, &cfg.mesh_params(n))?;
            let rep = solve_delta_problem(&mesh, &cfg.physical_params(), ResonanceGate::Check)?;
            emit_report(&cfg, "solve", &rep.summary)?;
            if cfg.output.write_vtk {
                let p = cfg.output.dir.join(format!("u_delta_n{n}.vtk"));
                vtk::write_field(&mesh, &rep.field, "u_delta", &p)?;
                let m = cfg.output.dir.join(format!("mesh_n{n}.vtk"));
                vtk::write_mesh(&mesh, &m)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Limit { config } => {
            let cfg = config.load()?;
            let spec = cfg.domain_spec()?;
            let pattern = cfg.layer_pattern()?;
            let mesh = build_mesh(&spec, &pattern, &cfg.limit_mesh_params())?;
            let rep = solve_limit(&mesh, &cfg.physical_params(), ResonanceGate::Check)?;
            emit_report(&cfg, "limit", &rep.summary)?;
            if cfg.output.write_vtk {
                vtk::write_field(&mesh, &rep.field, "u", &cfg.output.dir.join("u_limit.vtk"))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Cell { config } => {
            let cfg = config.load()?;
            let out = harness::run_cell_study(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&out.summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Converge { config } => {
            let cfg = config.load()?;
            let out = harness::run_converge_delta(&cfg)?;
            print_fits(&out);
            Ok(ExitCode::SUCCESS)
        }
        Command::Regularize { config } => {
            let cfg = config.load()?;
            let out = harness::run_regularize_theta(&cfg)?;
            print_fits(&out);
            Ok(ExitCode::SUCCESS)
        }
        Command::Shielding { config } => {
            let cfg = config.load()?;
            let out = harness::run_shielding(&cfg)?;
            print_fits(&out);
            Ok(ExitCode::SUCCESS)
        }
        Command::Constants { alpha, tau, omega, theta, diam, fnorm } => {
            let report =
                cage_homog::constants::constant_report(alpha, tau, omega, theta, diam, fnorm)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { config, fault } => {
            let cfg = config.load()?;
            let fault = match fault.as_deref() {
                None => None,
                Some("unfold-index") => Some(FaultMode::UnfoldIndexSwap),
                Some(other) => bail!("unknown fault mode {other}"),
            };
            let report = harness::run_check_ops(&cfg, fault)?;
            for case in &report.cases {
                println!(
                    "{} {}: {}",
                    if case.pass { "PASS" } else { "FAIL" },
                    case.name,
                    case.detail
                );
            }
            if report.all_pass() {
                println!("all {} checks passed", report.cases.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{} of {} checks failed", report.failures().len(), report.cases.len());
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn emit_report(
    cfg: &StudyConfig,
    name: &str,
    summary: &impl serde::Serialize,
) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    println!("{text}");
    std::fs::create_dir_all(&cfg.output.dir)?;
    std::fs::write(cfg.output.dir.join(format!("{name}_report.json")), format!("{text}\n"))?;
    Ok(())
}

fn print_fits(out: &harness::StudyOutputs) {
    for fit in &out.table.fits {
        println!(
            "{}: slope {:+.4} (residual {:.2e}, {} points{})",
            fit.norm,
            fit.slope,
            fit.residual,
            fit.points,
            if fit.low_confidence { ", low confidence" } else { "" }
        );
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
}
