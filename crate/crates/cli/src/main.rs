use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use memfem_core::assembly::Execution;
use memfem_core::scenario::{builtin_scenario, builtin_scenarios, run_setup, RunOptions, Scenario};
use memfem_core::solver::fd_tangent_audit;

/// Relative tolerance of the tangent audit.
const AUDIT_TOL: f64 = 1e-5;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "memfem",
    version,
    about = "Nonlinear solid and liquid membrane simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Run {
        config: PathBuf,
        /// Gauss points per direction, overriding the scenario.
        #[arg(long)]
        quadrature: Option<usize>,
        /// Assemble on one thread.
        #[arg(long)]
        strict_deterministic: bool,
        /// Directory for output files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// List the built-in scenarios, or print one as JSON.
    Scenarios {
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
    /// Compare analytic element tangents with finite differences.
    Audit {
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("MEMFEM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("MEMFEM_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn load(path: &Path) -> Result<Scenario, ExitCode> {
    Scenario::read(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn run(
    config: PathBuf,
    quadrature: Option<usize>,
    strict: bool,
    out: PathBuf,
) -> anyhow::Result<ExitCode> {
    let scenario = match load(&config) {
        Ok(s) => s,
        Err(code) => return Ok(code),
    };
    let setup = match scenario.setup(quadrature) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    let exec = if strict {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let opts = RunOptions {
        quadrature,
        exec,
        out_dir: out,
    };
    let outcome = match run_setup(&scenario, setup, &opts) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_SOLVER));
        }
    };
    for r in &outcome.rows {
        println!(
            "value={} volume={:.9} p_v={:.9} sigma_min={:.6e} iterations={}",
            r.value, r.volume, r.p_v, r.sigma_min, r.iterations
        );
    }
    if let Some(r) = outcome.rows.iter().find(|r| r.sigma_min < 0.0) {
        log::warn!(
            "compressive principal stress from value={} on (sigma_min={:.3e}); the membrane may wrinkle",
            r.value,
            r.sigma_min
        );
    }
    if let Some(rows) = &outcome.reference {
        let worst = rows.iter().filter_map(|r| r.rel_error).fold(0.0, f64::max);
        println!("reference max_rel_error={worst:.6e}");
    }
    for p in &outcome.written {
        log::info!("wrote {}", p.display());
    }
    match &outcome.trajectory.failure {
        None => Ok(ExitCode::SUCCESS),
        Some(reason) => {
            eprintln!(
                "solver failure after {} converged steps: {reason}",
                outcome.rows.len()
            );
            Ok(ExitCode::from(EXIT_SOLVER))
        }
    }
}

fn scenarios(show: Option<String>) -> anyhow::Result<ExitCode> {
    match show {
        None => {
            for b in builtin_scenarios() {
                println!("{:<16} {}", b.name, b.summary);
            }
        }
        Some(name) => {
            let Some(s) = builtin_scenario(&name) else {
                eprintln!("error: no built-in scenario named {name:?}");
                return Ok(ExitCode::from(EXIT_CONFIG));
            };
            println!("{}", s.to_json()?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn audit(config: PathBuf, samples: usize) -> anyhow::Result<ExitCode> {
    let scenario = match load(&config) {
        Ok(s) => s,
        Err(code) => return Ok(code),
    };
    let setup = match scenario.setup(None) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    let report = fd_tangent_audit(&setup.problem, &setup.state, samples, scenario.seed)?;
    for line in report.to_lines() {
        println!("{line}");
    }
    let worst = report.max_error();
    println!(
        "max_rel_error={worst:.3e} tolerance={AUDIT_TOL:e} pass={}",
        worst < AUDIT_TOL
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Run {
            config,
            quadrature,
            strict_deterministic,
            out,
        } => run(config, quadrature, strict_deterministic, out),
        Command::Scenarios { show } => scenarios(show),
        Command::Audit { config, samples } => audit(config, samples),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
