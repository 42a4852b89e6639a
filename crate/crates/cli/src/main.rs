//! `helmdef` command-line front end.

mod bench;
mod stencils;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use helmdef::io::{load_config, write_field, write_report, RunConfig};
use helmdef::parallel::resolve_workers;
use helmdef::{solve, ConvergenceReport, Executor, HelmError, PresetName, Problem};

/// Exit code of a solve that hit its iteration cap.
const EXIT_CAP: u8 = 2;

#[derive(Parser)]
#[command(name = "helmdef", version, about = "Multilevel deflation Helmholtz solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem.
    Solve(SolveArgs),
    /// Repeat a solve over a range of one parameter.
    Sweep(sweep::SweepArgs),
    /// Compare matrix-free and CSR matrix-vector products.
    Bench(bench::BenchArgs),
    /// Check the coarse-level stencils against the reference tables.
    Stencils(stencils::StencilArgs),
}

/// Configuration file plus flag overrides shared by `solve` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name: MADP_V1, MADP_V2, MADP_V3 or MADP.
    #[arg(long)]
    preset: Option<String>,
    /// Number of deflation levels.
    #[arg(long)]
    levels: Option<usize>,
    /// Worker threads (overrides HELMDEF_WORKERS and the config file).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for reports and fields.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Target k*h on the finest level (replaces a configured grid).
    #[arg(long)]
    kh: Option<f64>,
    /// Source frequency in Hz.
    #[arg(long = "freq-hz")]
    freq_hz: Option<f64>,
    /// Wavenumber for the constant-k problems.
    #[arg(long)]
    wavenumber: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    run: RunArgs,
}

/// Load the configuration and apply the flag overrides.
pub fn load_run(args: &RunArgs) -> Result<RunConfig, HelmError> {
    let path = args.config.as_ref().ok_or_else(|| HelmError::Config {
        line: 0,
        msg: "--config is required".into(),
    })?;
    let mut cfg = load_config(path)?;
    if let Some(p) = &args.preset {
        cfg.preset = p.parse::<PresetName>()?;
    }
    if let Some(l) = args.levels {
        cfg.levels = l;
        cfg.level_overrides.retain(|&k, _| k <= l);
    }
    if let Some(kh) = args.kh {
        cfg.kh = Some(kh);
        cfg.grid = None;
    }
    if let Some(f) = args.freq_hz {
        cfg.freq_hz = Some(f);
        cfg.wavenumber = None;
    }
    if let Some(k) = args.wavenumber {
        cfg.wavenumber = Some(k);
        cfg.freq_hz = None;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.workers = Some(resolve_workers(args.workers, cfg.workers)?);
    cfg.validate()?;
    Ok(cfg)
}

/// Solve `cfg` once; returns the problem and its report.
pub fn run_once(cfg: &RunConfig) -> Result<(Problem, helmdef::ComplexField, ConvergenceReport), HelmError> {
    let problem = cfg.build_problem()?;
    let solver = cfg.solver_config(&problem)?;
    let exec = Executor::for_hierarchy(&problem.hierarchy, cfg.workers.unwrap_or(1))?;
    let (u, report) = solve(&problem, &solver, &exec)?;
    Ok((problem, u, report))
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode, HelmError> {
    let cfg = load_run(&args.run)?;
    let (problem, u, report) = run_once(&cfg)?;
    let g = problem.hierarchy.finest();
    println!(
        "problem {} grid {}x{} levels {} preset {} workers {}",
        problem.name,
        g.nx,
        g.ny,
        report.levels,
        report.preset,
        cfg.workers.unwrap_or(1)
    );
    println!(
        "outer iterations {} converged {} relres {:.3e} true relres {:.3e} time {:.1} ms",
        report.outer_iterations, report.converged, report.final_relres, report.true_relres, report.total_wall_ms
    );
    for s in &report.level_stats {
        println!(
            "level {}: cslp calls {} iters {} cycle calls {} iters {} matvecs {}",
            s.level, s.cslp_calls, s.cslp_iters, s.cycle_calls, s.cycle_iters, s.matvecs
        );
    }
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| HelmError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let path = dir.join(format!("{}_report.csv", problem.name));
        write_report(&report, &path)?;
        println!("report {}", path.display());
        if cfg.write_field {
            let path = dir.join(format!("{}_field.csv", problem.name));
            write_field(&u, g, &path)?;
            println!("field {}", path.display());
        }
    }
    Ok(if report.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CAP)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => {
            if a.run.config.is_none() {
                eprintln!("error: --config is required\n\nUsage: helmdef solve --config <PATH> [OPTIONS]");
                return ExitCode::from(1);
            }
            cmd_solve(a)
        }
        Command::Sweep(a) => sweep::cmd_sweep(a),
        Command::Bench(a) => bench::cmd_bench(a),
        Command::Stencils(a) => Ok(stencils::cmd_stencils(a)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
