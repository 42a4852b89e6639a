//! `sweep`: repeat a solve while varying one parameter.

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, ValueEnum};
use helmdef::io::RunConfig;
use helmdef::{ConvergenceReport, HelmError};

use crate::{load_run, run_once, RunArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Cycle tolerance of the coarsest level.
    CoarsestTol,
    /// CSLP tolerance on every level.
    CslpTol,
    /// Cycle tolerance of the level given by `--level`.
    LevelTol,
    /// Frequency (or wavenumber) at fixed kh; the grid grows with it.
    Complexity,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    kind: SweepKind,
    /// Geometric range `first:last:factor`, e.g. `1:1e-8:0.1` or `20:80:2`.
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    /// Explicit comma-separated values instead of a range.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Level for `--kind level-tol`.
    #[arg(long)]
    level: Option<usize>,
}

fn bad(msg: impl Into<String>) -> HelmError {
    HelmError::Config {
        line: 0,
        msg: msg.into(),
    }
}

/// Values of `first:last:factor`, ending at the last value not past `last`.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, HelmError> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("bad range '{spec}'"))))
        .collect::<Result<_, _>>()?;
    let [first, last, factor] = parts[..] else {
        return Err(bad(format!("range must be first:last:factor, got '{spec}'")));
    };
    if !(first > 0.0 && last > 0.0 && factor > 0.0 && factor != 1.0) {
        return Err(bad(format!("range '{spec}' needs positive values and a factor other than 1")));
    }
    if (last - first) * (factor - 1.0) < 0.0 {
        return Err(bad(format!("factor {factor} moves away from {last}")));
    }
    let mut out = Vec::new();
    let mut v = first;
    let slack = 1.0 + 1e-9;
    while (factor > 1.0 && v <= last * slack) || (factor < 1.0 && v * slack >= last) {
        out.push(v);
        v *= factor;
    }
    Ok(out)
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn apply(kind: SweepKind, base: &RunConfig, level: Option<usize>, v: f64) -> Result<RunConfig, HelmError> {
    let mut cfg = base.clone();
    match kind {
        SweepKind::CoarsestTol => {
            let o = cfg.level_overrides.entry(cfg.levels).or_default();
            o.cycle_tol = Some(v);
            o.cycle_max_iters = Some(if v >= 1.0 { 1 } else { o.cycle_max_iters.unwrap_or(helmdef::madp::CYCLE_CAP) });
        }
        SweepKind::CslpTol => cfg.cslp_tol = Some(v),
        SweepKind::LevelTol => {
            let l = level.ok_or_else(|| bad("--kind level-tol needs --level"))?;
            if l < 2 || l > cfg.levels {
                return Err(bad(format!("--level must be in 2..{}", cfg.levels)));
            }
            let o = cfg.level_overrides.entry(l).or_default();
            o.cycle_tol = Some(v);
            o.cycle_max_iters = Some(if v >= 1.0 { 1 } else { o.cycle_max_iters.unwrap_or(helmdef::madp::CYCLE_CAP) });
        }
        SweepKind::Complexity => {
            if cfg.wavenumber.is_some() {
                cfg.wavenumber = Some(v);
            } else {
                cfg.freq_hz = Some(v);
            }
        }
    }
    Ok(cfg)
}

fn row(v: f64, n: usize, r: &ConvergenceReport) -> String {
    let mut s = format!("{v:?},{n},{},{},{:.1}", r.outer_iterations, r.converged, r.total_wall_ms);
    for st in &r.level_stats {
        let _ = write!(s, ",{:.2},{:.2}", st.mean_cslp_iters(), st.mean_cycle_iters());
    }
    s
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, HelmError> {
    let base = load_run(&args.run)?;
    let values = match (&args.values, &args.range) {
        (Some(v), None) => v.clone(),
        (None, Some(r)) => parse_range(r)?,
        _ => return Err(bad("give exactly one of --range or --values")),
    };
    let mut header = "value,points,outer_iters,converged,wall_ms".to_string();
    for l in 1..=base.levels {
        let _ = write!(header, ",l{l}_cslp_mean,l{l}_cycle_mean");
    }
    let mut out = header + "\n";
    println!("{}", out.trim_end());
    let mut timing = Vec::new();
    for &v in &values {
        let cfg = apply(args.kind, &base, args.level, v)?;
        let (problem, _, report) = run_once(&cfg)?;
        let n = problem.hierarchy.finest().len();
        let line = row(v, n, &report);
        println!("{line}");
        out.push_str(&line);
        out.push('\n');
        timing.push((n as f64, report.total_wall_ms.max(1e-3)));
    }
    if args.kind == SweepKind::Complexity {
        let line = match loglog_slope(&timing) {
            Some(e) => format!("# fitted_exponent: {e:.4}"),
            None => "# fitted_exponent: n/a".to_string(),
        };
        println!("{line}");
        out.push_str(&line);
        out.push('\n');
    }
    if let Some(dir) = &base.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| HelmError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let kind = format!("{:?}", args.kind).to_lowercase();
        let path = dir.join(format!("sweep_{kind}.csv"));
        std::fs::write(&path, out).map_err(|e| HelmError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_ranges() {
        assert_eq!(parse_range("20:80:2").unwrap(), vec![20.0, 40.0, 80.0]);
        let v = parse_range("1:1e-8:0.01").unwrap();
        assert_eq!(v.len(), 5);
        assert!((v[4] - 1e-8).abs() < 1e-20);
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("1:10:0.5").is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1e3, 4e3, 1.6e4].iter().map(|&n: &f64| (n, 3.0 * n.powf(1.25))).collect();
        assert!((loglog_slope(&pts).unwrap() - 1.25).abs() < 1e-12);
        assert_eq!(loglog_slope(&pts[..1]), None);
    }
}
