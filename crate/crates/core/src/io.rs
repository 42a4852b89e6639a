//! Run configuration files, velocity rasters, and CSV output.
//!
//! Configuration files are flat `key = value` lines with `#` comments. Per
//! level overrides use keys of the form `level.N.name`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{HelmError, Result};
use crate::grid::{
    constant_problem, raster_problem, wedge_problem, BoundaryKind, ComplexField, GridLevel, Problem, Resolution,
    VelocityGrid,
};
use crate::krylov::StopRule;
use crate::madp::{preset, ConvergenceReport, CslpMethod, PresetName, SolverConfig};

/// Benchmark problem selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Constant k on the unit square, Dirichlet.
    Mp1a,
    /// Constant k on the unit square, Sommerfeld.
    Mp1b,
    Wedge,
    /// Raster model from `velocity_file`, named after the Marmousi benchmark.
    Marmousi,
    /// Any raster model from `velocity_file`.
    File,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Mp1a => "mp1a",
            ProblemKind::Mp1b => "mp1b",
            ProblemKind::Wedge => "wedge",
            ProblemKind::Marmousi => "marmousi",
            ProblemKind::File => "file",
        }
    }

    fn uses_raster(&self) -> bool {
        matches!(self, ProblemKind::Marmousi | ProblemKind::File)
    }

    fn uses_wavenumber(&self) -> bool {
        matches!(self, ProblemKind::Mp1a | ProblemKind::Mp1b)
    }
}

impl FromStr for ProblemKind {
    type Err = HelmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mp1a" => Ok(ProblemKind::Mp1a),
            "mp1b" => Ok(ProblemKind::Mp1b),
            "wedge" => Ok(ProblemKind::Wedge),
            "marmousi" => Ok(ProblemKind::Marmousi),
            "file" => Ok(ProblemKind::File),
            _ => Err(HelmError::config(0, format!("unknown problem '{s}'"))),
        }
    }
}

/// Optional per-level settings that replace the preset's values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LevelOverride {
    pub cslp_method: Option<CslpMethod>,
    pub beta2: Option<f64>,
    pub cslp_tol: Option<f64>,
    pub cslp_max_iters: Option<usize>,
    pub cycle_tol: Option<f64>,
    pub cycle_max_iters: Option<usize>,
}

/// Validated contents of a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub freq_hz: Option<f64>,
    pub wavenumber: Option<f64>,
    pub kh: Option<f64>,
    pub grid: Option<(usize, usize)>,
    pub levels: usize,
    pub preset: PresetName,
    /// Applied to every level before the per-level overrides.
    pub beta2: Option<f64>,
    pub cslp_tol: Option<f64>,
    pub outer_tol: Option<f64>,
    pub outer_max_iters: Option<usize>,
    pub mg_levels: Option<usize>,
    pub level_overrides: BTreeMap<usize, LevelOverride>,
    pub workers: Option<usize>,
    pub velocity_file: Option<PathBuf>,
    pub source: Option<(f64, f64)>,
    pub out_dir: Option<PathBuf>,
    pub write_field: bool,
}

/// Number of levels when the file does not say.
pub const DEFAULT_LEVELS: usize = 3;

impl RunConfig {
    /// A configuration with every optional key unset.
    pub fn new(problem: ProblemKind) -> Self {
        RunConfig {
            problem,
            freq_hz: None,
            wavenumber: None,
            kh: None,
            grid: None,
            levels: DEFAULT_LEVELS,
            preset: PresetName::Madp,
            beta2: None,
            cslp_tol: None,
            outer_tol: None,
            outer_max_iters: None,
            mg_levels: None,
            level_overrides: BTreeMap::new(),
            workers: None,
            velocity_file: None,
            source: None,
            out_dir: None,
            write_field: false,
        }
    }

    /// Cross-key checks; `line` is reported for errors not tied to one key.
    pub fn validate(&self) -> Result<()> {
        self.validate_at(&BTreeMap::new(), 0)
    }

    fn validate_at(&self, lines: &BTreeMap<String, usize>, eof: usize) -> Result<()> {
        let at = |k: &str| lines.get(k).copied().unwrap_or(eof);
        match (self.freq_hz, self.wavenumber) {
            (Some(_), Some(_)) => {
                return Err(HelmError::config(
                    at("wavenumber").max(at("freq_hz")),
                    "freq_hz and wavenumber are mutually exclusive",
                ))
            }
            (None, None) => return Err(HelmError::config(eof, "one of freq_hz or wavenumber is required")),
            _ => {}
        }
        if self.problem.uses_wavenumber() && self.wavenumber.is_none() {
            return Err(HelmError::config(
                at("freq_hz"),
                format!("problem {} takes a wavenumber", self.problem.as_str()),
            ));
        }
        if !self.problem.uses_wavenumber() && self.freq_hz.is_none() {
            return Err(HelmError::config(
                at("wavenumber"),
                format!("problem {} takes freq_hz", self.problem.as_str()),
            ));
        }
        match (self.kh, self.grid) {
            (Some(_), Some(_)) => {
                return Err(HelmError::config(
                    at("grid").max(at("kh")),
                    "kh and grid are mutually exclusive",
                ))
            }
            (None, None) => return Err(HelmError::config(eof, "one of kh or grid is required")),
            _ => {}
        }
        if self.levels < 2 {
            return Err(HelmError::config(at("levels"), "levels must be at least 2"));
        }
        if self.problem.uses_raster() != self.velocity_file.is_some() {
            let msg = if self.problem.uses_raster() {
                "velocity_file is required for raster problems"
            } else {
                "velocity_file only applies to raster problems"
            };
            return Err(HelmError::config(at("velocity_file"), msg));
        }
        if self.workers == Some(0) {
            return Err(HelmError::config(at("workers"), "workers must be positive"));
        }
        for (&l, o) in &self.level_overrides {
            let key = |name: &str| at(&format!("level.{l}.{name}"));
            if l == 0 || l > self.levels {
                return Err(HelmError::config(
                    lines
                        .iter()
                        .filter(|(k, _)| k.starts_with(&format!("level.{l}.")))
                        .map(|(_, v)| *v)
                        .min()
                        .unwrap_or(eof),
                    format!("level {l} is outside 1..{}", self.levels),
                ));
            }
            if l == 1 && (o.cycle_tol.is_some() || o.cycle_max_iters.is_some()) {
                return Err(HelmError::config(
                    key("cycle_tol").min(key("cycle_max_iters")),
                    "the finest level has no cycle budget",
                ));
            }
        }
        Ok(())
    }

    pub fn resolution(&self) -> Resolution {
        match (self.kh, self.grid) {
            (Some(kh), _) => Resolution::Kh(kh),
            (None, Some((nx, ny))) => Resolution::Points(nx, ny),
            (None, None) => Resolution::Kh(0.0),
        }
    }

    /// Build the problem. Raster problems read `velocity_file`.
    pub fn build_problem(&self) -> Result<Problem> {
        self.validate()?;
        let res = self.resolution();
        let ml = self.levels;
        match self.problem {
            ProblemKind::Mp1a => constant_problem(BoundaryKind::Dirichlet, self.wavenumber.unwrap_or(0.0), res, ml),
            ProblemKind::Mp1b => constant_problem(BoundaryKind::Sommerfeld, self.wavenumber.unwrap_or(0.0), res, ml),
            ProblemKind::Wedge => {
                let mut p = wedge_problem(self.freq_hz.unwrap_or(0.0), res, ml)?;
                if let Some(src) = self.source {
                    p.rhs = crate::grid::point_source_rhs(&p.hierarchy, src);
                    p.source = src;
                }
                Ok(p)
            }
            ProblemKind::Marmousi | ProblemKind::File => {
                let path = self.velocity_file.as_ref().expect("validated");
                let grid = read_velocity_grid(path)?;
                raster_problem(
                    self.problem.as_str(),
                    grid,
                    self.freq_hz.unwrap_or(0.0),
                    res,
                    ml,
                    self.source,
                )
            }
        }
    }

    /// Preset for `problem` with this file's overrides applied.
    pub fn solver_config(&self, problem: &Problem) -> Result<SolverConfig> {
        let mut cfg = preset(self.preset, &problem.hierarchy);
        for p in cfg.policies.iter_mut() {
            if let Some(b) = self.beta2 {
                p.beta2 = b;
            }
            if let Some(t) = self.cslp_tol {
                p.cslp_stop.rel_tol = t;
            }
        }
        for (&l, o) in &self.level_overrides {
            if l > cfg.ml {
                return Err(HelmError::config(0, format!("level {l} is outside 1..{}", cfg.ml)));
            }
            let p = cfg.policy_mut(l);
            if let Some(m) = o.cslp_method {
                p.cslp_method = m;
            }
            if let Some(b) = o.beta2 {
                p.beta2 = b;
            }
            if let Some(t) = o.cslp_tol {
                p.cslp_stop.rel_tol = t;
            }
            if let Some(n) = o.cslp_max_iters {
                p.cslp_stop.max_iters = n;
            }
            if o.cycle_tol.is_some() || o.cycle_max_iters.is_some() {
                let cur = p.cycle_stop.unwrap_or(StopRule::single_iteration());
                let tol = o.cycle_tol.unwrap_or(cur.rel_tol);
                let cap = match (o.cycle_max_iters, o.cycle_tol) {
                    (Some(n), _) => n,
                    (None, Some(t)) if t < 1.0 && cur.max_iters == 1 => crate::madp::CYCLE_CAP,
                    _ => cur.max_iters,
                };
                p.cycle_stop = Some(StopRule {
                    rel_tol: tol,
                    max_iters: cap,
                });
            }
        }
        if let Some(t) = self.outer_tol {
            cfg.outer_stop.rel_tol = t;
        }
        if let Some(n) = self.outer_max_iters {
            cfg.outer_stop.max_iters = n;
        }
        if let Some(n) = self.mg_levels {
            cfg.mg.mg_levels = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| HelmError::config(line, format!("cannot parse '{v}' for {key}")))
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse_value(line, key, v)?;
    if !x.is_finite() {
        return Err(HelmError::config(line, format!("{key} must be finite")));
    }
    Ok(x)
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(HelmError::config(line, format!("cannot parse '{v}' for {key}"))),
    }
}

fn parse_grid(line: usize, v: &str) -> Result<(usize, usize)> {
    let (a, b) = v
        .split_once(['x', 'X'])
        .ok_or_else(|| HelmError::config(line, format!("grid must look like 145x241, got '{v}'")))?;
    Ok((parse_value(line, "grid", a.trim())?, parse_value(line, "grid", b.trim())?))
}

fn with_line(line: usize, e: HelmError) -> HelmError {
    match e {
        HelmError::Config { msg, .. } => HelmError::config(line, msg),
        other => other,
    }
}

/// Parse configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut cfg = RunConfig::new(ProblemKind::Mp1b);
    let mut problem = None;
    let mut source_x = None;
    let mut source_y = None;
    let mut last = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| HelmError::config(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(HelmError::config(line, format!("missing value for {key}")));
        }
        if let Some(prev) = seen.insert(key.to_string(), line) {
            return Err(HelmError::config(line, format!("duplicate key {key} (first on line {prev})")));
        }
        match key {
            "problem" => problem = Some(value.parse::<ProblemKind>().map_err(|e| with_line(line, e))?),
            "freq_hz" => cfg.freq_hz = Some(parse_f64(line, key, value)?),
            "wavenumber" => cfg.wavenumber = Some(parse_f64(line, key, value)?),
            "kh" => cfg.kh = Some(parse_f64(line, key, value)?),
            "grid" => cfg.grid = Some(parse_grid(line, value)?),
            "levels" => cfg.levels = parse_value(line, key, value)?,
            "preset" => cfg.preset = value.parse().map_err(|e| with_line(line, e))?,
            "beta2" => cfg.beta2 = Some(parse_f64(line, key, value)?),
            "cslp_tol" => cfg.cslp_tol = Some(parse_f64(line, key, value)?),
            "outer_tol" => cfg.outer_tol = Some(parse_f64(line, key, value)?),
            "outer_max_iters" => cfg.outer_max_iters = Some(parse_value(line, key, value)?),
            "mg_levels" => cfg.mg_levels = Some(parse_value(line, key, value)?),
            "workers" => cfg.workers = Some(parse_value(line, key, value)?),
            "velocity_file" => cfg.velocity_file = Some(PathBuf::from(value)),
            "source_x" => source_x = Some(parse_f64(line, key, value)?),
            "source_y" => source_y = Some(parse_f64(line, key, value)?),
            "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
            "write_field" => cfg.write_field = parse_bool(line, key, value)?,
            _ => {
                let parts: Vec<&str> = key.split('.').collect();
                let (3, Some("level")) = (parts.len(), parts.first().copied()) else {
                    return Err(HelmError::config(line, format!("unknown key {key}")));
                };
                let l: usize = parse_value(line, key, parts[1])?;
                let o = cfg.level_overrides.entry(l).or_default();
                match parts[2] {
                    "cslp_method" => o.cslp_method = Some(value.parse().map_err(|e| with_line(line, e))?),
                    "beta2" => o.beta2 = Some(parse_f64(line, key, value)?),
                    "cslp_tol" => o.cslp_tol = Some(parse_f64(line, key, value)?),
                    "cslp_max_iters" => o.cslp_max_iters = Some(parse_value(line, key, value)?),
                    "cycle_tol" => o.cycle_tol = Some(parse_f64(line, key, value)?),
                    "cycle_max_iters" => o.cycle_max_iters = Some(parse_value(line, key, value)?),
                    _ => return Err(HelmError::config(line, format!("unknown key {key}"))),
                }
            }
        }
    }
    cfg.problem = problem.ok_or_else(|| HelmError::config(last, "missing key problem"))?;
    cfg.source = match (source_x, source_y) {
        (Some(x), Some(y)) => Some((x, y)),
        (None, None) => None,
        _ => {
            let line = seen.get("source_x").or(seen.get("source_y")).copied().unwrap_or(last);
            return Err(HelmError::config(line, "source_x and source_y must be given together"));
        }
    };
    cfg.validate_at(&seen, last)?;
    Ok(cfg)
}

/// Render a configuration that [`parse_config`] reads back unchanged.
pub fn render_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("problem", cfg.problem.as_str().to_string());
    if let Some(f) = cfg.freq_hz {
        kv("freq_hz", format!("{f:?}"));
    }
    if let Some(k) = cfg.wavenumber {
        kv("wavenumber", format!("{k:?}"));
    }
    if let Some(kh) = cfg.kh {
        kv("kh", format!("{kh:?}"));
    }
    if let Some((nx, ny)) = cfg.grid {
        kv("grid", format!("{nx}x{ny}"));
    }
    kv("levels", cfg.levels.to_string());
    kv("preset", cfg.preset.as_str().to_string());
    let opt_f = |v: Option<f64>| v.map(|x| format!("{x:?}"));
    for (k, v) in [
        ("beta2", opt_f(cfg.beta2)),
        ("cslp_tol", opt_f(cfg.cslp_tol)),
        ("outer_tol", opt_f(cfg.outer_tol)),
        ("outer_max_iters", cfg.outer_max_iters.map(|n| n.to_string())),
        ("mg_levels", cfg.mg_levels.map(|n| n.to_string())),
        ("workers", cfg.workers.map(|n| n.to_string())),
        ("velocity_file", cfg.velocity_file.as_ref().map(|p| p.display().to_string())),
        ("source_x", cfg.source.map(|s| format!("{:?}", s.0))),
        ("source_y", cfg.source.map(|s| format!("{:?}", s.1))),
        ("out_dir", cfg.out_dir.as_ref().map(|p| p.display().to_string())),
    ] {
        if let Some(v) = v {
            kv(k, v);
        }
    }
    if cfg.write_field {
        kv("write_field", "true".into());
    }
    for (l, o) in &cfg.level_overrides {
        let p = |name: &str| format!("level.{l}.{name}");
        if let Some(m) = o.cslp_method {
            kv(&p("cslp_method"), m.name().to_string());
        }
        for (name, v) in [
            ("beta2", opt_f(o.beta2)),
            ("cslp_tol", opt_f(o.cslp_tol)),
            ("cslp_max_iters", o.cslp_max_iters.map(|n| n.to_string())),
            ("cycle_tol", opt_f(o.cycle_tol)),
            ("cycle_max_iters", o.cycle_max_iters.map(|n| n.to_string())),
        ] {
            if let Some(v) = v {
                kv(&p(name), v);
            }
        }
    }
    s
}

fn io_err(path: &Path, source: std::io::Error) -> HelmError {
    HelmError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read and parse a configuration file. A relative `velocity_file` is
/// resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let (Some(v), Some(dir)) = (cfg.velocity_file.as_mut(), path.parent()) {
        if v.is_relative() {
            *v = dir.join(&*v);
        }
    }
    Ok(cfg)
}

/// Parse a velocity raster: header `nx ny dx dy x0 y0`, then `nx*ny`
/// velocities, row-major with x fastest.
pub fn parse_velocity_grid(text: &str) -> Result<VelocityGrid> {
    let mut tokens = text.split_whitespace();
    let mut header = [0.0f64; 6];
    for (i, slot) in header.iter_mut().enumerate() {
        let t = tokens
            .next()
            .ok_or_else(|| HelmError::Model(format!("velocity header has {i} of 6 values")))?;
        *slot = t
            .parse()
            .map_err(|_| HelmError::Model(format!("bad velocity header value '{t}'")))?;
    }
    let as_count = |v: f64| -> Result<usize> {
        if v >= 2.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(HelmError::Model(format!("bad raster size {v}")))
        }
    };
    let (nx, ny) = (as_count(header[0])?, as_count(header[1])?);
    if !(header[2] > 0.0 && header[3] > 0.0) {
        return Err(HelmError::Model("raster spacing must be positive".into()));
    }
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|_| HelmError::Model(format!("bad velocity value '{t}'"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != nx * ny {
        return Err(HelmError::Model(format!(
            "raster {nx}x{ny} needs {} values, found {}",
            nx * ny,
            values.len()
        )));
    }
    Ok(VelocityGrid {
        nx,
        ny,
        dx: header[2],
        dy: header[3],
        x0: header[4],
        y0: header[5],
        values,
    })
}

pub fn read_velocity_grid(path: &Path) -> Result<VelocityGrid> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_velocity_grid(&text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// CSV text of a report. Rows are written only for solves that iterated;
/// a zero-iteration report has the metadata block and header only.
pub fn render_report(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# preset: {}", report.preset);
    let _ = writeln!(s, "# levels: {}", report.levels);
    let _ = writeln!(s, "# grid: {}x{}", report.grid.0, report.grid.1);
    let _ = writeln!(s, "# outer_iterations: {}", report.outer_iterations);
    let _ = writeln!(s, "# converged: {}", report.converged);
    let _ = writeln!(s, "# final_relres: {:.16e}", report.final_relres);
    let _ = writeln!(s, "# true_relres: {:.16e}", report.true_relres);
    let _ = writeln!(s, "# total_wall_ms: {:.3}", report.total_wall_ms);
    for p in &report.policies {
        let cycle = p
            .cycle_stop
            .map_or("-".to_string(), |c| format!("{:?}/{}", c.rel_tol, c.max_iters));
        let st = report.level_stats.get(p.level - 1).copied().unwrap_or_default();
        let _ = writeln!(
            s,
            "# level {}: cslp={} beta2={:?} cslp_stop={:?}/{} cycle_stop={} cslp_calls={} cslp_iters={} cycle_calls={} cycle_iters={} matvecs={}",
            p.level,
            p.cslp_method.name(),
            p.beta2,
            p.cslp_stop.rel_tol,
            p.cslp_stop.max_iters,
            cycle,
            st.cslp_calls,
            st.cslp_iters,
            st.cycle_calls,
            st.cycle_iters,
            st.matvecs
        );
    }
    s.push_str("outer_iter,relres,wall_ms\n");
    if report.outer_iterations > 0 {
        for (i, r) in report.residual_history.iter().enumerate() {
            let w = report.wall_ms.get(i).copied().unwrap_or(0.0);
            let _ = writeln!(s, "{i},{r:.16e},{w:.3}");
        }
    }
    s
}

pub fn write_report(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_text(path, &render_report(report))
}

/// CSV text of a field: header `i,j,x,y,re,im`, 17 significant digits.
pub fn render_field(field: &ComplexField, grid: &GridLevel) -> Result<String> {
    field.check_on(grid)?;
    let mut s = String::with_capacity(field.len() * 96 + 16);
    s.push_str("i,j,x,y,re,im\n");
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let z = field.data[grid.index(i, j)];
            let _ = writeln!(
                s,
                "{i},{j},{:.16e},{:.16e},{:.16e},{:.16e}",
                grid.x(i),
                grid.y(j),
                z.re,
                z.im
            );
        }
    }
    Ok(s)
}

pub fn write_field(field: &ComplexField, grid: &GridLevel, path: &Path) -> Result<()> {
    write_text(path, &render_field(field, grid)?)
}

/// Parse CSV written by [`render_field`]; the level is supplied by the caller.
pub fn parse_field(text: &str, level: usize) -> Result<ComplexField> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if idx == 0 || line.is_empty() {
            if idx == 0 && line != "i,j,x,y,re,im" {
                return Err(HelmError::config(1, "field CSV must start with 'i,j,x,y,re,im'"));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(HelmError::config(idx + 1, format!("expected 6 columns, got {}", cols.len())));
        }
        let i: usize = parse_value(idx + 1, "i", cols[0])?;
        let j: usize = parse_value(idx + 1, "j", cols[1])?;
        let re: f64 = parse_value(idx + 1, "re", cols[4])?;
        let im: f64 = parse_value(idx + 1, "im", cols[5])?;
        rows.push((i, j, Complex64::new(re, im)));
    }
    let nx = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let ny = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != nx * ny {
        return Err(HelmError::shape(nx * ny, rows.len()));
    }
    let mut data = vec![Complex64::new(f64::NAN, f64::NAN); nx * ny];
    for (i, j, z) in rows {
        data[j * nx + i] = z;
    }
    if data.iter().any(|z| z.re.is_nan() && z.im.is_nan()) {
        return Err(HelmError::config(0, "field CSV has repeated points"));
    }
    ComplexField::from_vec(level, nx, ny, data)
}

pub fn read_field(path: &Path, level: usize) -> Result<ComplexField> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_field(&text, level)
}
