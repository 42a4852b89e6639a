//! Multilevel A-DEF1 deflation preconditioning and the outer solve.
//!
//! One application on level `l` computes
//!
//! ```text
//! v_hat = R v                      restriction
//! v_til ~ A_{l+1}^{-1} v_hat       recursive FGMRES, or CSLP-preconditioned
//!                                  FGMRES on the coarsest level
//! t     = Z v_til                  prolongation
//! r     ~ M_l^{-1} (v - A_l t)     CSLP approximate inverse
//! x     = r + t
//! ```
//!
//! which is `P v` with `P = M^{-1}(I - A Q) + Q` and `Q = Z A_{l+1}^{-1} R`.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;

use crate::error::{HelmError, Result};
use crate::grid::{dimensionless_kmax, kh_of, ComplexField, GridHierarchy, Problem};
use crate::krylov::{bicgstab, cslp_iteration_cap, fgmres, gmres, StopRule};
use crate::mg::{MgConfig, MgHierarchy};
use crate::operators::LevelOperator;
use crate::parallel::Executor;

/// Levels with `max k h_l` at or above this value are negative definite.
pub const NEGATIVE_DEFINITE_KH: f64 = 2.0;

/// Safety cap of tolerance-based coarse cycles.
pub const CYCLE_CAP: usize = 100;

/// Default outer iteration cap.
pub const OUTER_CAP: usize = 200;

/// Outer relative residual target.
pub const OUTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelClass {
    Indefinite,
    NegativeDefinite,
}

/// Classification of every level, finest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definiteness {
    pub levels: Vec<LevelClass>,
}

impl Definiteness {
    /// 1-based level classification.
    pub fn level(&self, level: usize) -> LevelClass {
        self.levels[level - 1]
    }

    /// First negative definite level, if any.
    pub fn first_negative_definite(&self) -> Option<usize> {
        self.levels
            .iter()
            .position(|c| *c == LevelClass::NegativeDefinite)
            .map(|i| i + 1)
    }
}

/// Classify each level by `max sqrt(k^2) h_l >= threshold`.
pub fn classify_levels_with(hierarchy: &GridHierarchy, threshold: f64) -> Definiteness {
    let levels = (1..=hierarchy.num_levels())
        .map(|l| {
            if kh_of(l, hierarchy).unwrap_or(0.0) >= threshold {
                LevelClass::NegativeDefinite
            } else {
                LevelClass::Indefinite
            }
        })
        .collect();
    Definiteness { levels }
}

pub fn classify_levels(hierarchy: &GridHierarchy) -> Definiteness {
    classify_levels_with(hierarchy, NEGATIVE_DEFINITE_KH)
}

/// How the CSLP inverse is approximated on a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CslpMethod {
    MultigridVcycle,
    Gmres,
    Bicgstab,
    None,
}

impl CslpMethod {
    pub fn name(&self) -> &'static str {
        match self {
            CslpMethod::MultigridVcycle => "mg",
            CslpMethod::Gmres => "gmres",
            CslpMethod::Bicgstab => "bicgstab",
            CslpMethod::None => "none",
        }
    }
}

impl FromStr for CslpMethod {
    type Err = HelmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mg" | "multigrid" | "vcycle" => Ok(CslpMethod::MultigridVcycle),
            "gmres" => Ok(CslpMethod::Gmres),
            "bicgstab" | "bi-cgstab" => Ok(CslpMethod::Bicgstab),
            "none" => Ok(CslpMethod::None),
            _ => Err(HelmError::config(0, format!("unknown CSLP method '{s}'"))),
        }
    }
}

/// Per-level settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPolicy {
    pub level: usize,
    pub cslp_method: CslpMethod,
    /// Imaginary part of the CSLP shift `1 + i beta2`.
    pub beta2: f64,
    pub cslp_stop: StopRule,
    /// Budget of the Krylov solve on this level; `None` on the finest level.
    pub cycle_stop: Option<StopRule>,
}

/// Named configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    MadpV1,
    MadpV2,
    MadpV3,
    Madp,
}

impl PresetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::MadpV1 => "MADP_V1",
            PresetName::MadpV2 => "MADP_V2",
            PresetName::MadpV3 => "MADP_V3",
            PresetName::Madp => "MADP",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = HelmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "MADP_V1" => Ok(PresetName::MadpV1),
            "MADP_V2" => Ok(PresetName::MadpV2),
            "MADP_V3" => Ok(PresetName::MadpV3),
            "MADP" => Ok(PresetName::Madp),
            _ => Err(HelmError::config(0, format!("unknown preset '{s}'"))),
        }
    }
}

/// Complete solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub ml: usize,
    pub policies: Vec<LevelPolicy>,
    pub outer_stop: StopRule,
    pub preset_name: String,
    pub mg: MgConfig,
}

impl SolverConfig {
    pub fn policy(&self, level: usize) -> &LevelPolicy {
        &self.policies[level - 1]
    }

    pub fn policy_mut(&mut self, level: usize) -> &mut LevelPolicy {
        &mut self.policies[level - 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.ml < 2 || self.policies.len() != self.ml {
            return Err(HelmError::config(
                0,
                format!("{} policies for {} levels", self.policies.len(), self.ml),
            ));
        }
        for (i, p) in self.policies.iter().enumerate() {
            if p.level != i + 1 {
                return Err(HelmError::config(0, "policies out of order"));
            }
            if (i == 0) != p.cycle_stop.is_none() {
                return Err(HelmError::config(
                    0,
                    format!("level {} cycle budget must be set exactly on coarse levels", i + 1),
                ));
            }
            if !(p.beta2.is_finite()) {
                return Err(HelmError::config(0, format!("level {} shift is not finite", i + 1)));
            }
        }
        self.mg.validate()
    }
}

fn tol_stop(tol: f64) -> StopRule {
    if tol >= 1.0 {
        StopRule::single_iteration()
    } else {
        StopRule {
            rel_tol: tol,
            max_iters: CYCLE_CAP,
        }
    }
}

/// Build a named configuration for `hierarchy`.
pub fn preset(name: PresetName, hierarchy: &GridHierarchy) -> SolverConfig {
    let ml = hierarchy.num_levels();
    let classes = classify_levels(hierarchy);
    let (beta2, level2_tol) = match name {
        PresetName::MadpV1 => (1.0 / dimensionless_kmax(hierarchy), 1.0),
        PresetName::MadpV2 => (1.0 / dimensionless_kmax(hierarchy), 0.1),
        PresetName::MadpV3 => (0.5, 0.1),
        PresetName::Madp => (0.5, 0.3),
    };
    let policies = (1..=ml)
        .map(|l| {
            let g = &hierarchy.levels[l - 1];
            let multigrid = matches!(name, PresetName::MadpV3 | PresetName::Madp) && l <= 2;
            let cycle_stop = if l == 1 {
                None
            } else if l == ml {
                Some(if classes.level(l) == LevelClass::Indefinite {
                    tol_stop(0.1)
                } else {
                    StopRule::single_iteration()
                })
            } else if l == 2 {
                Some(tol_stop(level2_tol))
            } else {
                Some(StopRule::single_iteration())
            };
            LevelPolicy {
                level: l,
                cslp_method: if multigrid { CslpMethod::MultigridVcycle } else { CslpMethod::Gmres },
                beta2,
                cslp_stop: if multigrid {
                    StopRule::single_iteration()
                } else {
                    StopRule {
                        rel_tol: 0.1,
                        max_iters: cslp_iteration_cap(g.len()),
                    }
                },
                cycle_stop,
            }
        })
        .collect();
    SolverConfig {
        ml,
        policies,
        outer_stop: StopRule {
            rel_tol: OUTER_TOL,
            max_iters: OUTER_CAP,
        },
        preset_name: name.as_str().to_string(),
        mg: MgConfig::default(),
    }
}

/// Work counters of one level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelStats {
    pub level: usize,
    pub cslp_calls: usize,
    pub cslp_iters: usize,
    pub cycle_calls: usize,
    pub cycle_iters: usize,
    pub matvecs: u64,
    pub flops: u64,
    pub bytes: u64,
}

impl LevelStats {
    pub fn mean_cycle_iters(&self) -> f64 {
        if self.cycle_calls == 0 {
            0.0
        } else {
            self.cycle_iters as f64 / self.cycle_calls as f64
        }
    }

    pub fn mean_cslp_iters(&self) -> f64 {
        if self.cslp_calls == 0 {
            0.0
        } else {
            self.cslp_iters as f64 / self.cslp_calls as f64
        }
    }
}

/// Outcome of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub preset: String,
    pub levels: usize,
    pub grid: (usize, usize),
    pub policies: Vec<LevelPolicy>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Recurrence relative residual at exit.
    pub final_relres: f64,
    /// Explicit `|b - A u| / |b|` at exit.
    pub true_relres: f64,
    pub residual_history: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub total_wall_ms: f64,
    pub level_stats: Vec<LevelStats>,
}

impl ConvergenceReport {
    /// Equality of everything except the wall-clock measurements.
    pub fn same_numerics(&self, other: &ConvergenceReport) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.preset == other.preset
            && self.levels == other.levels
            && self.grid == other.grid
            && self.policies == other.policies
            && self.outer_iterations == other.outer_iterations
            && self.converged == other.converged
            && self.final_relres.to_bits() == other.final_relres.to_bits()
            && self.true_relres.to_bits() == other.true_relres.to_bits()
            && bits(&self.residual_history) == bits(&other.residual_history)
            && self.level_stats == other.level_stats
    }
}

/// Level operators, smoothers and counters of one solve.
pub struct Madp<'a> {
    exec: &'a Executor,
    config: SolverConfig,
    a: Vec<LevelOperator>,
    m: Vec<Option<LevelOperator>>,
    mg: Vec<Option<MgHierarchy>>,
    stats: RefCell<Vec<LevelStats>>,
}

impl<'a> Madp<'a> {
    pub fn new(hierarchy: &GridHierarchy, config: SolverConfig, exec: &'a Executor) -> Result<Self> {
        config.validate()?;
        if config.ml != hierarchy.num_levels() {
            return Err(HelmError::config(
                0,
                format!(
                    "configuration has {} levels, hierarchy has {}",
                    config.ml,
                    hierarchy.num_levels()
                ),
            ));
        }
        let mut a = Vec::new();
        let mut m = Vec::new();
        let mut mg = Vec::new();
        for l in 1..=config.ml {
            let pol = config.policy(l);
            a.push(LevelOperator::helmholtz(hierarchy, l)?);
            let m_op = match pol.cslp_method {
                CslpMethod::None => None,
                _ => Some(LevelOperator::cslp(hierarchy, l, pol.beta2)?),
            };
            mg.push(match (pol.cslp_method, &m_op) {
                (CslpMethod::MultigridVcycle, Some(op)) => Some(MgHierarchy::new(op.clone(), config.mg)?),
                _ => None,
            });
            m.push(m_op);
        }
        let stats = (1..=config.ml)
            .map(|level| LevelStats {
                level,
                ..LevelStats::default()
            })
            .collect();
        Ok(Madp {
            exec,
            config,
            a,
            m,
            mg,
            stats: RefCell::new(stats),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn operator(&self, level: usize) -> &LevelOperator {
        &self.a[level - 1]
    }

    pub fn stats(&self) -> Vec<LevelStats> {
        self.stats.borrow().clone()
    }

    fn count_matvec(&self, op: &LevelOperator) {
        let mut s = self.stats.borrow_mut();
        let st = &mut s[op.level - 1];
        st.matvecs += 1;
        st.flops += op.flops_per_point() * op.len() as u64;
        st.bytes += op.bytes_per_point() * op.len() as u64;
    }

    fn apply_op(&self, op: &LevelOperator, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.count_matvec(op);
        self.exec.apply(op, x, y)
    }

    /// `A_l x`.
    pub fn apply_a(&self, level: usize, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.apply_op(&self.a[level - 1], x, y)
    }

    /// Approximate `M_l^{-1} r` per the level's policy.
    pub fn cslp_inverse(&self, level: usize, r: &[Complex64]) -> Result<Vec<Complex64>> {
        let pol = *self.config.policy(level);
        let op = match &self.m[level - 1] {
            Some(op) => op,
            None => return Ok(r.to_vec()),
        };
        let id = |x: &[Complex64], y: &mut [Complex64]| {
            y.copy_from_slice(x);
            Ok(())
        };
        let mop = |x: &[Complex64], y: &mut [Complex64]| self.apply_op(op, x, y);
        let (x, iters) = match pol.cslp_method {
            CslpMethod::None => unreachable!("no operator is built for CslpMethod::None"),
            CslpMethod::MultigridVcycle => {
                let mg = self.mg[level - 1].as_ref().expect("multigrid hierarchy");
                let mut x = vec![Complex64::new(0.0, 0.0); r.len()];
                for _ in 0..pol.cslp_stop.cap() {
                    mg.vcycle(self.exec, r, &mut x)?;
                }
                (x, pol.cslp_stop.cap())
            }
            CslpMethod::Gmres => {
                let (x, rep) = gmres(self.exec, &mop, &id, r, None, pol.cslp_stop)?;
                (x, rep.iterations)
            }
            CslpMethod::Bicgstab => match bicgstab(self.exec, &mop, &id, r, None, pol.cslp_stop) {
                Ok((x, rep)) => (x, rep.iterations),
                Err(HelmError::Breakdown { best, iterations, .. }) => (best, iterations),
                Err(e) => return Err(e),
            },
        };
        let mut s = self.stats.borrow_mut();
        s[level - 1].cslp_calls += 1;
        s[level - 1].cslp_iters += iters;
        Ok(x)
    }

    /// Approximate `A_level^{-1} b` on a coarse level by its cycle budget.
    pub fn coarse_solve(&self, level: usize, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let stop = self
            .config
            .policy(level)
            .cycle_stop
            .ok_or_else(|| HelmError::Level(format!("level {level} has no cycle budget")))?;
        let a = |x: &[Complex64], y: &mut [Complex64]| self.apply_a(level, x, y);
        let (x, rep) = if level == self.config.ml {
            let m = |x: &[Complex64], y: &mut [Complex64]| {
                y.copy_from_slice(&self.cslp_inverse(level, x)?);
                Ok(())
            };
            fgmres(self.exec, &a, &m, b, None, stop)?
        } else {
            let m = |x: &[Complex64], y: &mut [Complex64]| {
                y.copy_from_slice(&self.apply(level, x)?);
                Ok(())
            };
            fgmres(self.exec, &a, &m, b, None, stop)?
        };
        let mut s = self.stats.borrow_mut();
        s[level - 1].cycle_calls += 1;
        s[level - 1].cycle_iters += rep.iterations;
        Ok(x)
    }

    /// One deflation-preconditioner application on `level < ml`.
    pub fn apply(&self, level: usize, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if level == 0 || level >= self.config.ml {
            return Err(HelmError::Level(format!(
                "deflation is applied on levels 1..{}, requested {level}",
                self.config.ml
            )));
        }
        let op = &self.a[level - 1];
        if v.len() != op.len() {
            return Err(HelmError::shape(op.len(), v.len()));
        }
        let (vh, _, _) = self.exec.restrict(v, op.nx, op.ny)?;
        let vt = self.coarse_solve(level + 1, &vh)?;
        let t = self.exec.prolong(&vt, op.nx, op.ny)?;
        let mut s = vec![Complex64::new(0.0, 0.0); v.len()];
        self.apply_a(level, &t, &mut s)?;
        for (si, vi) in s.iter_mut().zip(v) {
            *si = vi - *si;
        }
        let mut r = self.cslp_inverse(level, &s)?;
        for (ri, ti) in r.iter_mut().zip(&t) {
            *ri += ti;
        }
        Ok(r)
    }
}

/// Standalone form of one preconditioner application.
pub fn apply_madp(madp: &Madp<'_>, level: usize, v: &ComplexField) -> Result<ComplexField> {
    let op = madp.operator(level);
    if v.level != level || v.nx != op.nx || v.ny != op.ny {
        return Err(HelmError::shape(
            format!("level {level} ({}x{})", op.nx, op.ny),
            format!("level {} ({}x{})", v.level, v.nx, v.ny),
        ));
    }
    let data = madp.apply(level, &v.data)?;
    ComplexField::from_vec(level, v.nx, v.ny, data)
}

/// Outer FGMRES on the finest level preconditioned by the deflation cycle.
pub fn solve(problem: &Problem, config: &SolverConfig, exec: &Executor) -> Result<(ComplexField, ConvergenceReport)> {
    let start = Instant::now();
    let hier = &problem.hierarchy;
    let madp = Madp::new(hier, config.clone(), exec)?;
    let b = &problem.rhs.data;
    let g = hier.finest();
    problem.rhs.check_on(g)?;
    let a = |x: &[Complex64], y: &mut [Complex64]| madp.apply_a(1, x, y);
    let m = |x: &[Complex64], y: &mut [Complex64]| {
        y.copy_from_slice(&madp.apply(1, x)?);
        Ok(())
    };
    let (x, rep) = fgmres(exec, &a, &m, b, None, config.outer_stop)?;
    let mut ax = vec![Complex64::new(0.0, 0.0); x.len()];
    exec.apply(madp.operator(1), &x, &mut ax)?;
    let bnorm = exec.norm(b);
    for (r, bi) in ax.iter_mut().zip(b) {
        *r = bi - *r;
    }
    let true_relres = if bnorm == 0.0 { 0.0 } else { exec.norm(&ax) / bnorm };
    let report = ConvergenceReport {
        preset: config.preset_name.clone(),
        levels: config.ml,
        grid: (g.nx, g.ny),
        policies: config.policies.clone(),
        outer_iterations: rep.iterations,
        converged: rep.converged,
        final_relres: rep.final_relres,
        true_relres,
        residual_history: rep.residual_history,
        wall_ms: rep.wall_ms,
        total_wall_ms: start.elapsed().as_secs_f64() * 1e3,
        level_stats: madp.stats(),
    };
    Ok((ComplexField::from_vec(1, g.nx, g.ny, x)?, report))
}
