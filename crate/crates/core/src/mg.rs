//! Geometric multigrid V-cycle for the shifted Laplacian.
//!
//! The top sub-level uses the calling level's own CSLP operator. Deeper
//! sub-levels rediscretize the CSLP with the 5-point Laplacian on the doubled
//! mesh width and injected `k^2`. Transfers are the same `R` and `Z` as the
//! deflation cycle; smoothing is damped Jacobi.

use num_complex::Complex64;

use crate::error::{HelmError, Result};
use crate::grid::{coarsen_count, inject, GridLevel};
use crate::krylov::{gmres, StopRule};
use crate::operators::{LevelOperator, StencilKernel};
use crate::parallel::Executor;

/// Multigrid settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgConfig {
    pub pre_smooth: usize,
    pub post_smooth: usize,
    pub smoother_damping: f64,
    /// Largest number of sub-levels, including the top one.
    pub mg_levels: usize,
    /// Sub-levels with at most this many points per direction are solved directly.
    pub coarsest_points: usize,
    pub coarsest_rule: StopRule,
    /// A sweep may grow the residual by at most this factor.
    pub divergence_factor: f64,
}

impl Default for MgConfig {
    fn default() -> Self {
        MgConfig {
            pre_smooth: 1,
            post_smooth: 1,
            smoother_damping: 0.8,
            mg_levels: 16,
            coarsest_points: 5,
            coarsest_rule: StopRule {
                rel_tol: 1e-8,
                max_iters: 50,
            },
            divergence_factor: 10.0,
        }
    }
}

impl MgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pre_smooth + self.post_smooth == 0 || self.mg_levels < 2 {
            return Err(HelmError::config(
                0,
                "multigrid needs at least one smoothing step and two levels",
            ));
        }
        Ok(())
    }
}

struct SubLevel {
    op: LevelOperator,
    inv_diag: Vec<Complex64>,
}

/// CSLP operators on the multigrid sub-hierarchy beneath one level.
pub struct MgHierarchy {
    levels: Vec<SubLevel>,
    config: MgConfig,
}

impl std::fmt::Debug for MgHierarchy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dims: Vec<_> = self.levels.iter().map(|s| (s.op.nx, s.op.ny)).collect();
        f.debug_struct("MgHierarchy").field("dims", &dims).finish()
    }
}

impl MgHierarchy {
    /// Build the sub-hierarchy below `top`, a CSLP operator.
    pub fn new(top: LevelOperator, config: MgConfig) -> Result<Self> {
        config.validate()?;
        let mut levels = Vec::new();
        let mut cur = top;
        loop {
            let diag = cur.diagonal();
            if diag.iter().any(|d| d.norm() == 0.0) {
                return Err(HelmError::Numerical("zero diagonal in multigrid smoother".into()));
            }
            let inv_diag = diag.iter().map(|d| 1.0 / d).collect();
            let stop = levels.len() + 1 >= config.mg_levels
                || cur.nx.min(cur.ny) <= config.coarsest_points
                || coarsen_count(cur.nx).is_none()
                || coarsen_count(cur.ny).is_none();
            let next = if stop {
                None
            } else {
                let (ksq, cx, cy) = inject(cur.ksq(), cur.nx, cur.ny).expect("coarsenable");
                let grid = GridLevel {
                    level: cur.level + 1,
                    nx: cx,
                    ny: cy,
                    h: 2.0 * cur.h,
                    origin: (0.0, 0.0),
                };
                Some(LevelOperator::from_parts(
                    &grid,
                    ksq,
                    StencilKernel::laplace_5pt(),
                    StencilKernel::identity_mass(),
                    cur.shift,
                    cur.boundary,
                )?)
            };
            levels.push(SubLevel { op: cur, inv_diag });
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
        Ok(MgHierarchy { levels, config })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn config(&self) -> &MgConfig {
        &self.config
    }

    /// Point counts of every sub-level.
    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(|s| (s.op.nx, s.op.ny)).collect()
    }

    /// One V-cycle for `M x = b` starting from `x` (updated in place).
    pub fn vcycle(&self, exec: &Executor, b: &[Complex64], x: &mut [Complex64]) -> Result<()> {
        self.cycle(exec, 0, b, x)
    }

    /// One V-cycle from a zero initial guess.
    pub fn apply(&self, exec: &Executor, b: &[Complex64], x: &mut [Complex64]) -> Result<()> {
        x.fill(Complex64::new(0.0, 0.0));
        self.vcycle(exec, b, x)
    }

    fn residual(&self, exec: &Executor, s: usize, b: &[Complex64], x: &[Complex64], r: &mut [Complex64]) -> Result<()> {
        exec.apply(&self.levels[s].op, x, r)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn smooth(
        &self,
        exec: &Executor,
        s: usize,
        b: &[Complex64],
        x: &mut [Complex64],
        r: &mut [Complex64],
        sweeps: usize,
        r0: f64,
    ) -> Result<()> {
        let w = self.config.smoother_damping;
        let inv = &self.levels[s].inv_diag;
        for _ in 0..sweeps {
            self.residual(exec, s, b, x, r)?;
            let rn = exec.norm(r);
            if r0 > 0.0 && rn > self.config.divergence_factor * r0 {
                return Err(HelmError::MgDivergence {
                    sublevel: s + 1,
                    growth: rn / r0,
                });
            }
            for ((xi, ri), di) in x.iter_mut().zip(r.iter()).zip(inv) {
                *xi += w * ri * di;
            }
        }
        Ok(())
    }

    fn cycle(&self, exec: &Executor, s: usize, b: &[Complex64], x: &mut [Complex64]) -> Result<()> {
        let lvl = &self.levels[s];
        let n = lvl.op.len();
        if s + 1 == self.levels.len() {
            let a = |u: &[Complex64], v: &mut [Complex64]| exec.apply(&lvl.op, u, v);
            let id = |u: &[Complex64], v: &mut [Complex64]| {
                v.copy_from_slice(u);
                Ok(())
            };
            let (sol, _) = gmres(exec, &a, &id, b, Some(x), self.config.coarsest_rule)?;
            x.copy_from_slice(&sol);
            return Ok(());
        }
        let mut r = vec![Complex64::new(0.0, 0.0); n];
        self.residual(exec, s, b, x, &mut r)?;
        let r0 = exec.norm(&r);
        if r0 == 0.0 {
            return Ok(());
        }
        self.smooth(exec, s, b, x, &mut r, self.config.pre_smooth, r0)?;
        self.residual(exec, s, b, x, &mut r)?;
        let growth = exec.norm(&r) / r0;
        if growth > self.config.divergence_factor {
            return Err(HelmError::MgDivergence { sublevel: s + 1, growth });
        }
        let (rc, _, _) = exec.restrict(&r, lvl.op.nx, lvl.op.ny)?;
        let mut ec = vec![Complex64::new(0.0, 0.0); rc.len()];
        self.cycle(exec, s + 1, &rc, &mut ec)?;
        let e = exec.prolong(&ec, lvl.op.nx, lvl.op.ny)?;
        for (xi, ei) in x.iter_mut().zip(&e) {
            *xi += ei;
        }
        self.smooth(exec, s, b, x, &mut r, self.config.post_smooth, r0)?;
        Ok(())
    }
}

/// Convenience wrapper: one V-cycle of `mg` for `b` from `x0` (zero if absent).
pub fn mg_vcycle(exec: &Executor, mg: &MgHierarchy, b: &[Complex64], x0: Option<&[Complex64]>) -> Result<Vec<Complex64>> {
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); b.len()],
    };
    mg.vcycle(exec, b, &mut x)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{constant_problem, BoundaryKind, Resolution};
    use crate::operators::{assemble_csr, DEFAULT_ASSEMBLY_LIMIT};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(seed: u64, n: usize) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn norm(v: &[Complex64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn laplace_mg(n: usize, boundary: BoundaryKind) -> (MgHierarchy, LevelOperator) {
        let p = constant_problem(boundary, 0.0, Resolution::Points(n, n), 2).unwrap();
        let op = LevelOperator::cslp(&p.hierarchy, 1, 0.0).unwrap();
        (MgHierarchy::new(op.clone(), MgConfig::default()).unwrap(), op)
    }

    fn residual_norm(op: &LevelOperator, b: &[Complex64], x: &[Complex64]) -> f64 {
        let mut ax = vec![Complex64::new(0.0, 0.0); b.len()];
        op.apply_slice(x, &mut ax).unwrap();
        ax.iter().zip(b).map(|(a, bb)| (bb - a).norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn sub_hierarchy_shape() {
        let (mg, _) = laplace_mg(65, BoundaryKind::Dirichlet);
        assert_eq!(mg.dims(), vec![(65, 65), (33, 33), (17, 17), (9, 9), (5, 5)]);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let exec = Executor::new(1).unwrap();
        let (mg, _) = laplace_mg(33, BoundaryKind::Dirichlet);
        let x = mg_vcycle(&exec, &mg, &vec![Complex64::new(0.0, 0.0); 33 * 33], None).unwrap();
        assert!(x.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn laplace_contraction() {
        let exec = Executor::new(1).unwrap();
        for n in [33, 65, 129] {
            let (mg, op) = laplace_mg(n, BoundaryKind::Dirichlet);
            let b = rand_vec(n as u64, n * n);
            let mut x = vec![Complex64::new(0.0, 0.0); n * n];
            let mut prev = residual_norm(&op, &b, &x);
            let first = prev;
            for _ in 0..4 {
                mg.vcycle(&exec, &b, &mut x).unwrap();
                let r = residual_norm(&op, &b, &x);
                assert!(r <= 0.5 * prev, "n = {n}: {r} vs {prev}");
                prev = r;
            }
            assert!(prev < first / 16.0);
        }
    }

    #[test]
    fn one_cycle_halves_the_residual_on_65() {
        let exec = Executor::new(1).unwrap();
        let (mg, op) = laplace_mg(65, BoundaryKind::Dirichlet);
        let b = rand_vec(9, 65 * 65);
        let x = mg_vcycle(&exec, &mg, &b, None).unwrap();
        assert!(residual_norm(&op, &b, &x) <= 0.5 * norm(&b));
    }

    #[test]
    fn shifted_laplacian_fixed_point_converges() {
        let exec = Executor::new(1).unwrap();
        let p = constant_problem(BoundaryKind::Sommerfeld, 100.0, Resolution::Kh(0.625), 2).unwrap();
        let op = LevelOperator::cslp(&p.hierarchy, 1, 0.5).unwrap();
        let mg = MgHierarchy::new(op.clone(), MgConfig::default()).unwrap();
        let b = p.rhs.data.clone();
        let bn = norm(&b);
        let mut x = vec![Complex64::new(0.0, 0.0); b.len()];
        let mut it = 0;
        while residual_norm(&op, &b, &x) > 1e-6 * bn {
            mg.vcycle(&exec, &b, &mut x).unwrap();
            it += 1;
            // Rediscretized coarse sub-levels with kh > 1 limit the asymptotic
            // rate to about 0.94 per cycle here.
            assert!(it < 1000, "no convergence");
        }
    }

    #[test]
    fn superposition_with_exact_coarsest_solve() {
        let exec = Executor::new(1).unwrap();
        let p = constant_problem(BoundaryKind::Sommerfeld, 20.0, Resolution::Points(33, 33), 2).unwrap();
        let op = LevelOperator::cslp(&p.hierarchy, 1, 0.5).unwrap();
        let cfg = MgConfig {
            coarsest_rule: StopRule { rel_tol: 0.0, max_iters: 100 },
            ..MgConfig::default()
        };
        let mg = MgHierarchy::new(op, cfg).unwrap();
        let (u, v) = (rand_vec(1, 33 * 33), rand_vec(2, 33 * 33));
        let a = Complex64::new(0.3, -1.7);
        let comb: Vec<_> = u.iter().zip(&v).map(|(x, y)| a * x + y).collect();
        let (mu, mv, mc) = (
            mg_vcycle(&exec, &mg, &u, None).unwrap(),
            mg_vcycle(&exec, &mg, &v, None).unwrap(),
            mg_vcycle(&exec, &mg, &comb, None).unwrap(),
        );
        let expect: Vec<_> = mu.iter().zip(&mv).map(|(x, y)| a * x + y).collect();
        let d: Vec<_> = mc.iter().zip(&expect).map(|(x, y)| x - y).collect();
        assert!(norm(&d) <= 1e-12 * norm(&expect));
    }

    #[test]
    fn strongly_indefinite_unshifted_operator_diverges() {
        // Damped Jacobi on the unshifted Helmholtz operator at kh ~ 1.5 amplifies
        // the smooth error modes.
        let exec = Executor::new(1).unwrap();
        let p = constant_problem(BoundaryKind::Dirichlet, 48.0, Resolution::Points(33, 33), 2).unwrap();
        let op = LevelOperator::helmholtz(&p.hierarchy, 1).unwrap();
        let dense = assemble_csr(&op, DEFAULT_ASSEMBLY_LIMIT).unwrap();
        assert!(dense.nnz() > 0);
        let mg = MgHierarchy::new(op, MgConfig { pre_smooth: 8, post_smooth: 8, ..MgConfig::default() }).unwrap();
        let b = rand_vec(4, 33 * 33);
        let mut x = vec![Complex64::new(0.0, 0.0); b.len()];
        let mut res = Ok(());
        for _ in 0..20 {
            res = mg.vcycle(&exec, &b, &mut x);
            if res.is_err() {
                break;
            }
        }
        assert!(matches!(res, Err(HelmError::MgDivergence { .. })), "{res:?}");
    }
}
