//! Flexible GMRES, GMRES and Bi-CGSTAB with right preconditioning.
//!
//! All solvers start from `x0` (zero unless given), never restart, and stop
//! on the recurrence relative residual `|r| / |b|` or the iteration cap. The
//! unpreconditioned true residual is left to the caller.

use std::time::Instant;

use num_complex::Complex64;

use crate::error::{HelmError, Result};
use crate::parallel::Executor;

/// A linear (or, for flexible preconditioners, varying) map `y = f(x)`.
pub type LinearMap<'a> = dyn Fn(&[Complex64], &mut [Complex64]) -> Result<()> + 'a;

/// Stopping rule: relative tolerance plus iteration cap. A tolerance of 1 or
/// more means "exactly one iteration".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl StopRule {
    pub fn new(rel_tol: f64, max_iters: usize) -> Result<Self> {
        if !(rel_tol >= 0.0 && rel_tol.is_finite()) || max_iters == 0 {
            return Err(HelmError::config(
                0,
                format!("invalid stop rule (tol {rel_tol}, cap {max_iters})"),
            ));
        }
        Ok(StopRule { rel_tol, max_iters })
    }

    /// The `(1.0, 1)` rule.
    pub const fn single_iteration() -> Self {
        StopRule {
            rel_tol: 1.0,
            max_iters: 1,
        }
    }

    /// Iteration cap after applying the single-iteration convention.
    pub fn cap(&self) -> usize {
        if self.rel_tol >= 1.0 {
            1
        } else {
            self.max_iters
        }
    }

    /// Whether the relative residual `relres` after `iters` iterations stops the solve.
    pub fn done(&self, iters: usize, relres: f64) -> bool {
        iters >= self.cap() || (self.rel_tol < 1.0 && relres <= self.rel_tol)
    }
}

/// Outcome of a Krylov solve.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    pub final_relres: f64,
    /// Relative residuals, starting with the initial one.
    pub residual_history: Vec<f64>,
    /// Elapsed milliseconds at each history entry.
    pub wall_ms: Vec<f64>,
    pub converged: bool,
}

impl KrylovReport {
    fn trivial(relres: f64) -> Self {
        KrylovReport {
            iterations: 0,
            final_relres: relres,
            residual_history: vec![relres],
            wall_ms: vec![0.0],
            converged: true,
        }
    }
}

/// `ceil(6 N^(1/4))`, the CSLP inner iteration cap on a level with `N` unknowns.
pub fn cslp_iteration_cap(n: usize) -> usize {
    let q = (n.max(1) as f64).sqrt().sqrt();
    // Guard against 6 * q landing a hair above an integer.
    (6.0 * q - 1e-9).ceil() as usize
}

fn zeros(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); n]
}

fn check_finite(v: &[Complex64], what: &str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(HelmError::Numerical(format!("non-finite value in {what}")))
    }
}

/// Complex Givens rotation `(c, s)` annihilating `b` against `a`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), a);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb, Complex64::new(nb, 0.0));
    }
    let nu = na.hypot(nb);
    let phase = a / na;
    let c = na / nu;
    let s = phase * b.conj() / nu;
    (c, s, phase * nu)
}

/// Arnoldi core shared by FGMRES and GMRES. With `flexible` every
/// preconditioned direction is stored; otherwise `M` is applied once at the end.
fn gmres_core(
    exec: &Executor,
    a: &LinearMap,
    m: &LinearMap,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    stop: StopRule,
    flexible: bool,
) -> Result<(Vec<Complex64>, KrylovReport)> {
    let start = Instant::now();
    let n = b.len();
    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(HelmError::shape(n, x0.len()));
            }
            x0.to_vec()
        }
        None => zeros(n),
    };
    let bnorm = exec.norm(b);
    if bnorm == 0.0 {
        return Ok((zeros(n), KrylovReport::trivial(0.0)));
    }
    let mut r = b.to_vec();
    if x0.is_some() {
        let mut ax = zeros(n);
        a(&x, &mut ax)?;
        for (ri, axi) in r.iter_mut().zip(&ax) {
            *ri -= axi;
        }
    }
    let beta = exec.norm(&r);
    let mut history = vec![beta / bnorm];
    let mut wall = vec![0.0];
    if stop.rel_tol < 1.0 && beta / bnorm <= stop.rel_tol {
        let mut rep = KrylovReport::trivial(beta / bnorm);
        rep.residual_history = history;
        return Ok((x, rep));
    }

    let cap = stop.cap();
    let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(cap + 1);
    let mut z: Vec<Vec<Complex64>> = Vec::new();
    let mut hcols: Vec<Vec<Complex64>> = Vec::with_capacity(cap);
    let mut cs: Vec<f64> = Vec::with_capacity(cap);
    let mut sn: Vec<Complex64> = Vec::with_capacity(cap);
    let mut g = vec![Complex64::new(beta, 0.0)];
    v.push(r.iter().map(|ri| ri / beta).collect());

    let mut converged = false;
    let mut iters = 0;
    let mut zj = zeros(n);
    let mut w = zeros(n);
    while iters < cap {
        let j = iters;
        m(&v[j], &mut zj)?;
        a(&zj, &mut w)?;
        check_finite(&w, "Krylov basis")?;
        if flexible {
            z.push(zj.clone());
        }
        let wnorm0 = exec.norm(&w);
        let mut h = Vec::with_capacity(j + 2);
        for vi in v.iter() {
            let hij = exec.dot(vi, &w);
            for (wk, vk) in w.iter_mut().zip(vi) {
                *wk -= hij * vk;
            }
            h.push(hij);
        }
        let hnext = exec.norm(&w);
        h.push(Complex64::new(hnext, 0.0));
        for k in 0..j {
            let (c, s) = (cs[k], sn[k]);
            let t = c * h[k] + s * h[k + 1];
            h[k + 1] = -s.conj() * h[k] + c * h[k + 1];
            h[k] = t;
        }
        let (c, s, rho) = givens(h[j], h[j + 1]);
        h[j] = rho;
        h[j + 1] = Complex64::new(0.0, 0.0);
        cs.push(c);
        sn.push(s);
        let gj = g[j];
        g.push(-s.conj() * gj);
        g[j] = c * gj;
        hcols.push(h);
        iters += 1;
        let relres = g[j + 1].norm() / bnorm;
        history.push(relres);
        wall.push(start.elapsed().as_secs_f64() * 1e3);
        let happy = hnext <= 1e-15 * wnorm0 || hnext == 0.0;
        if happy || (stop.rel_tol < 1.0 && relres <= stop.rel_tol) {
            converged = true;
            break;
        }
        if iters >= cap {
            break;
        }
        v.push(w.iter().map(|wk| wk / hnext).collect());
    }

    // Back substitution for y in H y = g.
    let k = iters;
    let mut y = vec![Complex64::new(0.0, 0.0); k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (jj, yj) in y.iter().enumerate().skip(i + 1) {
            s -= hcols[jj][i] * yj;
        }
        y[i] = s / hcols[i][i];
    }
    if flexible {
        for (zi, yi) in z.iter().zip(&y) {
            for (xk, zk) in x.iter_mut().zip(zi) {
                *xk += yi * zk;
            }
        }
    } else {
        let mut vy = zeros(n);
        for (vi, yi) in v.iter().zip(&y) {
            for (t, vk) in vy.iter_mut().zip(vi) {
                *t += yi * vk;
            }
        }
        m(&vy, &mut zj)?;
        for (xk, zk) in x.iter_mut().zip(&zj) {
            *xk += zk;
        }
    }
    check_finite(&x, "Krylov solution")?;
    let final_relres = *history.last().unwrap();
    Ok((
        x,
        KrylovReport {
            iterations: iters,
            final_relres,
            residual_history: history,
            wall_ms: wall,
            converged,
        },
    ))
}

/// Flexible GMRES with a right preconditioner that may change every iteration.
pub fn fgmres(
    exec: &Executor,
    a: &LinearMap,
    m: &LinearMap,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    stop: StopRule,
) -> Result<(Vec<Complex64>, KrylovReport)> {
    gmres_core(exec, a, m, b, x0, stop, true)
}

/// GMRES with a fixed right preconditioner.
pub fn gmres(
    exec: &Executor,
    a: &LinearMap,
    m: &LinearMap,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    stop: StopRule,
) -> Result<(Vec<Complex64>, KrylovReport)> {
    gmres_core(exec, a, m, b, x0, stop, false)
}

/// Right-preconditioned Bi-CGSTAB. A breakdown returns
/// [`HelmError::Breakdown`] carrying the iterate with the smallest residual.
pub fn bicgstab(
    exec: &Executor,
    a: &LinearMap,
    m: &LinearMap,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    stop: StopRule,
) -> Result<(Vec<Complex64>, KrylovReport)> {
    let start = Instant::now();
    let n = b.len();
    let bnorm = exec.norm(b);
    if bnorm == 0.0 {
        return Ok((zeros(n), KrylovReport::trivial(0.0)));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => return Err(HelmError::shape(n, x0.len())),
        None => zeros(n),
    };
    let mut r = b.to_vec();
    if x0.is_some() {
        let mut ax = zeros(n);
        a(&x, &mut ax)?;
        for (ri, axi) in r.iter_mut().zip(&ax) {
            *ri -= axi;
        }
    }
    let rhat = r.clone();
    let mut relres = exec.norm(&r) / bnorm;
    let mut history = vec![relres];
    let mut wall = vec![0.0];
    if stop.rel_tol < 1.0 && relres <= stop.rel_tol {
        let mut rep = KrylovReport::trivial(relres);
        rep.residual_history = history;
        return Ok((x, rep));
    }
    // The smallest-residual iterate is kept for breakdown reports. It is
    // copied lazily, inside the update pass that would overwrite it.
    let mut best_relres = relres;
    let mut x_is_best = true;
    let mut best_x = zeros(n);
    let one = Complex64::new(1.0, 0.0);
    let (mut rho, mut alpha, mut omega) = (one, one, one);
    let mut v = zeros(n);
    let mut p = zeros(n);
    let mut y = zeros(n);
    let mut zv = zeros(n);
    let mut t = zeros(n);
    let mut s = zeros(n);
    let cap = stop.cap();
    let mut iters = 0;
    let breakdown = |reason: &'static str, iters: usize, best: &[Complex64], relres: f64| HelmError::Breakdown {
        reason,
        iterations: iters,
        best: best.to_vec(),
        relres,
    };
    let rhat_norm = exec.norm(&rhat);
    while iters < cap {
        let rho_new = exec.dot(&rhat, &r);
        if !rho_new.is_finite() || rho_new.norm() <= 1e-30 * rhat_norm * exec.norm(&r) {
            return Err(breakdown("rho vanished", iters, if x_is_best { &x } else { &best_x }, best_relres));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        m(&p, &mut y)?;
        a(&y, &mut v)?;
        let rv = exec.dot(&rhat, &v);
        if rv.norm() == 0.0 || !rv.is_finite() {
            return Err(breakdown("<rhat, v> vanished", iters, if x_is_best { &x } else { &best_x }, best_relres));
        }
        alpha = rho_new / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        iters += 1;
        let snorm = exec.norm(&s) / bnorm;
        if stop.rel_tol < 1.0 && snorm <= stop.rel_tol {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            relres = snorm;
            history.push(relres);
            wall.push(start.elapsed().as_secs_f64() * 1e3);
            check_finite(&x, "Bi-CGSTAB iterate")?;
            return Ok((
                x,
                KrylovReport {
                    iterations: iters,
                    final_relres: relres,
                    residual_history: history,
                    wall_ms: wall,
                    converged: true,
                },
            ));
        }
        m(&s, &mut zv)?;
        a(&zv, &mut t)?;
        let tt = exec.dot(&t, &t).re;
        if tt == 0.0 {
            return Err(breakdown("t vanished", iters, if x_is_best { &x } else { &best_x }, best_relres));
        }
        omega = exec.dot(&t, &s) / tt;
        if x_is_best {
            best_x.copy_from_slice(&x);
        }
        let mut finite = true;
        for k in 0..n {
            x[k] += alpha * y[k] + omega * zv[k];
            r[k] = s[k] - omega * t[k];
            finite &= x[k].is_finite();
        }
        if !finite {
            check_finite(&x, "Bi-CGSTAB iterate")?;
        }
        relres = exec.norm(&r) / bnorm;
        history.push(relres);
        wall.push(start.elapsed().as_secs_f64() * 1e3);
        x_is_best = relres < best_relres;
        if x_is_best {
            best_relres = relres;
        }
        if stop.rel_tol < 1.0 && relres <= stop.rel_tol {
            break;
        }
        if omega.norm() == 0.0 {
            return Err(breakdown("omega vanished", iters, if x_is_best { &x } else { &best_x }, best_relres));
        }
        rho = rho_new;
    }
    let converged = stop.rel_tol < 1.0 && relres <= stop.rel_tol;
    Ok((
        x,
        KrylovReport {
            iterations: iters,
            final_relres: relres,
            residual_history: history,
            wall_ms: wall,
            converged,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{constant_problem, BoundaryKind, Resolution};
    use crate::operators::{assemble_csr, LevelOperator, DEFAULT_ASSEMBLY_LIMIT};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ident(x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        y.copy_from_slice(x);
        Ok(())
    }

    fn rand_vec(seed: u64, n: usize) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn dense_solve(a: &[Vec<Complex64>], b: &[Complex64]) -> Vec<Complex64> {
        let n = b.len();
        let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
        let x = m.lu().solve(&DVector::from_column_slice(b)).unwrap();
        x.iter().copied().collect()
    }

    fn rel_err(x: &[Complex64], y: &[Complex64]) -> f64 {
        let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
        let n: f64 = y.iter().map(|a| a.norm_sqr()).sum();
        (d / n).sqrt()
    }

    #[test]
    fn caps() {
        assert_eq!(cslp_iteration_cap(10000), 60);
        assert_eq!(cslp_iteration_cap(1), 6);
        assert_eq!(cslp_iteration_cap(65536), 96);
    }

    #[test]
    fn single_iteration_rule() {
        let s = StopRule::single_iteration();
        assert_eq!(s.cap(), 1);
        assert!(!s.done(0, 1.0));
        assert!(s.done(1, 1.0));
        assert!(StopRule::new(0.1, 0).is_err());
    }

    #[test]
    fn identity_converges_in_one() {
        let exec = Executor::new(1).unwrap();
        let b = rand_vec(1, 30);
        let stop = StopRule::new(1e-12, 10).unwrap();
        for f in [fgmres, gmres, bicgstab] {
            let (x, rep) = f(&exec, &ident, &ident, &b, None, stop).unwrap();
            assert_eq!(rep.iterations, 1);
            assert!(rel_err(&x, &b) < 1e-14);
            assert_eq!(rep.residual_history.len(), rep.iterations + 1);
        }
    }

    #[test]
    fn zero_rhs() {
        let exec = Executor::new(1).unwrap();
        let b = vec![Complex64::new(0.0, 0.0); 12];
        for f in [fgmres, gmres, bicgstab] {
            let (x, rep) = f(&exec, &ident, &ident, &b, None, StopRule::new(1e-8, 5).unwrap()).unwrap();
            assert_eq!(rep.iterations, 0);
            assert!(x.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        }
    }

    fn helmholtz_9x9() -> (LevelOperator, Vec<Vec<Complex64>>) {
        let p = constant_problem(BoundaryKind::Dirichlet, 5.0, Resolution::Points(9, 9), 2).unwrap();
        let op = LevelOperator::helmholtz(&p.hierarchy, 1).unwrap();
        let dense = assemble_csr(&op, DEFAULT_ASSEMBLY_LIMIT).unwrap().to_dense();
        (op, dense)
    }

    #[test]
    fn gmres_variants_match_dense_solve() {
        let exec = Executor::new(1).unwrap();
        let (op, dense) = helmholtz_9x9();
        let b = rand_vec(2, 81);
        let expect = dense_solve(&dense, &b);
        let a = |x: &[Complex64], y: &mut [Complex64]| op.apply_slice(x, y);
        let stop = StopRule::new(1e-10, 200).unwrap();
        let (xf, rf) = fgmres(&exec, &a, &ident, &b, None, stop).unwrap();
        let (xg, rg) = gmres(&exec, &a, &ident, &b, None, stop).unwrap();
        assert!(rf.converged && rg.converged);
        assert!(rel_err(&xf, &expect) < 1e-8);
        assert!(rel_err(&xg, &expect) < 1e-8);
        assert!(rel_err(&xf, &xg) < 1e-12);
        // Recurrence residual versus explicit residual.
        let mut ax = vec![Complex64::new(0.0, 0.0); 81];
        op.apply_slice(&xf, &mut ax).unwrap();
        let true_res = rel_err(&ax, &b);
        assert!((true_res - rf.final_relres).abs() < 1e-10);
    }

    #[test]
    fn fixed_preconditioner_gives_same_iterates() {
        let exec = Executor::new(1).unwrap();
        let (op, _) = helmholtz_9x9();
        let p = constant_problem(BoundaryKind::Dirichlet, 5.0, Resolution::Points(9, 9), 2).unwrap();
        let m_op = LevelOperator::cslp(&p.hierarchy, 1, 0.5).unwrap();
        let mdense = assemble_csr(&m_op, DEFAULT_ASSEMBLY_LIMIT).unwrap().to_dense();
        let minv = DMatrix::from_fn(81, 81, |i, j| mdense[i][j]).try_inverse().unwrap();
        let m = move |x: &[Complex64], y: &mut [Complex64]| {
            let r = &minv * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
            Ok(())
        };
        let a = |x: &[Complex64], y: &mut [Complex64]| op.apply_slice(x, y);
        let b = rand_vec(3, 81);
        for cap in [1, 3, 7, 20] {
            let stop = StopRule::new(1e-10, cap).unwrap();
            let (xf, rf) = fgmres(&exec, &a, &m, &b, None, stop).unwrap();
            let (xg, rg) = gmres(&exec, &a, &m, &b, None, stop).unwrap();
            assert_eq!(rf.iterations, rg.iterations);
            assert!(rel_err(&xf, &xg) < 1e-12, "cap {cap}");
        }
    }

    #[test]
    fn bicgstab_on_1d_poisson() {
        let exec = Executor::new(1).unwrap();
        let n = 17;
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            dense[i][i] = Complex64::new(2.0, 0.0);
            if i > 0 {
                dense[i][i - 1] = Complex64::new(-1.0, 0.0);
            }
            if i + 1 < n {
                dense[i][i + 1] = Complex64::new(-1.0, 0.0);
            }
        }
        let d2 = dense.clone();
        let a = move |x: &[Complex64], y: &mut [Complex64]| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = d2[i].iter().zip(x).map(|(p, q)| p * q).sum();
            }
            Ok(())
        };
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + i as f64, 0.5)).collect();
        let (x, rep) = bicgstab(&exec, &a, &ident, &b, None, StopRule::new(1e-10, 100).unwrap()).unwrap();
        assert!(rep.converged);
        assert!(rel_err(&x, &dense_solve(&dense, &b)) < 1e-8);
    }

    #[test]
    fn bicgstab_matches_dense_on_helmholtz() {
        let exec = Executor::new(1).unwrap();
        let (op, dense) = helmholtz_9x9();
        let b = rand_vec(5, 81);
        let a = |x: &[Complex64], y: &mut [Complex64]| op.apply_slice(x, y);
        match bicgstab(&exec, &a, &ident, &b, None, StopRule::new(1e-11, 500).unwrap()) {
            Ok((x, _)) => assert!(rel_err(&x, &dense_solve(&dense, &b)) < 1e-8),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn non_finite_operator_is_reported() {
        let exec = Executor::new(1).unwrap();
        let bad = |_x: &[Complex64], y: &mut [Complex64]| {
            y.fill(Complex64::new(f64::NAN, 0.0));
            Ok(())
        };
        let b = rand_vec(6, 10);
        let r = fgmres(&exec, &bad, &ident, &b, None, StopRule::new(1e-8, 5).unwrap());
        assert!(matches!(r, Err(HelmError::Numerical(_))));
    }

    #[test]
    fn bicgstab_breakdown_carries_best_iterate() {
        // A skew operator with rhat orthogonal to A r: <r, A r> = 0.
        let exec = Executor::new(1).unwrap();
        let a = |x: &[Complex64], y: &mut [Complex64]| {
            y[0] = -x[1];
            y[1] = x[0];
            Ok(())
        };
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        match bicgstab(&exec, &a, &ident, &b, None, StopRule::new(1e-10, 10).unwrap()) {
            Err(HelmError::Breakdown { best, relres, .. }) => {
                assert_eq!(best.len(), 2);
                assert!(relres <= 1.0);
            }
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn gmres_history_is_monotone(seed in any::<u64>(), k in 1.0f64..20.0, cap in 1usize..60) {
            let exec = Executor::new(1).unwrap();
            let p = constant_problem(BoundaryKind::Sommerfeld, k, Resolution::Points(17, 17), 2).unwrap();
            let op = LevelOperator::helmholtz(&p.hierarchy, 1).unwrap();
            let a = |x: &[Complex64], y: &mut [Complex64]| op.apply_slice(x, y);
            let b = rand_vec(seed, op.len());
            let (_, rep) = fgmres(&exec, &a, &ident, &b, None, StopRule::new(1e-12, cap).unwrap()).unwrap();
            prop_assert_eq!(rep.residual_history.len(), rep.iterations + 1);
            for w in rep.residual_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
