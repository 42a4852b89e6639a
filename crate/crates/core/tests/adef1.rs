//! Dense checks of the two-level deflation preconditioner on small grids.

use helmdef::grid::{constant_problem, BoundaryKind, Resolution};
use helmdef::madp::{apply_madp, preset, CslpMethod, Madp, PresetName, SolverConfig};
use helmdef::operators::{assemble_csr, DEFAULT_ASSEMBLY_LIMIT};
use helmdef::transfers::{prolong_vec, restrict_vec};
use helmdef::{ComplexField, Executor, GridHierarchy, LevelOperator, StopRule};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Mat = DMatrix<Complex64>;

fn dense(op: &LevelOperator) -> Mat {
    let d = assemble_csr(op, DEFAULT_ASSEMBLY_LIMIT).unwrap().to_dense();
    Mat::from_fn(op.len(), op.len(), |r, c| d[r][c])
}

/// Columns are the prolongations of the coarse unit vectors.
fn prolongation(h: &GridHierarchy) -> Mat {
    let (f, c) = (&h.levels[0], &h.levels[1]);
    let mut z = Mat::zeros(f.len(), c.len());
    for col in 0..c.len() {
        let mut e = vec![Complex64::new(0.0, 0.0); c.len()];
        e[col] = Complex64::new(1.0, 0.0);
        let v = prolong_vec(&e, f.nx, f.ny).unwrap();
        z.set_column(col, &nalgebra::DVector::from_vec(v));
    }
    z
}

fn restriction(h: &GridHierarchy) -> Mat {
    let f = &h.levels[0];
    let mut rows = Vec::new();
    for col in 0..f.len() {
        let mut e = vec![Complex64::new(0.0, 0.0); f.len()];
        e[col] = Complex64::new(1.0, 0.0);
        rows.push(restrict_vec(&e, f.nx, f.ny).unwrap().0);
    }
    Mat::from_fn(rows[0].len(), f.len(), |r, c| rows[c][r])
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let n: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (d / n).sqrt()
}

/// Two-level configuration with (numerically) exact inner solves.
fn exact_config(h: &GridHierarchy) -> SolverConfig {
    let mut cfg = preset(PresetName::MadpV1, h);
    for l in 1..=2 {
        let p = cfg.policy_mut(l);
        p.cslp_method = CslpMethod::Gmres;
        p.cslp_stop = StopRule::new(1e-14, 2000).unwrap();
    }
    cfg.policy_mut(2).cycle_stop = Some(StopRule::new(1e-14, 2000).unwrap());
    cfg
}

#[test]
fn galerkin_deflation_fixes_the_coarse_space() {
    for n in [9usize, 13, 15] {
        let p = constant_problem(BoundaryKind::Dirichlet, 9.0, Resolution::Points(n, n), 2).unwrap();
        let h = &p.hierarchy;
        let a = dense(&LevelOperator::helmholtz(h, 1).unwrap());
        let m = dense(&LevelOperator::cslp(h, 1, 0.5).unwrap());
        let (z, r) = (prolongation(h), restriction(h));
        let e = &r * &a * &z;
        let e_inv = e.clone().try_inverse().expect("Galerkin coarse operator is invertible");
        let q = &z * e_inv * &r;
        let m_inv = m.try_inverse().expect("shifted Laplacian is invertible");
        let id = Mat::identity(a.nrows(), a.ncols());
        let p_adef1 = m_inv * (&id - &a * &q) + &q;

        // Q A restricted to range(Z): project back with the normal equations of Z.
        let zz_inv = (z.adjoint() * &z).try_inverse().unwrap();
        let compressed = &zz_inv * z.adjoint() * &q * &a * &z;
        // Every eigenvalue of C satisfies |lambda - 1| <= ||C - I||_2 <= ||C - I||_F.
        // nalgebra's complex Schur iteration stalls on this nearly scalar matrix,
        // so the norm bound stands in for the eigendecomposition.
        let dev = (&compressed - Mat::identity(compressed.nrows(), compressed.ncols())).norm();
        assert!(dev <= 1e-8, "n = {n}: |lambda - 1| bound {dev:e}");
        // The full preconditioned operator leaves the coarse space fixed as well.
        let paz = &p_adef1 * &a * &z;
        assert!((paz - &z).norm() <= 1e-8 * z.norm(), "n = {n}");
    }
}

#[test]
fn apply_matches_dense_formula() {
    for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Sommerfeld] {
        let p = constant_problem(boundary, 8.0, Resolution::Points(17, 17), 2).unwrap();
        let h = &p.hierarchy;
        let cfg = exact_config(h);
        let exec = Executor::new(1).unwrap();
        let madp = Madp::new(h, cfg.clone(), &exec).unwrap();

        let a1 = dense(&LevelOperator::helmholtz(h, 1).unwrap());
        let a2 = dense(&LevelOperator::helmholtz(h, 2).unwrap());
        let m1 = dense(&LevelOperator::cslp(h, 1, cfg.policy(1).beta2).unwrap());
        let (z, r) = (prolongation(h), restriction(h));
        let q = &z * a2.try_inverse().unwrap() * &r;
        let id = Mat::identity(a1.nrows(), a1.ncols());
        let pre = m1.try_inverse().unwrap() * (&id - &a1 * &q) + &q;

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = &h.levels[0];
        for _ in 0..3 {
            let v = random(&mut rng, g.len());
            let want = &pre * nalgebra::DVector::from_column_slice(&v);
            let field = ComplexField::from_vec(1, g.nx, g.ny, v).unwrap();
            let got = apply_madp(&madp, 1, &field).unwrap();
            let err = rel(&got.data, want.as_slice());
            assert!(err <= 1e-8, "{boundary:?}: {err:e}");
        }
    }
}

#[test]
fn apply_is_worker_invariant() {
    let p = constant_problem(BoundaryKind::Sommerfeld, 20.0, Resolution::Points(65, 65), 3).unwrap();
    let h = &p.hierarchy;
    let cfg = preset(PresetName::Madp, h);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = &h.levels[0];
    let v = ComplexField::from_vec(1, g.nx, g.ny, random(&mut rng, g.len())).unwrap();
    let exec1 = Executor::for_hierarchy(h, 1).unwrap();
    let base = apply_madp(&Madp::new(h, cfg.clone(), &exec1).unwrap(), 1, &v).unwrap();
    for w in [2, 3, 4] {
        let exec = Executor::for_hierarchy(h, w).unwrap();
        let got = apply_madp(&Madp::new(h, cfg.clone(), &exec).unwrap(), 1, &v).unwrap();
        assert!(
            got.data.iter().zip(&base.data).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()),
            "workers {w}"
        );
    }
}

#[test]
fn apply_is_linear_with_fixed_inner_work() {
    // Multigrid CSLP runs a fixed number of V-cycles; the coarse solve is
    // driven to round-off so that it acts as an exact inverse.
    for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Sommerfeld] {
        let p = constant_problem(boundary, 10.0, Resolution::Points(33, 33), 2).unwrap();
        let h = &p.hierarchy;
        let mut cfg = preset(PresetName::Madp, h);
        cfg.policy_mut(2).cycle_stop = Some(StopRule::new(1e-14, 2000).unwrap());
        let exec = Executor::new(1).unwrap();
        let madp = Madp::new(h, cfg, &exec).unwrap();
        let g = &h.levels[0];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (u, v) = (random(&mut rng, g.len()), random(&mut rng, g.len()));
        let (a, b) = (Complex64::new(0.7, -1.3), Complex64::new(-0.4, 0.9));
        let mix: Vec<Complex64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let (pu, pv, pm) = (madp.apply(1, &u).unwrap(), madp.apply(1, &v).unwrap(), madp.apply(1, &mix).unwrap());
        let want: Vec<Complex64> = pu.iter().zip(&pv).map(|(x, y)| a * x + b * y).collect();
        let err = rel(&pm, &want);
        assert!(err <= 1e-10, "{boundary:?}: {err:e}");
    }
}
