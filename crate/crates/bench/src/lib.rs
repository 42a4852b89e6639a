//! Shared fixtures for the criterion benchmarks.

use helmdef::grid::{constant_problem, BoundaryKind, Resolution};
use helmdef::{LevelOperator, Problem};
use num_complex::Complex64;

/// Constant-wavenumber Sommerfeld problem on an `n x n` grid with `levels`
/// levels and `kh = 0.5` on the finest one.
pub fn square_problem(n: usize, levels: usize) -> Problem {
    constant_problem(BoundaryKind::Sommerfeld, 0.5 * (n - 1) as f64, Resolution::Points(n, n), levels)
        .expect("benchmark grid must coarsen")
}

/// Helmholtz operator of `level` on [`square_problem`].
pub fn helmholtz(n: usize, level: usize, levels: usize) -> LevelOperator {
    LevelOperator::helmholtz(&square_problem(n, levels).hierarchy, level).expect("level exists")
}

/// Deterministic smooth-plus-oscillatory input vector.
pub fn input(len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect()
}
