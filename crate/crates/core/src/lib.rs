//! Matrix-free multilevel deflation solver for the 2D heterogeneous Helmholtz
//! equation.
//!
//! The outer solver is flexible GMRES preconditioned by a recursive A-DEF1
//! deflation cycle that combines a complex shifted Laplacian (CSLP) smoother
//! with higher-order coarse-grid corrections. Every operator is applied
//! matrix-free through stencils; coarse levels use exact Galerkin kernels.

pub mod error;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod madp;
pub mod mg;
pub mod operators;
pub mod parallel;
pub mod transfers;

pub use error::{HelmError, Result};
pub use grid::{BoundaryKind, ComplexField, GridHierarchy, GridLevel, Problem, VelocityModel};
pub use operators::{LevelOperator, StencilKernel};
pub use krylov::{KrylovReport, StopRule};
pub use madp::{
    apply_madp, classify_levels, preset, solve, ConvergenceReport, CslpMethod, LevelPolicy, PresetName,
    SolverConfig,
};
pub use mg::{MgConfig, MgHierarchy};
pub use parallel::{Executor, Partition};
