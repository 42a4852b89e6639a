//! `bench`: matrix-free versus CSR matrix-vector products on the 5-point
//! Helmholtz operator.

use std::process::ExitCode;
use std::time::Instant;

use clap::Args;
use helmdef::grid::{constant_problem, BoundaryKind, Resolution};
use helmdef::operators::{
    arithmetic_intensity, assemble_csr, matvec_flop_byte_counters, MatvecKind, DEFAULT_ASSEMBLY_LIMIT,
};
use helmdef::{HelmError, LevelOperator};
use num_complex::Complex64;

#[derive(Args)]
pub struct BenchArgs {
    /// Points per direction of each square grid.
    #[arg(long, value_delimiter = ',', default_values_t = vec![129usize, 257, 513, 1025])]
    sizes: Vec<usize>,
    /// Consecutive products timed per size.
    #[arg(long, default_value_t = 100)]
    reps: usize,
}

/// Largest relative difference tolerated between the two paths.
const AGREEMENT_TOL: f64 = 1e-13;

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let n: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (d / n).sqrt()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<ExitCode, HelmError> {
    println!("size,points,mf_gflops,csr_gflops,ratio,mf_intensity,csr_intensity,rel_diff");
    let reps = args.reps.max(1);
    for &n in &args.sizes {
        let p = constant_problem(BoundaryKind::Sommerfeld, 0.5 * (n as f64 - 1.0), Resolution::Points(n, n), 2)?;
        let op = LevelOperator::helmholtz(&p.hierarchy, 1)?;
        let csr = match assemble_csr(&op, DEFAULT_ASSEMBLY_LIMIT) {
            Ok(c) => c,
            Err(e) => {
                println!("# size {n} skipped: {e}");
                continue;
            }
        };
        let u: Vec<Complex64> = (0..op.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut mf = vec![Complex64::new(0.0, 0.0); op.len()];
        let mut cs = mf.clone();
        op.apply_slice(&u, &mut mf)?;
        csr.matvec_into(&u, &mut cs);
        let diff = rel_diff(&mf, &cs);
        if diff > AGREEMENT_TOL {
            eprintln!("error: size {n}: matrix-free and CSR products differ by {diff:.3e}");
            return Ok(ExitCode::from(1));
        }
        let t = Instant::now();
        for _ in 0..reps {
            op.apply_slice(&u, &mut mf)?;
        }
        let t_mf = t.elapsed().as_secs_f64();
        let t = Instant::now();
        for _ in 0..reps {
            csr.matvec_into(&u, &mut cs);
        }
        let t_csr = t.elapsed().as_secs_f64();
        let points = op.len() as u64;
        let gf = |kind, secs: f64| matvec_flop_byte_counters(kind, points).0 as f64 * reps as f64 / secs / 1e9;
        let (g_mf, g_csr) = (gf(MatvecKind::MatrixFree, t_mf), gf(MatvecKind::Csr, t_csr));
        println!(
            "{n},{points},{g_mf:.4},{g_csr:.4},{:.4},{:.4},{:.4},{diff:.3e}",
            g_mf / g_csr,
            arithmetic_intensity(MatvecKind::MatrixFree),
            arithmetic_intensity(MatvecKind::Csr)
        );
    }
    Ok(ExitCode::SUCCESS)
}
