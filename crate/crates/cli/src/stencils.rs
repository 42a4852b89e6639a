//! `stencils`: rebuild the coarse kernels and compare with the stored tables.

use std::process::ExitCode;

use clap::Args;
use helmdef::operators::kernels_for_level;
use helmdef::transfers::{verify_printed_chain, TransferMode, TransferStencil, PROLONGATION_DEN_LOG2};

/// Exit code when a coefficient differs.
const EXIT_MISMATCH: u8 = 3;

#[derive(Args)]
pub struct StencilArgs {
    /// Run the comparison (the default).
    #[arg(long)]
    verify: bool,
    /// Replacement 1D prolongation numerators over 8, for fault injection.
    #[arg(long, hide = true, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Option<Vec<i128>>,
}

pub fn cmd_stencils(args: &StencilArgs) -> ExitCode {
    let _ = args.verify;
    let w = match &args.weights {
        Some(v) => TransferStencil {
            weights: v.clone(),
            den_log2: PROLONGATION_DEN_LOG2,
            mode: TransferMode::Prolongation,
        },
        None => TransferStencil::prolongation(),
    };
    let check = match verify_printed_chain(&w) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for l in &check.levels {
        let verdict = if l.mismatch.is_none() { "exact" } else { "MISMATCH" };
        println!("L{} {verdict} ({} exact, {} rounded beyond 2^53)", l.level, l.exact, l.rounded);
    }
    if let Some(m) = check.first_mismatch() {
        let derived = m.derived.map_or("non-integral".to_string(), |d| d.to_string());
        println!(
            "first mismatch: L{} {} coefficient ({}, {}): table {} derived {}",
            m.level, m.kernel, m.dx, m.dy, m.printed, derived
        );
        return ExitCode::from(EXIT_MISMATCH);
    }
    let chain: Vec<String> = check.levels.iter().map(|l| format!("L{}", l.level)).collect();
    println!("{} exact", chain.join("→"));
    if let Ok((_, mass)) = kernels_for_level(6) {
        // Table scaling: sum 4^5 on denominator 2^54.
        let shift = 54 + 10 - mass.den_log2() as i32;
        if shift >= 0 {
            println!("L6 mass corner {}", mass.get(-3, -3) << shift);
        }
    }
    ExitCode::SUCCESS
}
