//! Lowest eigenpairs of a sparse matrix, with and without the tile
//! preconditioner.
//!
//!     cargo run --release --example lobpcg_solve

use blockeig::cli::{generate_synthetic, SyntheticKind, SyntheticParams};
use blockeig::lobpcg::{lobpcg_solve_observed, CsbOperator, SolverConfig};
use blockeig::precond::extract_tiles;
use blockeig::spmm::KernelVariant;

fn main() -> blockeig::Result<()> {
    let mut p = SyntheticParams::new(SyntheticKind::Blocktile, 2000);
    p.block_extent = 500;
    p.seed = 11;
    let s = generate_synthetic(&p)?;
    let m = s.matrix.to_csb(500)?;
    let tiles = extract_tiles(&m, &s.tile_offsets)?;

    let mut cfg = SolverConfig::new(5);
    cfg.tol = 1e-8;
    cfg.variant = KernelVariant::cache_blocked(256);

    for precond in [None, Some(&tiles)] {
        let mut op = CsbOperator::new(&m, cfg.variant);
        let mut every_tenth = Vec::new();
        let r = lobpcg_solve_observed(&mut op, precond, None, &cfg, |st| {
            if st.iteration % 10 == 0 {
                every_tenth.push((st.iteration, st.n_converged));
            }
        })?;
        println!(
            "{} preconditioner: {:?} after {} iterations, {} operator calls",
            if precond.is_some() { "with" } else { "without" },
            r.status,
            r.iterations,
            r.history.operator_calls
        );
        println!("  converged count by iteration {every_tenth:?}");
        for (l, res) in r.eigenvalues.iter().zip(&r.residual_norms) {
            println!("  {l:>14.9}  residual {res:.1e}");
        }
    }
    Ok(())
}
