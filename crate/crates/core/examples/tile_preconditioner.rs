//! Extract diagonal tiles from a matrix and apply the shifted tile solves
//! to a residual block.
//!
//!     cargo run --release --example tile_preconditioner

use blockeig::cli::{generate_synthetic, SyntheticKind, SyntheticParams};
use blockeig::precond::{apply_preconditioner, extract_tiles, fom_solve, FomConfig};
use blockeig::spmm::{BlockVector, KernelVariant};

fn main() -> blockeig::Result<()> {
    let mut p = SyntheticParams::new(SyntheticKind::Blocktile, 1200);
    p.block_extent = 300;
    p.seed = 3;
    let s = generate_synthetic(&p)?;
    let m = s.matrix.to_csb(300)?;
    let tiles = extract_tiles(&m, &s.tile_offsets)?;
    println!("{:?}", tiles.stats());

    // A single tile, solved with more and more FOM steps.
    let t = &tiles.tiles()[0];
    let rhs = vec![1.0; t.dim()];
    let exact = fom_solve(t, 0.0, &rhs, t.dim())?;
    for steps in [1, 2, 4, 8] {
        let x = fom_solve(t, 0.0, &rhs, steps)?;
        let err: f64 = x.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("tile of size {}: {steps} steps, error {err:.2e}", t.dim());
    }

    // Whole block, one shift per column.
    let r = BlockVector::from_fn(m.dim(), 4, |i, v| ((i + v) % 5) as f64 - 2.0);
    let shifts = [-1.0; 4];
    let (w, stats) = apply_preconditioner(&tiles, &shifts, &r, &FomConfig::default())?;
    let kw = m.apply(&w, KernelVariant::Baseline)?;
    println!(
        "|W| = {:.3}, |HW| / |R| = {:.3}, fallbacks {}",
        w.frobenius_norm(),
        kw.frobenius_norm() / r.frobenius_norm(),
        stats.fallbacks
    );
    Ok(())
}
