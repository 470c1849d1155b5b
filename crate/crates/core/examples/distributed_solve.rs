//! The same eigenproblem solved serially and over 3 and 7 simulated
//! partitions.
//!
//!     cargo run --release --example distributed_solve

use blockeig::cli::{generate_synthetic, SyntheticKind, SyntheticParams};
use blockeig::dist::{build_layout, even_boundaries, partition_matrix, DistributedOperator};
use blockeig::lobpcg::{lobpcg_solve, CsbOperator, SolverConfig};
use blockeig::precond::extract_tiles;
use blockeig::spmm::KernelVariant;

fn main() -> blockeig::Result<()> {
    let n = 1400;
    let mut p = SyntheticParams::new(SyntheticKind::Blocktile, n);
    p.block_extent = 200;
    let s = generate_synthetic(&p)?;
    let m = s.matrix.to_csb(200)?;
    let tiles = extract_tiles(&m, &s.tile_offsets)?;
    let cfg = SolverConfig::new(4);

    let serial = lobpcg_solve(&mut CsbOperator::new(&m, KernelVariant::Baseline), Some(&tiles), None, &cfg)?;
    println!("serial   {:.8?}", serial.eigenvalues);

    for nd in [3, 7] {
        let layout = build_layout(nd)?;
        let bounds = even_boundaries(n, nd);
        let pm = partition_matrix(&s.matrix.lower, &s.matrix.diag, &layout, &bounds, 200)?;
        let lb = pm.load_balance();
        let mut op = DistributedOperator::new(layout, pm, KernelVariant::FusedAtomic)?;
        let r = lobpcg_solve(&mut op, Some(&tiles), None, &cfg)?;
        let c = op.comm_stats();
        println!("n_d = {nd}  {:.8?}", r.eigenvalues);
        println!("         {} products, {} collectives, {} words moved, {lb:?}", op.applications(), c.collectives, c.volume);
    }
    Ok(())
}
