//! The triangular rank layout for five row partitions, and one distributed
//! product checked against the serial kernel.
//!
//!     cargo run --example distributed_layout

use blockeig::dist::{
    build_layout, distributed_spmm, even_boundaries, gather_vectors, partition_matrix, partition_vectors, SimComm,
};
use blockeig::spmm::{BlockVector, KernelVariant, SymmetricCsb};

fn main() -> blockeig::Result<()> {
    let layout = build_layout(5)?;
    println!("{} ranks, groups of {}", layout.n_ranks, layout.group_size());
    for (q, b) in layout.rank_to_block.iter().enumerate() {
        let mark = if b.transposed { " (transposed)" } else { "" };
        println!("  rank {q:>2} stores H[{}, {}]{mark}", b.row, b.col);
    }
    println!("row groups {:?}", layout.row_groups);
    println!("col groups {:?}", layout.col_groups);

    let n = 500;
    let lower: Vec<_> = (1..n)
        .map(|i| (i, i - 1, -1.0))
        .chain((7..n).step_by(3).map(|i| (i, i - 7, 0.25)))
        .collect();
    let diag: Vec<f64> = (0..n).map(|i| 2.0 + (i % 4) as f64).collect();
    let serial = SymmetricCsb::from_lower_triples(n, &lower, diag.clone(), 128)?;

    let bounds = even_boundaries(n, 5);
    let pm = partition_matrix(&lower, &diag, &layout, &bounds, 128)?;
    println!("nonzeros per rank {:?}", pm.nnz_per_rank());

    let w = BlockVector::from_fn(n, 4, |i, v| ((3 * i + v) % 11) as f64);
    let segs = partition_vectors(&w, &layout, &bounds)?;
    let mut comm = SimComm::new();
    let (out, _) = distributed_spmm(&layout, &pm, &segs, KernelVariant::Baseline, &mut comm)?;
    let mut u = gather_vectors(&out, &layout, &bounds)?;
    u.axpy(-1.0, &serial.apply(&w, KernelVariant::Baseline)?)?;
    println!("distributed vs serial max diff {:.1e}", u.max_abs());
    println!("{:?}", comm.stats());
    Ok(())
}
