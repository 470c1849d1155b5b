//! Build a symmetric CSB matrix from its lower triangle, look at the block
//! structure, and round-trip it through the binary cache.
//!
//!     cargo run --example csb_storage

use blockeig::spmm::{BlockVector, KernelVariant, SymmetricCsb};

fn main() -> blockeig::Result<()> {
    // 1-D Laplacian: 2 on the diagonal, -1 next to it.
    let n = 10;
    let lower: Vec<_> = (1..n).map(|i| (i, i - 1, -1.0)).collect();
    let m = SymmetricCsb::from_lower_triples(n, &lower, vec![2.0; n], 4)?;
    let l = m.lower();
    println!("row block offsets {:?}", l.row_offsets());
    for i in 0..l.nrowblks() {
        let counts: Vec<usize> = (0..l.ncolblks()).map(|j| l.block_nnz(i, j)).collect();
        println!("  block row {i}: nnz per block {counts:?}");
    }
    println!("stored {} strictly lower entries, {} in the full matrix", l.nnz(), m.full_nnz());

    let ones = BlockVector::from_fn(n, 1, |_, _| 1.0);
    println!("H·1 = {:?}", m.apply(&ones, KernelVariant::Baseline)?.column(0));

    let mut buf = Vec::new();
    m.write_binary(&mut buf)?;
    let back = SymmetricCsb::read_binary(buf.as_slice())?;
    println!("cache is {} bytes, round trip equal: {}", buf.len(), back == m);
    Ok(())
}
