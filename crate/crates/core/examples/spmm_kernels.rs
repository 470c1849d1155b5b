//! Multiply a random sparse matrix by a block of vectors with each kernel
//! and compare against the baseline.
//!
//!     cargo run --release --example spmm_kernels

use std::collections::BTreeMap;
use std::time::Instant;

use blockeig::spmm::{spmm_notrans, spmm_trans, uniform_boundaries, BlockVector, CsbCooMatrix, KernelVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> blockeig::Result<()> {
    let n = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // About 20 entries per row; repeated positions collapse to one.
    let entries: BTreeMap<(usize, usize), f64> = (0..n * 20)
        .map(|_| ((rng.gen_range(0..n), rng.gen_range(0..n)), rng.gen_range(-1.0..1.0)))
        .collect();
    let triples: Vec<_> = entries.into_iter().map(|((i, j), v)| (i, j, v)).collect();
    let b = uniform_boundaries(n, 1000);
    let m = CsbCooMatrix::from_triples(&triples, n, n, &b, &b)?;
    println!("{}x{} with {} nonzeros in {}x{} blocks", n, n, m.nnz(), m.nrowblks(), m.ncolblks());

    let w = BlockVector::from_fn(n, 8, |i, v| ((i * 7 + v) % 13) as f64 - 6.0);
    let mut base = BlockVector::zeros(n, 8);
    spmm_notrans(&m, &w, &mut base, KernelVariant::Baseline)?;

    for variant in [
        KernelVariant::Baseline,
        KernelVariant::FusedAtomic,
        KernelVariant::cache_blocked(64),
        KernelVariant::cache_blocked(1024),
    ] {
        let mut u = BlockVector::zeros(n, 8);
        let t = Instant::now();
        spmm_notrans(&m, &w, &mut u, variant)?;
        let dt = t.elapsed();
        u.axpy(-1.0, &base)?;
        let label = match variant {
            KernelVariant::CacheBlocked { cache_size, .. } => format!("{}/{cache_size}", variant.name()),
            _ => variant.name().to_string(),
        };
        println!(
            "{:<19} {:>8.3} ms  rel diff {:.1e}",
            label,
            dt.as_secs_f64() * 1e3,
            u.frobenius_norm() / base.frobenius_norm()
        );
    }

    // Hᵀ·W without forming the transpose.
    let mut ut = BlockVector::zeros(n, 8);
    spmm_trans(&m, &w, &mut ut, KernelVariant::FusedAtomic)?;
    let mut check = BlockVector::zeros(n, 8);
    spmm_notrans(&m.transpose(), &w, &mut check, KernelVariant::Baseline)?;
    check.axpy(-1.0, &ut)?;
    println!("transpose product off by {:.1e}", check.max_abs());
    Ok(())
}
