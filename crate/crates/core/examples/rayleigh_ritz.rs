//! The dense kernels behind one Rayleigh-Ritz step: Gram matrices, Cholesky
//! QR, and the lowest eigenpairs of a small generalized problem.
//!
//!     cargo run --example rayleigh_ritz

use blockeig::densela::{gram, qr_of_transpose, sygv_lowest, SmallDense};
use blockeig::spmm::{BlockVector, KernelVariant, SymmetricCsb};

fn main() -> blockeig::Result<()> {
    let n = 200;
    let lower: Vec<_> = (1..n).map(|i| (i, i - 1, -1.0)).collect();
    let h = SymmetricCsb::from_lower_triples(n, &lower, vec![2.0; n], 64)?;

    // A trial subspace of slowly varying vectors, far from orthonormal.
    let s = BlockVector::from_fn(n, 6, |i, j| ((i as f64 + 1.0) / n as f64).powi(j as i32));
    let b = gram(&s, &s)?;
    let (q, r) = qr_of_transpose(&s)?;
    let qtq = gram(&q, &q)?;
    println!("diagonal of R spans {:.1e}..{:.1e}", min_diag(&r), max_diag(&r));
    println!("|QᵀQ - I| = {:.1e}", qtq.sub(&SmallDense::identity(6)).max_abs());

    // Ritz values from the pencil (SᵀHS, SᵀS).
    let hs = h.apply(&s, KernelVariant::Baseline)?;
    let a = gram(&s, &hs)?;
    let (c, theta) = sygv_lowest(&a, &b, 3)?;
    // Upper bounds; the subspace only approximates the low modes.
    println!("lowest Ritz values {theta:.6?}");
    let exact: Vec<f64> = (1..=3)
        .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
        .collect();
    println!("true eigenvalues   {exact:.6?}");

    let ctbc = c.transpose().matmul(&b)?.matmul(&c)?;
    println!("|CᵀBC - I| = {:.1e}", ctbc.sub(&SmallDense::identity(3)).max_abs());
    Ok(())
}

fn min_diag(r: &SmallDense) -> f64 {
    (0..r.nrows()).map(|i| r.get(i, i).abs()).fold(f64::INFINITY, f64::min)
}

fn max_diag(r: &SmallDense) -> f64 {
    (0..r.nrows()).map(|i| r.get(i, i).abs()).fold(0.0, f64::max)
}
