#![allow(dead_code)]

use blockeig::spmm::{BlockVector, SymmetricCsb};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly-lower entries drawn with probability `density`, values in
/// [-1, 1], and a diagonal in [-1, 1] plus `shift`.
pub fn random_lower(
    rng: &mut ChaCha8Rng,
    n: usize,
    density: f64,
    shift: f64,
) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
    let mut lower = Vec::new();
    for i in 0..n {
        for j in 0..i {
            if rng.gen_bool(density) {
                lower.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let diag = (0..n).map(|_| rng.gen_range(-1.0..1.0) + shift).collect();
    (lower, diag)
}

pub fn random_symmetric(seed: u64, n: usize, density: f64, extent: usize) -> SymmetricCsb {
    let mut r = rng(seed);
    let (lower, diag) = random_lower(&mut r, n, density, 0.0);
    SymmetricCsb::from_lower_triples(n, &lower, diag, extent).unwrap()
}

pub fn random_block(rng: &mut ChaCha8Rng, n: usize, nv: usize) -> BlockVector {
    BlockVector::from_fn(n, nv, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn dense(m: &SymmetricCsb) -> DMatrix<f64> {
    let rows = m.to_dense();
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// All eigenvalues, ascending, from the dense symmetric eigensolver.
pub fn dense_eigenvalues(m: &SymmetricCsb) -> Vec<f64> {
    let mut ev: Vec<f64> = dense(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn dense_apply(m: &DMatrix<f64>, w: &BlockVector) -> BlockVector {
    let wm = DMatrix::from_fn(w.nrows(), w.nvec(), |i, j| w.get(i, j));
    let u = m * wm;
    BlockVector::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)])
}

pub fn rel_diff(a: &BlockVector, b: &BlockVector) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b).unwrap();
    d.frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max)
}
