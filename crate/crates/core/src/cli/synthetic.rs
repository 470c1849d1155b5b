//! Seeded synthetic symmetric test matrices.

use std::collections::HashSet;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix_market::SymmetricTriples;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// Full band of half-width `bandwidth`, diagonal `1, 2, ..., n`.
    Banded,
    /// Dense-ish diagonal tiles plus scattered clusters, diagonally dominant.
    Blocktile,
    /// Uniformly scattered entries at the requested density.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub kind: SyntheticKind,
    pub n: usize,
    /// Target fraction of nonzeros in the full matrix.
    pub density: f64,
    pub bandwidth: usize,
    /// Tile sizes are drawn log-uniformly from `[min_tile, max_tile]`.
    pub min_tile: usize,
    pub max_tile: usize,
    /// Tiles never cross multiples of this extent.
    pub block_extent: usize,
    pub seed: u64,
}

impl SyntheticParams {
    pub fn new(kind: SyntheticKind, n: usize) -> Self {
        Self {
            kind,
            n,
            density: 0.01,
            bandwidth: 4,
            min_tile: 2,
            max_tile: 64,
            block_extent: crate::spmm::DEFAULT_BLOCK_EXTENT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMatrix {
    pub matrix: SymmetricTriples,
    pub tile_offsets: Vec<usize>,
}

pub fn generate_synthetic(p: &SyntheticParams) -> Result<SyntheticMatrix> {
    if p.n < 10 {
        return Err(Error::BadParams(format!("synthetic matrices need n >= 10, got {}", p.n)));
    }
    if !(0.0..=1.0).contains(&p.density) {
        return Err(Error::BadParams(format!("density {} outside [0, 1]", p.density)));
    }
    if p.min_tile == 0 || p.max_tile < p.min_tile || p.block_extent == 0 {
        return Err(Error::BadParams("tile sizes need 1 <= min_tile <= max_tile".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let tile_offsets = log_uniform_tiles(&mut rng, p);
    let n = p.n;
    let matrix = match p.kind {
        SyntheticKind::Banded => {
            let mut lower = Vec::new();
            for i in 0..n {
                for j in i.saturating_sub(p.bandwidth)..i {
                    lower.push((i, j, rng.gen_range(-1.0..=1.0)));
                }
            }
            let diag = (1..=n).map(|i| i as f64).collect();
            SymmetricTriples { n, lower, diag }
        }
        SyntheticKind::Random => {
            // Off-diagonal probability chosen so that the full matrix,
            // diagonal included, hits the target density.
            let nn = n as f64;
            let q = ((p.density * nn * nn - nn) / (nn * (nn - 1.0))).clamp(0.0, 1.0);
            let mut lower = Vec::new();
            for i in 0..n {
                for j in 0..i {
                    if rng.gen_bool(q) {
                        lower.push((i, j, rng.gen_range(-1.0..=1.0)));
                    }
                }
            }
            let diag = (0..n).map(|_| nonzero(&mut rng)).collect();
            SymmetricTriples { n, lower, diag }
        }
        SyntheticKind::Blocktile => blocktile(&mut rng, p, &tile_offsets),
    };
    Ok(SyntheticMatrix { matrix, tile_offsets })
}

fn nonzero(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        if x != 0.0 {
            return x;
        }
    }
}

/// Many small tiles and few large ones, cut short at block boundaries.
fn log_uniform_tiles(rng: &mut ChaCha8Rng, p: &SyntheticParams) -> Vec<usize> {
    let (lo, hi) = ((p.min_tile as f64).ln(), (p.max_tile as f64 + 1.0).ln());
    let mut offs = vec![0];
    let mut at = 0;
    while at < p.n {
        let size = rng.gen_range(lo..hi).exp().floor().max(1.0) as usize;
        let block_end = (at / p.block_extent + 1) * p.block_extent;
        at = (at + size).min(block_end).min(p.n);
        offs.push(at);
    }
    offs
}

fn blocktile(rng: &mut ChaCha8Rng, p: &SyntheticParams, tiles: &[usize]) -> SymmetricTriples {
    let n = p.n;
    let mut seen = HashSet::new();
    let mut lower = Vec::new();
    // Half of the nonzero budget goes inside the diagonal tiles.
    for w in tiles.windows(2) {
        for i in w[0]..w[1] {
            for j in w[0]..i {
                if rng.gen_bool(0.5) && seen.insert((i, j)) {
                    lower.push((i, j, rng.gen_range(-1.0..=1.0)));
                }
            }
        }
    }
    let budget = (p.density * (n * n) as f64 / 2.0) as usize;
    let mut attempts = 0;
    while lower.len() < budget && attempts < 64 * budget.max(1) {
        attempts += 1;
        // A small square cluster below the diagonal.
        let size = rng.gen_range(2..=8usize);
        let i0 = rng.gen_range(0..n);
        let j0 = rng.gen_range(0..n);
        for i in i0..(i0 + size).min(n) {
            for j in j0..(j0 + size).min(n) {
                if j < i && rng.gen_bool(0.5) && seen.insert((i, j)) {
                    lower.push((i, j, 0.2 * rng.gen_range(-1.0..=1.0)));
                }
            }
        }
    }
    let mut row_abs = vec![0.0; n];
    for &(i, j, v) in &lower {
        let a: f64 = v;
        row_abs[i] += a.abs();
        row_abs[j] += a.abs();
    }
    let diag = row_abs
        .iter()
        .map(|s| s + 0.5 + rng.gen_range(0.0..(n as f64).sqrt()))
        .collect();
    SymmetricTriples { n, lower, diag }
}
