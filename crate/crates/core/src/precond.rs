//! Block-diagonal preconditioner built from shifted diagonal tiles.
//!
//! Each tile `K_j` is a principal sub-block of the matrix. Applying the
//! preconditioner to a residual block solves `(K_j - σ I) w = r` for every
//! tile and column with a few steps of the full orthogonalization method
//! (FOM): a Lanczos basis of the Krylov space of `r` and a Galerkin solve
//! with the projected tridiagonal matrix.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::spmm::{BlockVector, SymmetricCsb};

pub const DEFAULT_FOM_ITERATIONS: usize = 4;

/// Krylov breakdown threshold, relative to the norm of the new direction
/// before orthogonalization.
const BREAKDOWN_TOL: f64 = 1e-14;

/// Pivot threshold for the projected tridiagonal solve, relative to its
/// largest entry.
const PIVOT_TOL: f64 = 1e-14;

/// One square diagonal tile, symmetric, with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalTile {
    diag: Vec<f64>,
    rows: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl DiagonalTile {
    /// Builds a tile from its diagonal and off-diagonal entries; every
    /// off-diagonal entry must be listed in both triangles.
    pub fn new(diag: Vec<f64>, offdiag: &[(usize, usize, f64)]) -> Result<Self> {
        let d = diag.len();
        let mut rows = Vec::with_capacity(offdiag.len());
        let mut cols = Vec::with_capacity(offdiag.len());
        let mut vals = Vec::with_capacity(offdiag.len());
        for &(r, c, v) in offdiag {
            if r >= d || c >= d || r == c {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows: d,
                    ncols: d,
                });
            }
            rows.push(r as u32);
            cols.push(c as u32);
            vals.push(v);
        }
        Ok(Self {
            diag,
            rows,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn nnz(&self) -> usize {
        self.diag.len() + self.vals.len()
    }

    /// `K - σI`, with the shift folded into the stored diagonal.
    pub fn shifted(&self, sigma: f64) -> DiagonalTile {
        DiagonalTile {
            diag: self.diag.iter().map(|d| d - sigma).collect(),
            ..self.clone()
        }
    }

    /// `y = (offdiag + diag(shifted_diag)) x`.
    fn apply_with_diag(&self, shifted_diag: &[f64], x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(shifted_diag).zip(x) {
            *yi = d * xi;
        }
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            y[r as usize] += v * x[c as usize];
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for (i, &x) in self.diag.iter().enumerate() {
            m[i][i] = x;
        }
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            m[r as usize][c as usize] += v;
        }
        m
    }
}

/// The tiles of a block-diagonal preconditioner and the row ranges they
/// cover.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalTileSet {
    tile_offsets: Vec<usize>,
    tiles: Vec<DiagonalTile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileStats {
    pub count: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub mean_size: f64,
    /// Tile counts keyed by the power-of-two upper bound of their size.
    pub size_histogram: BTreeMap<usize, usize>,
}

impl DiagonalTileSet {
    pub fn new(tile_offsets: Vec<usize>, tiles: Vec<DiagonalTile>) -> Result<Self> {
        check_offsets(&tile_offsets)?;
        if tiles.len() + 1 != tile_offsets.len() {
            return Err(mismatch("tile count does not match tile offsets"));
        }
        for (t, w) in tiles.iter().zip(tile_offsets.windows(2)) {
            if t.dim() != w[1] - w[0] {
                return Err(mismatch("tile dimension does not match its row range"));
            }
        }
        Ok(Self { tile_offsets, tiles })
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn dim(&self) -> usize {
        *self.tile_offsets.last().unwrap()
    }

    pub fn tile_offsets(&self) -> &[usize] {
        &self.tile_offsets
    }

    pub fn tiles(&self) -> &[DiagonalTile] {
        &self.tiles
    }

    pub fn stats(&self) -> TileStats {
        let sizes: Vec<usize> = self.tiles.iter().map(DiagonalTile::dim).collect();
        let mut size_histogram = BTreeMap::new();
        for &s in &sizes {
            *size_histogram.entry(s.next_power_of_two()).or_insert(0) += 1;
        }
        TileStats {
            count: sizes.len(),
            min_size: sizes.iter().copied().min().unwrap_or(0),
            max_size: sizes.iter().copied().max().unwrap_or(0),
            mean_size: if sizes.is_empty() {
                0.0
            } else {
                sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
            },
            size_histogram,
        }
    }
}

fn check_offsets(offsets: &[usize]) -> Result<()> {
    if offsets.len() < 2 || offsets[0] != 0 || offsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadParams(
            "tile offsets must start at 0 and increase strictly".into(),
        ));
    }
    Ok(())
}

/// Cuts the principal tiles `[offsets[j], offsets[j+1])` out of the
/// half-stored symmetric matrix. Couplings between different tiles are
/// dropped.
pub fn extract_tiles(matrix: &SymmetricCsb, tile_offsets: &[usize]) -> Result<DiagonalTileSet> {
    check_offsets(tile_offsets)?;
    let n = matrix.dim();
    if *tile_offsets.last().unwrap() != n {
        return Err(mismatch(format!(
            "tile offsets end at {} for a matrix of dimension {n}",
            tile_offsets.last().unwrap()
        )));
    }
    let blocks = matrix.lower().row_offsets();
    for w in tile_offsets.windows(2) {
        // The block containing the tile's first row must also contain its last.
        let b = blocks.partition_point(|&x| x <= w[0]) - 1;
        if w[1] > blocks[b + 1] {
            return Err(Error::MisalignedTiles {
                start: w[0],
                end: w[1],
            });
        }
    }

    let mut tile_of = vec![0usize; n];
    for (t, w) in tile_offsets.windows(2).enumerate() {
        tile_of[w[0]..w[1]].iter_mut().for_each(|x| *x = t);
    }
    let ntiles = tile_offsets.len() - 1;
    let mut entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); ntiles];
    matrix.lower().for_each_entry(|r, c, v| {
        let t = tile_of[r];
        if tile_of[c] == t {
            let s = tile_offsets[t];
            entries[t].push((r - s, c - s, v));
            entries[t].push((c - s, r - s, v));
        }
    });
    let tiles = entries
        .iter()
        .zip(tile_offsets.windows(2))
        .map(|(e, w)| DiagonalTile::new(matrix.diag()[w[0]..w[1]].to_vec(), e))
        .collect::<Result<Vec<_>>>()?;
    DiagonalTileSet::new(tile_offsets.to_vec(), tiles)
}

/// Number of FOM steps per tile solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FomConfig {
    pub iterations: usize,
}

impl Default for FomConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_FOM_ITERATIONS,
        }
    }
}

/// One shift for all `nvec` columns, `theta[0] - residual_norms[0]`.
///
/// Shifting every tile below the lowest Ritz value keeps `K - σI` close to
/// definite on a diagonally dominant operator. Per-column shifts at interior
/// Ritz values made early iterations amplify the wrong eigendirections.
pub fn column_shifts(theta: &[f64], residual_norms: &[f64], nvec: usize) -> Vec<f64> {
    let sigma = match (theta.first(), residual_norms.first()) {
        (Some(t), Some(r)) => t - r,
        (Some(t), None) => *t,
        _ => 0.0,
    };
    vec![sigma; nvec]
}

/// `m`-step FOM approximation to `(K - σI)⁻¹ r` for one right-hand side.
pub fn fom_solve(tile: &DiagonalTile, sigma: f64, r: &[f64], m: usize) -> Result<Vec<f64>> {
    let d = tile.dim();
    if r.len() != d {
        return Err(mismatch(format!("rhs of length {} for a tile of dimension {d}", r.len())));
    }
    if m == 0 {
        return Err(Error::BadParams("FOM needs at least one iteration".into()));
    }
    let beta0 = norm(r);
    if beta0 == 0.0 {
        return Ok(vec![0.0; d]);
    }
    let shifted_diag: Vec<f64> = tile.diag.iter().map(|x| x - sigma).collect();
    let steps = m.min(d);

    let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta0).collect()];
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; d];
    for j in 0..steps {
        tile.apply_with_diag(&shifted_diag, &basis[j], &mut w);
        let scale = norm(&w);
        if j > 0 {
            let b = beta[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= b * vi;
            }
        }
        let a = dot(&w, &basis[j]);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= a * vi;
        }
        alpha.push(a);
        // Full reorthogonalization keeps the basis orthonormal to working
        // precision over the few steps taken.
        for v in &basis {
            let c = dot(&w, v);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
        }
        if j + 1 == steps {
            break;
        }
        let b = norm(&w);
        if b <= BREAKDOWN_TOL * scale {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }

    let s = alpha.len();
    let y = solve_tridiagonal(&alpha, &beta[..s - 1], beta0)?;
    let mut x = vec![0.0; d];
    for (v, &yj) in basis.iter().zip(&y) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += yj * vi;
        }
    }
    Ok(x)
}

/// Solves `T y = beta0 e₁` for the symmetric tridiagonal `T` with diagonal
/// `alpha` and off-diagonal `beta`, by Gaussian elimination with partial
/// pivoting (`T` may be indefinite).
fn solve_tridiagonal(alpha: &[f64], beta: &[f64], beta0: f64) -> Result<Vec<f64>> {
    let s = alpha.len();
    let mut t = vec![vec![0.0; s]; s];
    for i in 0..s {
        t[i][i] = alpha[i];
        if i + 1 < s {
            t[i][i + 1] = beta[i];
            t[i + 1][i] = beta[i];
        }
    }
    let tmax = t.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut rhs = vec![0.0; s];
    rhs[0] = beta0;
    for col in 0..s {
        let piv = (col..s)
            .max_by(|&a, &b| t[a][col].abs().total_cmp(&t[b][col].abs()))
            .unwrap();
        let pivot = t[piv][col];
        if !(pivot.abs() >= PIVOT_TOL * tmax) || tmax == 0.0 {
            return Err(Error::SingularProjection { pivot });
        }
        t.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..s {
            let f = t[row][col] / t[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..s {
                t[row][c] -= f * t[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut y = vec![0.0; s];
    for i in (0..s).rev() {
        let mut acc = rhs[i];
        for c in i + 1..s {
            acc -= t[i][c] * y[c];
        }
        y[i] = acc / t[i][i];
    }
    Ok(y)
}

/// FOM solve for every column of a tile's residual rows; fails on the
/// first column whose projected system is singular.
pub fn fom_solve_tile(
    tile: &DiagonalTile,
    shifts: &[f64],
    rj: &BlockVector,
    m: usize,
) -> Result<BlockVector> {
    if shifts.len() != rj.nvec() {
        return Err(mismatch("one shift per column is required"));
    }
    let mut out = BlockVector::zeros(rj.nrows(), rj.nvec());
    for (v, &sigma) in shifts.iter().enumerate() {
        let x = fom_solve(tile, sigma, &rj.column(v), m)?;
        for (r, xi) in x.into_iter().enumerate() {
            out.set(r, v, xi);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecondStats {
    /// Columns that fell back to the unpreconditioned residual.
    pub fallbacks: usize,
}

/// `W = K⁻¹ R` for the block-diagonal `K` of shifted tiles, one shift per
/// column. Tiles are solved independently and may run concurrently; each
/// writes a disjoint row range, so the result does not depend on the order.
pub fn apply_preconditioner(
    tiles: &DiagonalTileSet,
    shifts: &[f64],
    r: &BlockVector,
    cfg: &FomConfig,
) -> Result<(BlockVector, PrecondStats)> {
    if r.nrows() != tiles.dim() || shifts.len() != r.nvec() {
        return Err(mismatch(format!(
            "preconditioner of dimension {} applied to {}x{} with {} shifts",
            tiles.dim(),
            r.nrows(),
            r.nvec(),
            shifts.len()
        )));
    }
    let nv = r.nvec();
    let solved: Vec<(Vec<f64>, usize)> = tiles
        .tiles
        .par_iter()
        .zip(tiles.tile_offsets.par_windows(2))
        .map(|(tile, w)| {
            let rows = r.rows(w[0], w[1]);
            let mut out = vec![0.0; rows.nrows() * nv];
            let mut fallbacks = 0;
            for (v, &sigma) in shifts.iter().enumerate() {
                let col = rows.column(v);
                let x = match fom_solve(tile, sigma, &col, cfg.iterations) {
                    Ok(x) => x,
                    Err(Error::SingularProjection { .. }) => {
                        fallbacks += 1;
                        col
                    }
                    Err(e) => return Err(e),
                };
                for (i, xi) in x.into_iter().enumerate() {
                    out[i * nv + v] = xi;
                }
            }
            Ok((out, fallbacks))
        })
        .collect::<Result<_>>()?;

    let mut data = Vec::with_capacity(r.nrows() * nv);
    let mut stats = PrecondStats::default();
    for (part, fb) in solved {
        data.extend_from_slice(&part);
        stats.fallbacks += fb;
    }
    Ok((BlockVector::from_row_major(r.nrows(), nv, data)?, stats))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
