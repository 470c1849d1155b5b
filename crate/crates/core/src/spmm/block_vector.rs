use crate::densela::SmallDense;
use crate::error::{mismatch, Result};

/// A tall-skinny block of `nvec` vectors of length `nrows`.
///
/// Storage is row-major: the `nvec` components of row `r` are contiguous at
/// `data[r * nvec..(r + 1) * nvec]`. Gathering or scattering a row range of
/// the block therefore moves one contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    nrows: usize,
    nvec: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(nrows: usize, nvec: usize) -> Self {
        Self {
            nrows,
            nvec,
            data: vec![0.0; nrows * nvec],
        }
    }

    pub fn from_row_major(nrows: usize, nvec: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * nvec {
            return Err(mismatch(format!(
                "row-major data of length {} for a {}x{} block",
                data.len(),
                nrows,
                nvec
            )));
        }
        Ok(Self { nrows, nvec, data })
    }

    /// Builds a block whose column `v` is `columns[v]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let nvec = columns.len();
        let nrows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(mismatch("columns of unequal length"));
        }
        let mut out = Self::zeros(nrows, nvec);
        for (v, col) in columns.iter().enumerate() {
            for (r, &x) in col.iter().enumerate() {
                out.data[r * nvec + v] = x;
            }
        }
        Ok(out)
    }

    pub fn from_fn(nrows: usize, nvec: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nrows * nvec);
        for r in 0..nrows {
            for v in 0..nvec {
                data.push(f(r, v));
            }
        }
        Self { nrows, nvec, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn nvec(&self) -> usize {
        self.nvec
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, v: usize) -> f64 {
        self.data[r * self.nvec + v]
    }

    #[inline]
    pub fn set(&mut self, r: usize, v: usize, x: f64) {
        self.data[r * self.nvec + v] = x;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.nvec..(r + 1) * self.nvec]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.nvec..(r + 1) * self.nvec]
    }

    pub fn column(&self, v: usize) -> Vec<f64> {
        (0..self.nrows).map(|r| self.get(r, v)).collect()
    }

    /// Copy of rows `[start, end)`.
    pub fn rows(&self, start: usize, end: usize) -> BlockVector {
        BlockVector {
            nrows: end - start,
            nvec: self.nvec,
            data: self.data[start * self.nvec..end * self.nvec].to_vec(),
        }
    }

    /// Copy of the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> BlockVector {
        let mut out = BlockVector::zeros(self.nrows, cols.len());
        for r in 0..self.nrows {
            let src = self.row(r);
            for (dst, &c) in out.row_mut(r).iter_mut().zip(cols) {
                *dst = src[c];
            }
        }
        out
    }

    pub fn fill(&mut self, x: f64) {
        self.data.iter_mut().for_each(|d| *d = x);
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &BlockVector) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|d| *d *= alpha);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.nvec];
        for r in 0..self.nrows {
            for (a, x) in acc.iter_mut().zip(self.row(r)) {
                *a += x * x;
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }

    /// `self · C` for a small dense `C` with `nvec` rows.
    pub fn mul_small(&self, c: &SmallDense) -> Result<BlockVector> {
        let mut out = BlockVector::zeros(self.nrows, c.ncols());
        out.add_mul_small(self, c)?;
        Ok(out)
    }

    /// `self += A · C`.
    pub fn add_mul_small(&mut self, a: &BlockVector, c: &SmallDense) -> Result<()> {
        if a.nrows != self.nrows || c.nrows() != a.nvec || c.ncols() != self.nvec {
            return Err(mismatch(format!(
                "block update {}x{} += {}x{} * {}x{}",
                self.nrows,
                self.nvec,
                a.nrows,
                a.nvec,
                c.nrows(),
                c.ncols()
            )));
        }
        let out_w = self.nvec;
        for r in 0..self.nrows {
            let src = a.row(r);
            let dst = &mut self.data[r * out_w..(r + 1) * out_w];
            for (p, &x) in src.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (q, d) in dst.iter_mut().enumerate() {
                    *d += x * c.get(p, q);
                }
            }
        }
        Ok(())
    }

    /// Side-by-side concatenation `[a b ...]`.
    pub fn hcat(parts: &[&BlockVector]) -> Result<BlockVector> {
        let nrows = parts.first().map_or(0, |p| p.nrows);
        if parts.iter().any(|p| p.nrows != nrows) {
            return Err(mismatch("hcat of blocks with different row counts"));
        }
        let nvec: usize = parts.iter().map(|p| p.nvec).sum();
        let mut out = BlockVector::zeros(nrows, nvec);
        for r in 0..nrows {
            let mut off = 0;
            let dst = out.row_mut(r);
            for p in parts {
                dst[off..off + p.nvec].copy_from_slice(p.row(r));
                off += p.nvec;
            }
        }
        Ok(out)
    }

    pub(crate) fn check_same_shape(&self, other: &BlockVector) -> Result<()> {
        if self.nrows != other.nrows || self.nvec != other.nvec {
            return Err(mismatch(format!(
                "blocks {}x{} and {}x{}",
                self.nrows, self.nvec, other.nrows, other.nvec
            )));
        }
        Ok(())
    }
}
