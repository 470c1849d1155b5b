use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Largest row or column extent of a single block; local indices are stored
/// as `u16`.
pub const MAX_BLOCK_EXTENT: usize = 32_000;

/// Default block extent used when a caller does not choose one.
pub const DEFAULT_BLOCK_EXTENT: usize = 4_000;

const MAGIC: &[u8; 4] = b"CSB1";

/// Sparse matrix in compressed sparse block / coordinate (CSB_Coo) form.
///
/// Rows and columns are cut into blocks. `block_nnz` and
/// `block_nnz_offsets` are dense `nrowblks x ncolblks` tables (row-major)
/// giving each block's nonzero count and its start in the element arrays.
/// Elements carry block-local coordinates, so every block extent must stay
/// within [`MAX_BLOCK_EXTENT`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsbCooMatrix {
    pub(crate) nrows: usize,
    pub(crate) ncols: usize,
    pub(crate) row_offsets: Vec<usize>,
    pub(crate) col_offsets: Vec<usize>,
    pub(crate) block_nnz: Vec<usize>,
    pub(crate) block_nnz_offsets: Vec<usize>,
    pub(crate) local_rows: Vec<u16>,
    pub(crate) local_cols: Vec<u16>,
    pub(crate) values: Vec<f64>,
}

/// Block boundaries `[0, extent, 2*extent, ..., n]`.
pub fn uniform_boundaries(n: usize, extent: usize) -> Vec<usize> {
    let extent = extent.max(1);
    let mut b: Vec<usize> = (0..n).step_by(extent).collect();
    b.push(n);
    if n == 0 {
        b.insert(0, 0);
    }
    b
}

fn check_boundaries(bounds: &[usize], n: usize, what: &str) -> Result<()> {
    if bounds.len() < 2 || bounds[0] != 0 || *bounds.last().unwrap() != n {
        return Err(Error::BadParams(format!(
            "{what} boundaries must start at 0 and end at {n}"
        )));
    }
    for w in bounds.windows(2) {
        if w[1] < w[0] {
            return Err(Error::BadParams(format!("{what} boundaries are not sorted")));
        }
        if w[1] - w[0] > MAX_BLOCK_EXTENT {
            return Err(Error::BlockTooLarge {
                extent: w[1] - w[0],
                limit: MAX_BLOCK_EXTENT,
            });
        }
    }
    Ok(())
}

/// Maps every global index to the block that contains it.
fn index_to_block(bounds: &[usize]) -> Vec<u32> {
    let n = *bounds.last().unwrap();
    let mut map = vec![0u32; n];
    for (b, w) in bounds.windows(2).enumerate() {
        map[w[0]..w[1]].iter_mut().for_each(|m| *m = b as u32);
    }
    map
}

impl CsbCooMatrix {
    /// Builds a CSB_Coo matrix from global `(row, col, value)` triples.
    ///
    /// Nonzeros are grouped by block in row-major block order; inside a
    /// block they keep the order in which they were given.
    pub fn from_triples(
        triples: &[(usize, usize, f64)],
        nrows: usize,
        ncols: usize,
        block_rows: &[usize],
        block_cols: &[usize],
    ) -> Result<Self> {
        check_boundaries(block_rows, nrows, "row")?;
        check_boundaries(block_cols, ncols, "column")?;

        let mut seen = HashSet::with_capacity(triples.len());
        for &(row, col, _) in triples {
            if row >= nrows || col >= ncols {
                return Err(Error::IndexOutOfRange {
                    row,
                    col,
                    nrows,
                    ncols,
                });
            }
            if !seen.insert((row, col)) {
                return Err(Error::DuplicateEntry { row, col });
            }
        }

        let nrowblks = block_rows.len() - 1;
        let ncolblks = block_cols.len() - 1;
        let row_block = index_to_block(block_rows);
        let col_block = index_to_block(block_cols);
        let block_of = |r: usize, c: usize| row_block[r] as usize * ncolblks + col_block[c] as usize;

        let mut block_nnz = vec![0usize; nrowblks * ncolblks];
        for &(r, c, _) in triples {
            block_nnz[block_of(r, c)] += 1;
        }
        let mut block_nnz_offsets = Vec::with_capacity(block_nnz.len());
        let mut acc = 0;
        for &cnt in &block_nnz {
            block_nnz_offsets.push(acc);
            acc += cnt;
        }

        let nnz = triples.len();
        let mut local_rows = vec![0u16; nnz];
        let mut local_cols = vec![0u16; nnz];
        let mut values = vec![0.0; nnz];
        let mut cursor = block_nnz_offsets.clone();
        for &(r, c, v) in triples {
            let b = block_of(r, c);
            let k = cursor[b];
            cursor[b] += 1;
            local_rows[k] = (r - block_rows[row_block[r] as usize]) as u16;
            local_cols[k] = (c - block_cols[col_block[c] as usize]) as u16;
            values[k] = v;
        }

        Ok(Self {
            nrows,
            ncols,
            row_offsets: block_rows.to_vec(),
            col_offsets: block_cols.to_vec(),
            block_nnz,
            block_nnz_offsets,
            local_rows,
            local_cols,
            values,
        })
    }

    /// Same as [`from_triples`](Self::from_triples) with square blocks of a
    /// fixed extent.
    pub fn from_triples_uniform(
        triples: &[(usize, usize, f64)],
        nrows: usize,
        ncols: usize,
        extent: usize,
    ) -> Result<Self> {
        Self::from_triples(
            triples,
            nrows,
            ncols,
            &uniform_boundaries(nrows, extent),
            &uniform_boundaries(ncols, extent),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrowblks(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn ncolblks(&self) -> usize {
        self.col_offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_offsets(&self) -> &[usize] {
        &self.col_offsets
    }

    pub fn block_nnz(&self, i: usize, j: usize) -> usize {
        self.block_nnz[i * self.ncolblks() + j]
    }

    pub fn block_nnz_offset(&self, i: usize, j: usize) -> usize {
        self.block_nnz_offsets[i * self.ncolblks() + j]
    }

    pub fn local_rows(&self) -> &[u16] {
        &self.local_rows
    }

    pub fn local_cols(&self) -> &[u16] {
        &self.local_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Element index range of block `(i, j)`.
    #[inline]
    pub(crate) fn block_range(&self, i: usize, j: usize) -> std::ops::Range<usize> {
        let b = i * self.ncolblks() + j;
        let start = self.block_nnz_offsets[b];
        start..start + self.block_nnz[b]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest number of stored entries in any single row.
    pub fn max_row_nnz(&self) -> usize {
        let mut counts = vec![0usize; self.nrows];
        self.for_each_entry(|r, _, _| counts[r] += 1);
        counts.into_iter().max().unwrap_or(0)
    }

    /// Largest number of stored entries in any single column.
    pub fn max_col_nnz(&self) -> usize {
        let mut counts = vec![0usize; self.ncols];
        self.for_each_entry(|_, c, _| counts[c] += 1);
        counts.into_iter().max().unwrap_or(0)
    }

    /// Visits every stored entry with global coordinates, in storage order.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        for i in 0..self.nrowblks() {
            let rbase = self.row_offsets[i];
            for j in 0..self.ncolblks() {
                let cbase = self.col_offsets[j];
                for k in self.block_range(i, j) {
                    f(
                        rbase + self.local_rows[k] as usize,
                        cbase + self.local_cols[k] as usize,
                        self.values[k],
                    );
                }
            }
        }
    }

    /// Flattens back to global coordinate triples in storage order.
    pub fn to_triples(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        self.for_each_entry(|r, c, v| out.push((r, c, v)));
        out
    }

    /// Explicit transpose with the row and column blockings swapped.
    pub fn transpose(&self) -> CsbCooMatrix {
        let t: Vec<_> = self.to_triples().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triples(&t, self.ncols, self.nrows, &self.col_offsets, &self.row_offsets)
            .expect("transpose of a valid matrix is valid")
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        self.for_each_entry(|r, c, v| d[r][c] += v);
        d
    }

    /// Writes the little-endian `CSB1` binary cache format.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let u64s = |w: &mut dyn Write, xs: &[usize]| -> std::io::Result<()> {
            for &x in xs {
                w.write_all(&(x as u64).to_le_bytes())?;
            }
            Ok(())
        };
        w.write_all(MAGIC)?;
        u64s(
            &mut w,
            &[self.nrows, self.ncols, self.nrowblks(), self.ncolblks()],
        )?;
        u64s(&mut w, &self.row_offsets)?;
        u64s(&mut w, &self.col_offsets)?;
        u64s(&mut w, &self.block_nnz)?;
        u64s(&mut w, &self.block_nnz_offsets)?;
        for (r, c) in self.local_rows.iter().zip(&self.local_cols) {
            w.write_all(&r.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the `CSB1` binary cache format and re-checks its invariants.
    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let bad = |msg: &str| Error::ParseError {
            line: 0,
            msg: format!("CSB cache: {msg}"),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let read_u64s = |r: &mut dyn Read, n: usize| -> Result<Vec<usize>> {
            let mut buf = [0u8; 8];
            (0..n)
                .map(|_| {
                    r.read_exact(&mut buf)?;
                    Ok(u64::from_le_bytes(buf) as usize)
                })
                .collect()
        };
        let head = read_u64s(&mut r, 4)?;
        let (nrows, ncols, nrowblks, ncolblks) = (head[0], head[1], head[2], head[3]);
        let row_offsets = read_u64s(&mut r, nrowblks + 1)?;
        let col_offsets = read_u64s(&mut r, ncolblks + 1)?;
        check_boundaries(&row_offsets, nrows, "row")?;
        check_boundaries(&col_offsets, ncols, "column")?;
        let block_nnz = read_u64s(&mut r, nrowblks * ncolblks)?;
        let block_nnz_offsets = read_u64s(&mut r, nrowblks * ncolblks)?;
        let mut acc = 0;
        for (cnt, off) in block_nnz.iter().zip(&block_nnz_offsets) {
            if *off != acc {
                return Err(bad("block offsets are not an exclusive prefix sum"));
            }
            acc += cnt;
        }
        let nnz = acc;
        let mut local_rows = Vec::with_capacity(nnz);
        let mut local_cols = Vec::with_capacity(nnz);
        let mut b2 = [0u8; 2];
        for _ in 0..nnz {
            r.read_exact(&mut b2)?;
            local_rows.push(u16::from_le_bytes(b2));
            r.read_exact(&mut b2)?;
            local_cols.push(u16::from_le_bytes(b2));
        }
        let mut values = Vec::with_capacity(nnz);
        let mut b8 = [0u8; 8];
        for _ in 0..nnz {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        let m = Self {
            nrows,
            ncols,
            row_offsets,
            col_offsets,
            block_nnz,
            block_nnz_offsets,
            local_rows,
            local_cols,
            values,
        };
        for i in 0..nrowblks {
            let h = m.row_offsets[i + 1] - m.row_offsets[i];
            for j in 0..ncolblks {
                let w = m.col_offsets[j + 1] - m.col_offsets[j];
                for k in m.block_range(i, j) {
                    if m.local_rows[k] as usize >= h || m.local_cols[k] as usize >= w {
                        return Err(bad("local index outside its block"));
                    }
                }
            }
        }
        Ok(m)
    }
}
