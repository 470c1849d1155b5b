//! Small dense kernels for the projected problems: Gram products on
//! row-major blocks, Cholesky, triangular solves, Cholesky QR and a
//! generalized symmetric eigensolver.
//!
//! Projected matrices are at most a few dozen rows, so everything here is
//! unblocked and single-threaded.

use crate::error::{mismatch, Error, Result};
use crate::spmm::BlockVector;

/// Small dense matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallDense {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl SmallDense {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                data.push(f(i, j));
            }
        }
        Self { nrows, ncols, data }
    }

    /// Builds from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        Self::from_fn(rows.len(), ncols, |i, j| rows[i][j])
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Column-major storage.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[j * self.nrows + i] = x;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn transpose(&self) -> SmallDense {
        SmallDense::from_fn(self.ncols, self.nrows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &SmallDense) -> Result<SmallDense> {
        if self.ncols != other.nrows {
            return Err(mismatch(format!(
                "{}x{} * {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut out = SmallDense::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            for p in 0..self.ncols {
                let b = other.get(p, j);
                if b == 0.0 {
                    continue;
                }
                for i in 0..self.nrows {
                    out.data[j * self.nrows + i] += self.get(i, p) * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SmallDense) -> SmallDense {
        SmallDense::from_fn(self.nrows, self.ncols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    /// Replaces the matrix by `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        for j in 0..self.ncols {
            for i in j + 1..self.nrows {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, avg);
                self.set(j, i, avg);
            }
        }
    }

    /// Copy of the `nr x nc` sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> SmallDense {
        SmallDense::from_fn(nr, nc, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &SmallDense) {
        for j in 0..b.ncols {
            for i in 0..b.nrows {
                self.set(r0 + i, c0 + j, b.get(i, j));
            }
        }
    }

    /// Rows `[r0, r0 + nr)`.
    pub fn row_block(&self, r0: usize, nr: usize) -> SmallDense {
        self.block(r0, 0, nr, self.ncols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `AᵀB` for two row-major blocks with the same number of rows.
///
/// When `a` and `b` are the same block the result is symmetrized before
/// returning.
pub fn gram(a: &BlockVector, b: &BlockVector) -> Result<SmallDense> {
    if a.nrows() != b.nrows() {
        return Err(mismatch(format!(
            "gram of blocks with {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let (pa, pb) = (a.nvec(), b.nvec());
    // Row-major accumulator, transposed into column-major at the end.
    let mut acc = vec![0.0; pa * pb];
    for r in 0..a.nrows() {
        let ar = a.row(r);
        let br = b.row(r);
        for (p, &x) in ar.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let dst = &mut acc[p * pb..(p + 1) * pb];
            for (d, &y) in dst.iter_mut().zip(br) {
                *d += x * y;
            }
        }
    }
    let mut g = SmallDense::from_fn(pa, pb, |p, q| acc[p * pb + q]);
    if std::ptr::eq(a, b) {
        g.symmetrize();
    }
    Ok(g)
}

/// Pivots smaller than this multiple of the original diagonal entry are
/// treated as a loss of definiteness.
const CHOL_RELATIVE_PIVOT: f64 = 16.0 * f64::EPSILON;

/// Upper-triangular `R` with `B = RᵀR`.
pub fn cholesky(b: &SmallDense) -> Result<SmallDense> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(mismatch("cholesky of a non-square matrix"));
    }
    let mut r = SmallDense::zeros(n, n);
    for j in 0..n {
        let mut pivot = b.get(j, j);
        for k in 0..j {
            pivot -= r.get(k, j) * r.get(k, j);
        }
        if !(pivot > CHOL_RELATIVE_PIVOT * b.get(j, j).abs()) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let rjj = pivot.sqrt();
        r.set(j, j, rjj);
        for i in j + 1..n {
            let mut s = b.get(j, i);
            for k in 0..j {
                s -= r.get(k, j) * r.get(k, i);
            }
            r.set(j, i, s / rjj);
        }
    }
    Ok(r)
}

fn check_triangular(r: &SmallDense) -> Result<()> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(mismatch("triangular factor is not square"));
    }
    let dmax = (0..n).fold(0.0f64, |m, i| m.max(r.get(i, i).abs()));
    let dmin = (0..n).fold(f64::INFINITY, |m, i| m.min(r.get(i, i).abs()));
    if n > 0 && !(dmin > 1e-14 * dmax) {
        return Err(Error::SingularTriangular);
    }
    Ok(())
}

/// `W ← W·R⁻¹` in place for upper-triangular `R`, one row at a time.
pub fn trsm_right_inv(w: &mut BlockVector, r: &SmallDense) -> Result<()> {
    check_triangular(r)?;
    let n = r.nrows();
    if w.nvec() != n {
        return Err(mismatch(format!("trsm of {} columns by {}x{}", w.nvec(), n, n)));
    }
    for row in 0..w.nrows() {
        let x = w.row_mut(row);
        for j in 0..n {
            let mut s = x[j];
            for i in 0..j {
                s -= x[i] * r.get(i, j);
            }
            x[j] = s / r.get(j, j);
        }
    }
    Ok(())
}

/// `R⁻¹·M` for upper-triangular `R` (back substitution on each column).
pub fn solve_upper(r: &SmallDense, m: &SmallDense) -> Result<SmallDense> {
    check_triangular(r)?;
    let n = r.nrows();
    if m.nrows() != n {
        return Err(mismatch("solve_upper row count"));
    }
    let mut out = m.clone();
    for c in 0..m.ncols() {
        for i in (0..n).rev() {
            let mut s = out.get(i, c);
            for k in i + 1..n {
                s -= r.get(i, k) * out.get(k, c);
            }
            out.set(i, c, s / r.get(i, i));
        }
    }
    Ok(out)
}

/// `R⁻ᵀ·M` for upper-triangular `R` (forward substitution with `Rᵀ`).
pub fn solve_upper_transpose(r: &SmallDense, m: &SmallDense) -> Result<SmallDense> {
    check_triangular(r)?;
    let n = r.nrows();
    if m.nrows() != n {
        return Err(mismatch("solve_upper_transpose row count"));
    }
    let mut out = m.clone();
    for c in 0..m.ncols() {
        for i in 0..n {
            let mut s = out.get(i, c);
            for k in 0..i {
                s -= r.get(k, i) * out.get(k, c);
            }
            out.set(i, c, s / r.get(i, i));
        }
    }
    Ok(out)
}

/// Orthonormalizes the columns of `x`, returning `(Q, R)` with `X = Q·R`,
/// `QᵀQ = I` and `R` upper triangular.
///
/// Equivalent to a QR factorization of `Xᵀ`'s transpose, computed as
/// Cholesky QR with one reorthogonalization pass.
pub fn qr_of_transpose(x: &BlockVector) -> Result<(BlockVector, SmallDense)> {
    if x.nvec() > x.nrows() {
        return Err(Error::RankDeficient);
    }
    let mut q = x.clone();
    let mut rfac = SmallDense::identity(x.nvec());
    for _ in 0..2 {
        let b = gram(&q, &q)?;
        let r = cholesky(&b).map_err(|_| Error::RankDeficient)?;
        trsm_right_inv(&mut q, &r).map_err(|_| Error::RankDeficient)?;
        rfac = r.matmul(&rfac)?;
    }
    Ok((q, rfac))
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi.
///
/// Eigenvalues come back ascending; each eigenvector column is scaled so its
/// largest-magnitude entry is positive.
pub fn sym_eig(a: &SmallDense) -> Result<(Vec<f64>, SmallDense)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(mismatch("sym_eig of a non-square matrix"));
    }
    let mut m = a.clone();
    m.symmetrize();
    let mut v = SmallDense::identity(n);
    let total = m.frobenius_norm();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-2 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m.get(x, x).total_cmp(&m.get(y, y)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = SmallDense::from_fn(n, n, |i, j| v.get(i, order[j]));
    normalize_signs(&mut vectors);
    Ok((values, vectors))
}

/// Flips each column so its largest-magnitude entry is positive.
fn normalize_signs(c: &mut SmallDense) {
    for j in 0..c.ncols() {
        let col = c.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col.get(best).is_some_and(|&x| x < 0.0) {
            for i in 0..c.nrows() {
                c.set(i, j, -c.get(i, j));
            }
        }
    }
}

/// The `k` smallest eigenpairs of the pencil `(A, B)` with `B` positive
/// definite.
///
/// Returns `(C, D)` with `A·C = B·C·diag(D)` and `Cᵀ·B·C = I`. The pencil is
/// reduced to a standard problem through `B = RᵀR`.
pub fn sygv_lowest(a: &SmallDense, b: &SmallDense, k: usize) -> Result<(SmallDense, Vec<f64>)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(mismatch("sygv with non-conforming pencil"));
    }
    if k > n {
        return Err(mismatch(format!("asked for {k} eigenpairs of a {n}x{n} pencil")));
    }
    let r = cholesky(b)?;
    // M = R⁻ᵀ A R⁻¹
    let ar = solve_upper_transpose(&r, &a.transpose())?.transpose();
    let mut m = solve_upper_transpose(&r, &ar)?;
    m.symmetrize();
    let (values, vectors) = sym_eig(&m)?;
    let mut c = solve_upper(&r, &vectors.block(0, 0, n, k))?;
    normalize_signs(&mut c);
    Ok((c, values[..k].to_vec()))
}
