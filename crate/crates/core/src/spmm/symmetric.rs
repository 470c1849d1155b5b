use super::{spmm_notrans, spmm_trans, BlockVector, CsbCooMatrix, KernelVariant};
use crate::error::{mismatch, Error, Result};

/// Half-stored symmetric matrix `L + Lᵀ + diag(D)`, with `L` strictly lower
/// triangular in CSB_Coo form and the diagonal held separately.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCsb {
    lower: CsbCooMatrix,
    diag: Vec<f64>,
}

impl SymmetricCsb {
    pub fn new(lower: CsbCooMatrix, diag: Vec<f64>) -> Result<Self> {
        check_strictly_lower(&lower)?;
        if lower.nrows() != lower.ncols() || diag.len() != lower.nrows() {
            return Err(mismatch(format!(
                "{}x{} lower part with {} diagonal entries",
                lower.nrows(),
                lower.ncols(),
                diag.len()
            )));
        }
        Ok(Self { lower, diag })
    }

    /// Builds from strictly-lower triples with square blocks of `extent`.
    pub fn from_lower_triples(
        n: usize,
        lower: &[(usize, usize, f64)],
        diag: Vec<f64>,
        extent: usize,
    ) -> Result<Self> {
        Self::new(CsbCooMatrix::from_triples_uniform(lower, n, n, extent)?, diag)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn lower(&self) -> &CsbCooMatrix {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Stored nonzeros of the full symmetric matrix.
    pub fn full_nnz(&self) -> usize {
        2 * self.lower.nnz() + self.diag.iter().filter(|&&d| d != 0.0).count()
    }

    pub fn apply(&self, w: &BlockVector, variant: KernelVariant) -> Result<BlockVector> {
        apply_symmetric(&self.lower, &self.diag, w, variant)
    }

    /// The `CSB1` image of the lower part followed by the diagonal.
    pub fn write_binary(&self, mut w: impl std::io::Write) -> Result<()> {
        self.lower.write_binary(&mut w)?;
        w.write_all(&(self.diag.len() as u64).to_le_bytes())?;
        for d in &self.diag {
            w.write_all(&d.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl std::io::Read) -> Result<Self> {
        let lower = CsbCooMatrix::read_binary(&mut r)?;
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let n = u64::from_le_bytes(b) as usize;
        if n != lower.nrows() {
            return Err(Error::ParseError {
                line: 0,
                msg: format!("CSB cache: diagonal of length {n} for dimension {}", lower.nrows()),
            });
        }
        let mut diag = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b)?;
            diag.push(f64::from_le_bytes(b));
        }
        Self::new(lower, diag)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        self.lower.for_each_entry(|r, c, v| {
            d[r][c] += v;
            d[c][r] += v;
        });
        for (i, &x) in self.diag.iter().enumerate() {
            d[i][i] += x;
        }
        d
    }
}

pub(crate) fn check_strictly_lower(l: &CsbCooMatrix) -> Result<()> {
    let mut bad = None;
    l.for_each_entry(|r, c, _| {
        if r <= c && bad.is_none() {
            bad = Some((r, c));
        }
    });
    match bad {
        Some((row, col)) => Err(Error::NotStrictlyLower { row, col }),
        None => Ok(()),
    }
}

/// `(L + Lᵀ + diag(D))·W` as a no-transpose pass, a transpose pass and a
/// diagonal scaling.
pub fn apply_symmetric(
    lower: &CsbCooMatrix,
    diag: &[f64],
    w: &BlockVector,
    variant: KernelVariant,
) -> Result<BlockVector> {
    check_strictly_lower(lower)?;
    if diag.len() != lower.nrows() || w.nrows() != lower.nrows() || lower.nrows() != lower.ncols() {
        return Err(mismatch(format!(
            "symmetric apply: {}x{} lower, {} diagonal, {} rows in W",
            lower.nrows(),
            lower.ncols(),
            diag.len(),
            w.nrows()
        )));
    }
    let mut u = BlockVector::zeros(w.nrows(), w.nvec());
    spmm_notrans(lower, w, &mut u, variant)?;
    spmm_trans(lower, w, &mut u, variant)?;
    add_diagonal(diag, w, &mut u);
    Ok(u)
}

pub(crate) fn add_diagonal(diag: &[f64], w: &BlockVector, u: &mut BlockVector) {
    for (r, &d) in diag.iter().enumerate() {
        for (o, &x) in u.row_mut(r).iter_mut().zip(w.row(r)) {
            *o += d * x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_only() {
        let l = CsbCooMatrix::from_triples(&[], 3, 3, &[0, 3], &[0, 3]).unwrap();
        let w = BlockVector::from_columns(&[vec![1.0; 3]]).unwrap();
        let u = apply_symmetric(&l, &[2.0, 2.0, 2.0], &w, KernelVariant::Baseline).unwrap();
        assert_eq!(u.data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn single_entry_acts_symmetrically() {
        let l = CsbCooMatrix::from_triples(&[(2, 0, 5.0)], 3, 3, &[0, 3], &[0, 3]).unwrap();
        let d = [0.0; 3];
        for variant in [KernelVariant::Baseline, KernelVariant::FusedAtomic, KernelVariant::cache_blocked(2)] {
            let e0 = BlockVector::from_columns(&[vec![1.0, 0.0, 0.0]]).unwrap();
            let u = apply_symmetric(&l, &d, &e0, variant).unwrap();
            assert_eq!(u.data(), &[0.0, 0.0, 5.0]);
            let e2 = BlockVector::from_columns(&[vec![0.0, 0.0, 1.0]]).unwrap();
            let u = apply_symmetric(&l, &d, &e2, variant).unwrap();
            assert_eq!(u.data(), &[5.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn rejects_upper_and_diagonal_entries() {
        let up = CsbCooMatrix::from_triples(&[(0, 1, 1.0)], 2, 2, &[0, 2], &[0, 2]).unwrap();
        assert_eq!(
            SymmetricCsb::new(up, vec![0.0; 2]).unwrap_err(),
            Error::NotStrictlyLower { row: 0, col: 1 }
        );
        let dg = CsbCooMatrix::from_triples(&[(1, 1, 1.0)], 2, 2, &[0, 2], &[0, 2]).unwrap();
        let w = BlockVector::zeros(2, 1);
        assert!(matches!(
            apply_symmetric(&dg, &[0.0; 2], &w, KernelVariant::Baseline),
            Err(Error::NotStrictlyLower { .. })
        ));
    }

    #[test]
    fn diagonal_length_checked() {
        let l = CsbCooMatrix::from_triples(&[], 3, 3, &[0, 3], &[0, 3]).unwrap();
        assert!(matches!(SymmetricCsb::new(l, vec![1.0; 2]), Err(Error::DimensionMismatch(_))));
    }
}
