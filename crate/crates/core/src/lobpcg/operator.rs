use crate::densela::{self, SmallDense};
use crate::error::{mismatch, Result};
use crate::spmm::{BlockVector, KernelVariant, SymmetricCsb};

/// A symmetric linear operator as seen by the eigensolver.
///
/// `gram` defaults to the serial product; distributed operators override
/// it with a partial product per rank followed by a global sum.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;

    /// `H·W`.
    fn apply(&mut self, w: &BlockVector) -> Result<BlockVector>;

    /// `AᵀB`.
    fn gram(&mut self, a: &BlockVector, b: &BlockVector) -> Result<SmallDense> {
        densela::gram(a, b)
    }

    /// Values moved between ranks so far, if the operator is distributed.
    fn comm_volume(&self) -> u64 {
        0
    }
}

impl<T: SymmetricOperator + ?Sized> SymmetricOperator for &mut T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&mut self, w: &BlockVector) -> Result<BlockVector> {
        (**self).apply(w)
    }
    fn gram(&mut self, a: &BlockVector, b: &BlockVector) -> Result<SmallDense> {
        (**self).gram(a, b)
    }
    fn comm_volume(&self) -> u64 {
        (**self).comm_volume()
    }
}

/// Half-stored sparse matrix applied with one of the SpMM kernels.
#[derive(Debug, Clone, Copy)]
pub struct CsbOperator<'a> {
    pub matrix: &'a SymmetricCsb,
    pub variant: KernelVariant,
}

impl<'a> CsbOperator<'a> {
    pub fn new(matrix: &'a SymmetricCsb, variant: KernelVariant) -> Self {
        Self { matrix, variant }
    }
}

impl SymmetricOperator for CsbOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&mut self, w: &BlockVector) -> Result<BlockVector> {
        self.matrix.apply(w, self.variant)
    }
}

/// Operator given by a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: FnMut(&BlockVector) -> Result<BlockVector>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> SymmetricOperator for FnOperator<F>
where
    F: FnMut(&BlockVector) -> Result<BlockVector>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&mut self, w: &BlockVector) -> Result<BlockVector> {
        if w.nrows() != self.dim {
            return Err(mismatch(format!(
                "operator of dimension {} applied to {} rows",
                self.dim,
                w.nrows()
            )));
        }
        (self.f)(w)
    }
}

/// Diagonal operator `diag(d)`.
pub fn diagonal_operator(d: Vec<f64>) -> FnOperator<impl FnMut(&BlockVector) -> Result<BlockVector>> {
    let n = d.len();
    FnOperator::new(n, move |w: &BlockVector| {
        let mut out = w.clone();
        for (r, &x) in d.iter().enumerate() {
            out.row_mut(r).iter_mut().for_each(|v| *v *= x);
        }
        Ok(out)
    })
}
