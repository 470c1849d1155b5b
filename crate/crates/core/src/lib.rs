//! Block-iterative sparse symmetric eigensolver.
//!
//! The crate computes a few of the smallest eigenpairs of a large sparse
//! symmetric matrix with LOBPCG. It provides:
//!
//! * [`spmm`]: compressed sparse block (CSB_Coo) storage and three SpMM
//!   kernel strategies over row-major blocks of vectors;
//! * [`precond`]: a block-diagonal preconditioner that solves shifted
//!   diagonal tiles with a few steps of the full orthogonalization method;
//! * [`densela`]: the small dense kernels used by Rayleigh-Ritz;
//! * [`lobpcg`]: the solver itself;
//! * [`dist`]: a simulated distributed-memory layer with a triangular
//!   partition of the half-stored matrix and in-process collectives;
//! * [`cli`]: matrix ingestion, synthetic generators, reports and the
//!   command entry points used by the `blockeig` binary.

pub mod cli;
pub mod densela;
pub mod dist;
pub mod error;
pub mod lobpcg;
pub mod precond;
pub mod spmm;

pub use error::{Error, Result};
