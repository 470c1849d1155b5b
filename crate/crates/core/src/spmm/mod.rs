//! Compressed sparse block storage and the local SpMM kernels.

mod block_vector;
mod csb;
mod kernels;
mod symmetric;

pub use block_vector::BlockVector;
pub use csb::{uniform_boundaries, CsbCooMatrix, DEFAULT_BLOCK_EXTENT, MAX_BLOCK_EXTENT};
pub use kernels::{spmm_notrans, spmm_trans, KernelVariant, DEFAULT_CACHE_SIZE, DEFAULT_VECTOR_WIDTH};
pub use symmetric::{apply_symmetric, SymmetricCsb};
pub(crate) use symmetric::add_diagonal;
