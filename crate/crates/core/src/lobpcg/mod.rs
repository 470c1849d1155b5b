//! Block eigensolver for the lowest eigenpairs of a sparse symmetric
//! operator.
//!
//! Each iteration searches `span([X W P])` for the new iterates, where `W`
//! holds the preconditioned residuals and `P` the previous search
//! direction. The products `HX` and `HP` are carried forward by recurrence,
//! so the operator is applied once per iteration, to `W`.

mod operator;
mod ritz;
mod solver;

pub use operator::{diagonal_operator, CsbOperator, FnOperator, SymmetricOperator};
pub use ritz::{
    convergence_check, rayleigh_ritz, rayleigh_ritz_with, residual_block, update_blocks,
    BasisParts, RitzCoefficients,
};
pub use solver::{
    lobpcg_solve, lobpcg_solve_observed, ConvergenceHistory, IterationRecord, PhaseTimings,
    SolveResult, SolveStatus, SolverConfig, SolverState,
};
