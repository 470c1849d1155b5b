//! Command-line driver: matrix input and synthesis, solves, kernel
//! benchmarks and JSON reports.

mod commands;
mod matrix_market;
mod report;
mod synthetic;

pub use commands::{
    cmd_bench, cmd_explain_layout, cmd_solve, exit_code, parse_sweep, run, BenchArgs, Cli, Command,
    LayoutArgs, MatrixArgs, SolveArgs, VariantArg, BENCH_GATE_TOL, EXIT_INPUT, EXIT_NUMERICAL,
    EXIT_OK, EXIT_OTHER, EXIT_USAGE,
};
pub use matrix_market::{
    block_aligned_tiles, ingest_matrix_market, read_matrix_market, write_matrix_market,
    SymmetricTriples,
};
pub use report::{BenchReport, BenchRow, MatrixSummary, RunReport, SolveSummary, SCHEMA_VERSION};
pub use synthetic::{generate_synthetic, SyntheticKind, SyntheticMatrix, SyntheticParams};
