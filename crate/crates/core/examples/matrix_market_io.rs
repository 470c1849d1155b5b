//! Write a generated matrix as Matrix Market, read it back, and solve it.
//!
//!     cargo run --release --example matrix_market_io [file.mtx]

use blockeig::cli::{
    generate_synthetic, ingest_matrix_market, write_matrix_market, SyntheticKind, SyntheticParams,
};
use blockeig::lobpcg::{lobpcg_solve, CsbOperator, SolverConfig};
use blockeig::spmm::KernelVariant;

fn main() -> blockeig::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("blockeig-example.mtx");
            let mut params = SyntheticParams::new(SyntheticKind::Banded, 800);
            params.bandwidth = 6;
            let m = generate_synthetic(&params)?.matrix;
            write_matrix_market(&m, std::io::BufWriter::new(std::fs::File::create(&p)?))?;
            println!("wrote {}", p.display());
            p
        }
    };
    let m = ingest_matrix_market(&path)?;
    println!("n = {}, {} nonzeros", m.n, m.full_nnz());
    let csb = m.to_csb(256)?;
    let r = lobpcg_solve(&mut CsbOperator::new(&csb, KernelVariant::Baseline), None, None, &SolverConfig::new(3))?;
    println!("{:?}: {:.8?}", r.status, r.eigenvalues);
    Ok(())
}
