//! Solve with an operator given only as a closure: the 2-D Laplacian on a
//! square grid, never stored.
//!
//!     cargo run --release --example matrix_free_operator

use std::f64::consts::PI;

use blockeig::lobpcg::{lobpcg_solve, FnOperator, SolverConfig};
use blockeig::spmm::BlockVector;

fn main() -> blockeig::Result<()> {
    let g = 40;
    let n = g * g;
    let mut op = FnOperator::new(n, move |w: &BlockVector| {
        let nv = w.nvec();
        let mut u = BlockVector::zeros(n, nv);
        for i in 0..g {
            for j in 0..g {
                let r = i * g + j;
                let out = u.row_mut(r);
                for (v, o) in out.iter_mut().enumerate() {
                    let mut s = 4.0 * w.get(r, v);
                    if i > 0 {
                        s -= w.get(r - g, v);
                    }
                    if i + 1 < g {
                        s -= w.get(r + g, v);
                    }
                    if j > 0 {
                        s -= w.get(r - 1, v);
                    }
                    if j + 1 < g {
                        s -= w.get(r + 1, v);
                    }
                    *o = s;
                }
            }
        }
        Ok(u)
    });

    let mut cfg = SolverConfig::new(4);
    cfg.tol = 1e-8;
    cfg.maxiter = 2000;
    let r = lobpcg_solve(&mut op, None, None, &cfg)?;

    let mut exact: Vec<f64> = (1..=4)
        .flat_map(|a| (1..=4).map(move |b| (a, b)))
        .map(|(a, b)| {
            let s = |k: usize| 4.0 * (k as f64 * PI / (2.0 * (g as f64 + 1.0))).sin().powi(2);
            s(a) + s(b)
        })
        .collect();
    exact.sort_by(f64::total_cmp);
    println!("{:?} in {} iterations", r.status, r.iterations);
    for (got, want) in r.eigenvalues.iter().zip(&exact) {
        println!("  {got:.10}  exact {want:.10}");
    }
    Ok(())
}
