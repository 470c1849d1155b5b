mod common;

use blockeig::error::Error;
use blockeig::precond::{
    apply_preconditioner, extract_tiles, fom_solve, fom_solve_tile, DiagonalTile, DiagonalTileSet, FomConfig,
};
use blockeig::spmm::{BlockVector, SymmetricCsb};
use common::{random_block, rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

const EXACT_REL_TOL: f64 = 1e-8;

/// Dense SPD tile `BᵀB/d + I`, stored with every off-diagonal entry.
fn spd_tile(seed: u64, d: usize) -> (DiagonalTile, DMatrix<f64>) {
    let mut r = rng(seed);
    let b = DMatrix::from_fn(d, d, |_, _| r.gen_range(-1.0..1.0));
    let k = b.transpose() * &b / d as f64 + DMatrix::identity(d, d);
    let diag = (0..d).map(|i| k[(i, i)]).collect();
    let mut off = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off.push((i, j, k[(i, j)]));
            }
        }
    }
    (DiagonalTile::new(diag, &off).unwrap(), k)
}

fn rel_err(got: &[f64], want: &DVector<f64>) -> f64 {
    let d: f64 = got.iter().zip(want.iter()).map(|(g, w)| (g - w).powi(2)).sum();
    d.sqrt() / want.norm()
}

#[test]
fn tiles_equal_dense_principal_submatrices() {
    let m = common::random_symmetric(11, 64, 0.2, 64);
    let offsets = [0, 10, 30, 64];
    let set = extract_tiles(&m, &offsets).unwrap();
    let full = m.to_dense();
    assert_eq!(set.len(), 3);
    for (t, w) in set.tiles().iter().zip(offsets.windows(2)) {
        let dense = t.to_dense();
        assert_eq!(dense.len(), w[1] - w[0]);
        for i in 0..dense.len() {
            for j in 0..dense.len() {
                assert_eq!(dense[i][j], full[w[0] + i][w[0] + j]);
            }
        }
    }
}

#[test]
fn tridiagonal_coupling_between_tiles_is_dropped() {
    let lower: Vec<_> = (1..6).map(|i| (i, i - 1, -1.0)).collect();
    let m = SymmetricCsb::from_lower_triples(6, &lower, vec![2.0; 6], 6).unwrap();
    let set = extract_tiles(&m, &[0, 3, 6]).unwrap();
    let want = vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]];
    assert_eq!(set.tiles()[0].to_dense(), want);
    assert_eq!(set.tiles()[1].to_dense(), want);
}

#[test]
fn tiles_straddling_a_block_are_rejected() {
    let m = common::random_symmetric(12, 40, 0.1, 20);
    assert!(matches!(extract_tiles(&m, &[0, 15, 25, 40]), Err(Error::MisalignedTiles { .. })));
    assert!(extract_tiles(&m, &[0, 5, 20, 40]).is_ok());
}

#[test]
fn full_dimension_fom_matches_dense_solve_below_spectrum() {
    let (tile, k) = spd_tile(13, 20);
    let lmin = k.clone().symmetric_eigenvalues().min();
    let sigma = lmin - 0.25;
    let mut r = rng(14);
    let rhs: Vec<f64> = (0..20).map(|_| r.gen_range(-1.0..1.0)).collect();
    let shifted = &k - DMatrix::identity(20, 20) * sigma;
    let want = shifted.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
    let got = fom_solve(&tile, sigma, &rhs, 20).unwrap();
    assert!(rel_err(&got, &want) <= EXACT_REL_TOL);
}

#[test]
fn block_diagonal_apply_matches_dense_block_solve() {
    let parts: Vec<_> = (0..3).map(|j| spd_tile(20 + j, 20)).collect();
    let set = DiagonalTileSet::new(vec![0, 20, 40, 60], parts.iter().map(|p| p.0.clone()).collect()).unwrap();
    let r = random_block(&mut rng(23), 60, 4);
    let (w, stats) = apply_preconditioner(&set, &[0.0; 4], &r, &FomConfig { iterations: 20 }).unwrap();
    assert_eq!(stats.fallbacks, 0);
    for (j, (_, k)) in parts.iter().enumerate() {
        let lu = k.clone().lu();
        for v in 0..4 {
            let rhs = DVector::from_fn(20, |i, _| r.get(20 * j + i, v));
            let want = lu.solve(&rhs).unwrap();
            let got: Vec<f64> = (0..20).map(|i| w.get(20 * j + i, v)).collect();
            assert!(rel_err(&got, &want) <= EXACT_REL_TOL);
        }
    }
}

#[test]
fn singular_shift_falls_back_to_residual() {
    let tile = DiagonalTile::new(vec![2.0], &[]).unwrap();
    assert!(matches!(fom_solve(&tile, 2.0, &[1.0], 1), Err(Error::SingularProjection { .. })));
    let set = DiagonalTileSet::new(vec![0, 1, 2], vec![tile.clone(), DiagonalTile::new(vec![4.0], &[]).unwrap()])
        .unwrap();
    let r = BlockVector::from_columns(&[vec![1.0, 8.0], vec![3.0, 2.0]]).unwrap();
    let (w, stats) = apply_preconditioner(&set, &[2.0, 0.0], &r, &FomConfig { iterations: 1 }).unwrap();
    assert_eq!(stats.fallbacks, 1);
    assert_eq!(w.column(0), vec![1.0, 4.0]);
    assert_eq!(w.column(1), vec![1.5, 0.5]);
}

#[test]
fn tile_results_do_not_depend_on_worker_count() {
    let m = common::random_symmetric(30, 300, 0.05, 100);
    let offsets: Vec<usize> = (0..=15).map(|i| i * 20).collect();
    let set = extract_tiles(&m, &offsets).unwrap();
    let r = random_block(&mut rng(31), 300, 5);
    let shifts = [-3.0, -2.5, -2.0, -1.0, -0.5];
    let cfg = FomConfig::default();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let (a, _) = one.install(|| apply_preconditioner(&set, &shifts, &r, &cfg)).unwrap();
    let (b, _) = four.install(|| apply_preconditioner(&set, &shifts, &r, &cfg)).unwrap();
    assert_eq!(a, b);
    // Tiles solved one at a time, last tile first.
    let mut c = BlockVector::zeros(300, 5);
    for (t, w) in set.tiles().iter().zip(offsets.windows(2)).rev() {
        if let Ok(x) = fom_solve_tile(t, &shifts, &r.rows(w[0], w[1]), cfg.iterations) {
            for i in 0..x.nrows() {
                c.row_mut(w[0] + i).copy_from_slice(x.row(i));
            }
        }
    }
    assert_eq!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shift_is_the_same_arithmetic_as_a_shifted_tile(seed in any::<u64>(), d in 1usize..25, sigma in -5.0f64..5.0, m in 1usize..8) {
        let (tile, _) = spd_tile(seed, d);
        let mut r = rng(seed ^ 1);
        let rhs: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let a = fom_solve(&tile, sigma, &rhs, m);
        let b = fom_solve(&tile.shifted(sigma), 0.0, &rhs, m);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())),
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn exact_once_krylov_space_is_full(seed in any::<u64>(), d in 1usize..30, extra in 0usize..4) {
        let (tile, k) = spd_tile(seed, d);
        let mut r = rng(seed ^ 2);
        let rhs: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let want = k.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let got = fom_solve(&tile, 0.0, &rhs, d + extra).unwrap();
        prop_assert!(rel_err(&got, &want) <= EXACT_REL_TOL);
    }

    #[test]
    fn zero_rhs_maps_to_zero(seed in any::<u64>(), d in 1usize..10, sigma in -3.0f64..3.0) {
        let (tile, _) = spd_tile(seed, d);
        prop_assert_eq!(fom_solve(&tile, sigma, &vec![0.0; d], 4).unwrap(), vec![0.0; d]);
    }
}
