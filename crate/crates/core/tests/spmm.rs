mod common;

use blockeig::spmm::{
    apply_symmetric, spmm_notrans, spmm_trans, uniform_boundaries, BlockVector, CsbCooMatrix, KernelVariant,
};
use common::{random_block, rel_diff, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

const VARIANT_REL_TOL: f64 = 1e-10;
const ORACLE_ABS_TOL: f64 = 1e-12;

fn variants() -> [KernelVariant; 4] {
    [
        KernelVariant::Baseline,
        KernelVariant::FusedAtomic,
        KernelVariant::cache_blocked(7),
        KernelVariant::cache_blocked(256),
    ]
}

fn random_triples(seed: u64, nrows: usize, ncols: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut r = rng(seed);
    let mut t = Vec::new();
    for i in 0..nrows {
        for j in 0..ncols {
            if r.gen_bool(density) {
                t.push((i, j, r.gen_range(-1.0..1.0)));
            }
        }
    }
    t
}

fn dense_of(m: &CsbCooMatrix) -> DMatrix<f64> {
    let rows = m.to_dense();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| rows[i][j])
}

fn to_dmatrix(w: &BlockVector) -> DMatrix<f64> {
    DMatrix::from_fn(w.nrows(), w.nvec(), |i, j| w.get(i, j))
}

/// Element-wise check against a dense product, scaled by the row nonzero bound.
fn assert_matches_dense(got: &BlockVector, want: &DMatrix<f64>, m: &CsbCooMatrix, w: &BlockVector) {
    let bound = ORACLE_ABS_TOL
        * m.max_abs().max(1.0)
        * w.max_abs().max(1.0)
        * m.max_row_nnz().max(m.max_col_nnz()).max(1) as f64;
    for i in 0..got.nrows() {
        for v in 0..got.nvec() {
            let d = (got.get(i, v) - want[(i, v)]).abs();
            assert!(d <= bound, "({i},{v}): {} vs {} (bound {bound})", got.get(i, v), want[(i, v)]);
        }
    }
}

#[test]
fn random_64_with_four_blocks_matches_dense_gemm() {
    let t = random_triples(1, 64, 64, 0.15);
    let b = uniform_boundaries(64, 16);
    let m = CsbCooMatrix::from_triples(&t, 64, 64, &b, &b).unwrap();
    assert_eq!((m.nrowblks(), m.ncolblks()), (4, 4));
    let w = random_block(&mut rng(2), 64, 8);
    let hd = dense_of(&m);
    let want = &hd * to_dmatrix(&w);
    let want_t = hd.transpose() * to_dmatrix(&w);
    for variant in variants() {
        let mut u = BlockVector::zeros(64, 8);
        spmm_notrans(&m, &w, &mut u, variant).unwrap();
        assert_matches_dense(&u, &want, &m, &w);
        let mut ut = BlockVector::zeros(64, 8);
        spmm_trans(&m, &w, &mut ut, variant).unwrap();
        assert_matches_dense(&ut, &want_t, &m, &w);
    }
}

#[test]
fn rectangular_uneven_blocks_match_dense() {
    let t = random_triples(3, 70, 45, 0.1);
    let m = CsbCooMatrix::from_triples(&t, 70, 45, &[0, 9, 40, 41, 70], &[0, 20, 45]).unwrap();
    let w = random_block(&mut rng(4), 45, 5);
    let v = random_block(&mut rng(5), 70, 5);
    let hd = dense_of(&m);
    for variant in variants() {
        let mut u = BlockVector::zeros(70, 5);
        spmm_notrans(&m, &w, &mut u, variant).unwrap();
        assert_matches_dense(&u, &(&hd * to_dmatrix(&w)), &m, &w);
        let mut ut = BlockVector::zeros(45, 5);
        spmm_trans(&m, &v, &mut ut, variant).unwrap();
        assert_matches_dense(&ut, &(hd.transpose() * to_dmatrix(&v)), &m, &v);
    }
}

#[test]
fn trans_equals_notrans_of_explicit_transpose() {
    let t = random_triples(6, 50, 50, 0.08);
    let b = uniform_boundaries(50, 16);
    let m = CsbCooMatrix::from_triples(&t, 50, 50, &b, &b).unwrap();
    let mt = m.transpose();
    let w = random_block(&mut rng(7), 50, 4);
    for variant in variants() {
        let mut a = BlockVector::zeros(50, 4);
        spmm_trans(&m, &w, &mut a, variant).unwrap();
        let mut b = BlockVector::zeros(50, 4);
        spmm_notrans(&mt, &w, &mut b, variant).unwrap();
        assert!(rel_diff(&a, &b) <= VARIANT_REL_TOL);
    }
}

#[test]
fn symmetric_apply_matches_dense() {
    let mut r = rng(8);
    let (lower, diag) = common::random_lower(&mut r, 128, 0.05, 0.0);
    let b = uniform_boundaries(128, 40);
    let l = CsbCooMatrix::from_triples(&lower, 128, 128, &b, &b).unwrap();
    let w = random_block(&mut r, 128, 8);
    let mut full = dense_of(&l);
    full += full.transpose();
    for (i, d) in diag.iter().enumerate() {
        full[(i, i)] += d;
    }
    let want = &full * to_dmatrix(&w);
    for variant in variants() {
        let u = apply_symmetric(&l, &diag, &w, variant).unwrap();
        assert_matches_dense(&u, &want, &l, &w);
    }
}

#[test]
fn binary_cache_round_trip() {
    let t = random_triples(9, 40, 33, 0.1);
    let m = CsbCooMatrix::from_triples(&t, 40, 33, &[0, 13, 40], &[0, 11, 22, 33]).unwrap();
    let mut buf = Vec::new();
    m.write_binary(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"CSB1");
    assert_eq!(CsbCooMatrix::read_binary(buf.as_slice()).unwrap(), m);
}

fn sorted(mut t: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, u64)> {
    t.sort_by_key(|a| (a.0, a.1));
    t.into_iter().map(|(i, j, v)| (i, j, v.to_bits())).collect()
}

/// A random matrix together with random block boundaries.
fn arb_matrix() -> impl Strategy<Value = (CsbCooMatrix, Vec<(usize, usize, f64)>)> {
    (1usize..60, 1usize..60, 0.0f64..0.3, any::<u64>(), 1usize..5, 1usize..5).prop_map(
        |(nr, nc, dens, seed, rb, cb)| {
            let t = random_triples(seed, nr, nc, dens);
            let rows = uniform_boundaries(nr, nr.div_ceil(rb).max(1));
            let cols = uniform_boundaries(nc, nc.div_ceil(cb).max(1));
            (CsbCooMatrix::from_triples(&t, nr, nc, &rows, &cols).unwrap(), t)
        },
    )
}

fn dot(a: &BlockVector, b: &BlockVector) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variants_agree((m, _) in arb_matrix(), nv in 1usize..11, seed in any::<u64>(), cache in 1usize..64) {
        let w = random_block(&mut rng(seed), m.ncols(), nv);
        let mut base = BlockVector::zeros(m.nrows(), nv);
        spmm_notrans(&m, &w, &mut base, KernelVariant::Baseline).unwrap();
        for variant in [KernelVariant::FusedAtomic, KernelVariant::cache_blocked(cache)] {
            let mut u = BlockVector::zeros(m.nrows(), nv);
            spmm_notrans(&m, &w, &mut u, variant).unwrap();
            let mut d = u.clone();
            d.axpy(-1.0, &base).unwrap();
            prop_assert!(d.frobenius_norm() <= VARIANT_REL_TOL * base.frobenius_norm().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn linear_in_the_multivector((m, _) in arb_matrix(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let w1 = random_block(&mut r, m.ncols(), 3);
        let w2 = random_block(&mut r, m.ncols(), 3);
        let mut comb = w1.clone();
        comb.scale(a);
        comb.axpy(b, &w2).unwrap();
        for variant in variants() {
            let mut lhs = BlockVector::zeros(m.nrows(), 3);
            spmm_notrans(&m, &comb, &mut lhs, variant).unwrap();
            let mut u1 = BlockVector::zeros(m.nrows(), 3);
            spmm_notrans(&m, &w1, &mut u1, variant).unwrap();
            let mut u2 = BlockVector::zeros(m.nrows(), 3);
            spmm_notrans(&m, &w2, &mut u2, variant).unwrap();
            u1.scale(a);
            u1.axpy(b, &u2).unwrap();
            let mut d = lhs.clone();
            d.axpy(-1.0, &u1).unwrap();
            let scale = (a.abs() + b.abs()) * m.max_abs() * m.max_row_nnz() as f64 * (m.nrows() * 3) as f64;
            prop_assert!(d.frobenius_norm() <= 1e-13 * scale.max(1.0));
        }
    }

    #[test]
    fn transpose_is_adjoint((m, _) in arb_matrix(), nv in 1usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = random_block(&mut r, m.ncols(), nv);
        let v = random_block(&mut r, m.nrows(), nv);
        for variant in variants() {
            let mut hw = BlockVector::zeros(m.nrows(), nv);
            spmm_notrans(&m, &w, &mut hw, variant).unwrap();
            let mut htv = BlockVector::zeros(m.ncols(), nv);
            spmm_trans(&m, &v, &mut htv, variant).unwrap();
            let scale = m.max_abs() * (m.nnz() * nv) as f64;
            prop_assert!((dot(&hw, &v) - dot(&w, &htv)).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn coo_round_trip_and_index_width((m, t) in arb_matrix()) {
        prop_assert_eq!(sorted(m.to_triples()), sorted(t.clone()));
        prop_assert_eq!(m.nnz(), t.len());
        prop_assert!(m.local_rows().iter().chain(m.local_cols()).all(|&x| x < 32_000));
        let mut total = 0;
        for i in 0..m.nrowblks() {
            for j in 0..m.ncolblks() {
                prop_assert_eq!(m.block_nnz_offset(i, j), total);
                total += m.block_nnz(i, j);
            }
        }
        prop_assert_eq!(total, m.values().len());
    }
}
