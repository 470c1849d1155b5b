//! Local SpMM kernels over [`CsbCooMatrix`].
//!
//! Three parallel strategies are provided, following the progression from a
//! row-block parallel loop to a fused loop over all nonzero blocks with
//! conflict-resolved accumulation, and finally a cache-blocked variant with
//! staged index and value buffers.
//!
//! The fused variants guard each output section with a lock taken once per
//! block. A task that finds its section busy accumulates into worker-private
//! scratch and adds that in afterwards. Element-wise compare-and-swap on
//! `f64` costs several times the multiply-add it protects on current CPUs.

use std::sync::{Mutex, TryLockError};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BlockVector, CsbCooMatrix};
use crate::error::{mismatch, Error, Result};

pub const DEFAULT_CACHE_SIZE: usize = 256;
pub const DEFAULT_VECTOR_WIDTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum KernelVariant {
    /// One worker per output row block; no write conflicts.
    #[default]
    Baseline,
    /// One task per nonzero `(row block, col block)` pair; concurrent
    /// updates to the same output section are serialized.
    FusedAtomic,
    /// As `FusedAtomic`, with each block walked in chunks of `cache_size`
    /// nonzeros staged into worker-private buffers. `vector_width` is
    /// recorded for reporting only.
    CacheBlocked {
        cache_size: usize,
        vector_width: usize,
    },
}

impl KernelVariant {
    pub fn cache_blocked(cache_size: usize) -> Self {
        KernelVariant::CacheBlocked {
            cache_size,
            vector_width: DEFAULT_VECTOR_WIDTH,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelVariant::Baseline => "baseline",
            KernelVariant::FusedAtomic => "fused-atomic",
            KernelVariant::CacheBlocked { .. } => "cache-blocked",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelVariant::CacheBlocked {
            cache_size,
            vector_width,
        } = *self
        {
            if cache_size == 0 || vector_width == 0 {
                return Err(Error::BadParams(
                    "cache_size and vector_width must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Which operand of the stored matrix the kernel applies.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    NoTrans,
    Trans,
}

/// `U += H * W`.
pub fn spmm_notrans(
    h: &CsbCooMatrix,
    w: &BlockVector,
    u: &mut BlockVector,
    variant: KernelVariant,
) -> Result<()> {
    check_dims(h, w, u, Op::NoTrans)?;
    dispatch(h, w, u, variant, Op::NoTrans)
}

/// `U += Hᵀ * W`, walking the same storage with rows and columns swapped.
pub fn spmm_trans(
    h: &CsbCooMatrix,
    w: &BlockVector,
    u: &mut BlockVector,
    variant: KernelVariant,
) -> Result<()> {
    check_dims(h, w, u, Op::Trans)?;
    dispatch(h, w, u, variant, Op::Trans)
}

fn check_dims(h: &CsbCooMatrix, w: &BlockVector, u: &BlockVector, op: Op) -> Result<()> {
    let (in_rows, out_rows) = match op {
        Op::NoTrans => (h.ncols, h.nrows),
        Op::Trans => (h.nrows, h.ncols),
    };
    if w.nrows() != in_rows || u.nrows() != out_rows || w.nvec() != u.nvec() {
        return Err(mismatch(format!(
            "spmm with {}x{} matrix (trans={}), input {}x{}, output {}x{}",
            h.nrows,
            h.ncols,
            op == Op::Trans,
            w.nrows(),
            w.nvec(),
            u.nrows(),
            u.nvec()
        )));
    }
    Ok(())
}

fn dispatch(
    h: &CsbCooMatrix,
    w: &BlockVector,
    u: &mut BlockVector,
    variant: KernelVariant,
    op: Op,
) -> Result<()> {
    variant.validate()?;
    if h.nnz() == 0 || w.nvec() == 0 {
        return Ok(());
    }
    match w.nvec() {
        1 => run(Fixed::<1>, h, w, u, variant, op),
        2 => run(Fixed::<2>, h, w, u, variant, op),
        4 => run(Fixed::<4>, h, w, u, variant, op),
        8 => run(Fixed::<8>, h, w, u, variant, op),
        16 => run(Fixed::<16>, h, w, u, variant, op),
        nv => run(Dynamic(nv), h, w, u, variant, op),
    }
    Ok(())
}

/// Number of vectors in the block, fixed at compile time for the common
/// widths so the innermost loop has a constant trip count.
trait Lanes: Copy + Send + Sync {
    fn nv(self) -> usize;
}

#[derive(Clone, Copy)]
struct Fixed<const N: usize>;

impl<const N: usize> Lanes for Fixed<N> {
    #[inline(always)]
    fn nv(self) -> usize {
        N
    }
}

#[derive(Clone, Copy)]
struct Dynamic(usize);

impl Lanes for Dynamic {
    #[inline(always)]
    fn nv(self) -> usize {
        self.0
    }
}

/// `out[..nv] += x * input[..nv]`.
#[inline(always)]
fn axpy_lanes<L: Lanes>(lanes: L, out: &mut [f64], x: f64, input: &[f64]) {
    let nv = lanes.nv();
    for (o, i) in out[..nv].iter_mut().zip(&input[..nv]) {
        *o += x * i;
    }
}

fn run<L: Lanes>(lanes: L, h: &CsbCooMatrix, w: &BlockVector, u: &mut BlockVector, variant: KernelVariant, op: Op) {
    match variant {
        KernelVariant::Baseline => baseline(lanes, h, w, u, op),
        KernelVariant::FusedAtomic => fused_atomic(lanes, h, w, u, op),
        KernelVariant::CacheBlocked { cache_size, .. } => cache_blocked(lanes, h, w, u, op, cache_size),
    }
}

/// Splits `data` into the disjoint row ranges given by `offsets`.
fn split_rows<'a>(mut data: &'a mut [f64], offsets: &[usize], nvec: usize) -> Vec<&'a mut [f64]> {
    let mut parts = Vec::with_capacity(offsets.len() - 1);
    for win in offsets.windows(2) {
        let (head, tail) = data.split_at_mut((win[1] - win[0]) * nvec);
        parts.push(head);
        data = tail;
    }
    parts
}

fn baseline<L: Lanes>(lanes: L, h: &CsbCooMatrix, w: &BlockVector, u: &mut BlockVector, op: Op) {
    let nv = lanes.nv();
    let win = w.data();
    // Output blocks are row blocks of H (no-trans) or column blocks (trans).
    let out_offsets = match op {
        Op::NoTrans => &h.row_offsets,
        Op::Trans => &h.col_offsets,
    };
    split_rows(u.data_mut(), out_offsets, nv)
        .into_par_iter()
        .enumerate()
        .for_each(|(ob, uout)| match op {
            Op::NoTrans => {
                for j in 0..h.ncolblks() {
                    let cbase = h.col_offsets[j];
                    for k in h.block_range(ob, j) {
                        let r = nv * h.local_rows[k] as usize;
                        let c = nv * (cbase + h.local_cols[k] as usize);
                        axpy_lanes(lanes, &mut uout[r..], h.values[k], &win[c..]);
                    }
                }
            }
            Op::Trans => {
                for i in 0..h.nrowblks() {
                    let rbase = h.row_offsets[i];
                    for k in h.block_range(i, ob) {
                        let c = nv * h.local_cols[k] as usize;
                        let r = nv * (rbase + h.local_rows[k] as usize);
                        axpy_lanes(lanes, &mut uout[c..], h.values[k], &win[r..]);
                    }
                }
            }
        });
}

/// Output rows split into per-block sections, each behind its own lock.
fn locked_sections<'a>(data: &'a mut [f64], offsets: &[usize], nv: usize) -> Vec<Mutex<&'a mut [f64]>> {
    split_rows(data, offsets, nv).into_iter().map(Mutex::new).collect()
}

/// Nonzero blocks as `(row block, col block)` tasks.
fn nonzero_blocks(h: &CsbCooMatrix) -> Vec<(usize, usize)> {
    let ncb = h.ncolblks();
    (0..h.nrowblks() * ncb)
        .filter(|&b| h.block_nnz[b] > 0)
        .map(|b| (b / ncb, b % ncb))
        .collect()
}

/// Runs `f` on output section `ob`, of `len` values. If another task holds
/// the section, `f` accumulates into the worker's zeroed `scratch` instead,
/// which is then added in under the lock.
fn with_section(
    sections: &[Mutex<&mut [f64]>],
    ob: usize,
    len: usize,
    scratch: &mut Vec<f64>,
    f: impl FnOnce(&mut [f64]),
) {
    match sections[ob].try_lock() {
        Ok(mut out) => f(&mut out),
        Err(TryLockError::Poisoned(e)) => f(&mut e.into_inner()),
        Err(TryLockError::WouldBlock) => {
            scratch.clear();
            scratch.resize(len, 0.0);
            f(scratch);
            let mut out = sections[ob].lock().unwrap_or_else(|e| e.into_inner());
            for (o, a) in out.iter_mut().zip(scratch.iter()) {
                *o += *a;
            }
        }
    }
}

/// Output block index, output extent and input base for block `(i, j)`.
#[inline]
fn block_frame(h: &CsbCooMatrix, i: usize, j: usize, op: Op) -> (usize, usize, usize) {
    match op {
        Op::NoTrans => (i, h.row_offsets[i + 1] - h.row_offsets[i], h.col_offsets[j]),
        Op::Trans => (j, h.col_offsets[j + 1] - h.col_offsets[j], h.row_offsets[i]),
    }
}

fn out_offsets(h: &CsbCooMatrix, op: Op) -> &[usize] {
    match op {
        Op::NoTrans => &h.row_offsets,
        Op::Trans => &h.col_offsets,
    }
}

/// Local (output, input) index arrays of block storage for `op`.
#[inline]
fn index_arrays(h: &CsbCooMatrix, op: Op) -> (&[u16], &[u16]) {
    match op {
        Op::NoTrans => (&h.local_rows, &h.local_cols),
        Op::Trans => (&h.local_cols, &h.local_rows),
    }
}

fn fused_atomic<L: Lanes>(lanes: L, h: &CsbCooMatrix, w: &BlockVector, u: &mut BlockVector, op: Op) {
    let nv = lanes.nv();
    let win = w.data();
    let sections = locked_sections(u.data_mut(), out_offsets(h, op), nv);
    let (outs, ins) = index_arrays(h, op);
    nonzero_blocks(h)
        .into_par_iter()
        .for_each_init(Vec::new, |scratch, (i, j)| {
            let (ob, oext, ibase) = block_frame(h, i, j, op);
            let range = h.block_range(i, j);
            with_section(&sections, ob, oext * nv, scratch, |out| {
                for k in range {
                    let lo = outs[k] as usize * nv;
                    let li = (ibase + ins[k] as usize) * nv;
                    axpy_lanes(lanes, &mut out[lo..], h.values[k], &win[li..]);
                }
            });
        });
}

/// Worker-private staging for one chunk of `cache_size` nonzeros.
struct Staging {
    scratch: Vec<f64>,
    out_ar: Vec<usize>,
    in_ar: Vec<usize>,
    xcoef_ar: Vec<f64>,
}

fn cache_blocked<L: Lanes>(
    lanes: L,
    h: &CsbCooMatrix,
    w: &BlockVector,
    u: &mut BlockVector,
    op: Op,
    cache_size: usize,
) {
    let nv = lanes.nv();
    let win = w.data();
    let sections = locked_sections(u.data_mut(), out_offsets(h, op), nv);
    let (outs, ins) = index_arrays(h, op);
    nonzero_blocks(h).into_par_iter().for_each_init(
        || Staging {
            scratch: Vec::new(),
            out_ar: vec![0; cache_size],
            in_ar: vec![0; cache_size],
            xcoef_ar: vec![0.0; cache_size],
        },
        |st, (i, j)| {
            let (ob, oext, ibase) = block_frame(h, i, j, op);
            let range = h.block_range(i, j);
            let Staging {
                scratch,
                out_ar,
                in_ar,
                xcoef_ar,
            } = st;
            with_section(&sections, ob, oext * nv, scratch, |out| {
                let mut kv = range.start;
                while kv < range.end {
                    let len = cache_size.min(range.end - kv);
                    for (dst, &lo) in out_ar.iter_mut().zip(&outs[kv..kv + len]) {
                        *dst = lo as usize * nv;
                    }
                    for (dst, &li) in in_ar.iter_mut().zip(&ins[kv..kv + len]) {
                        *dst = (ibase + li as usize) * nv;
                    }
                    xcoef_ar[..len].copy_from_slice(&h.values[kv..kv + len]);
                    for t in 0..len {
                        axpy_lanes(lanes, &mut out[out_ar[t]..], xcoef_ar[t], &win[in_ar[t]..]);
                    }
                    kv += len;
                }
            });
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    const VARIANTS: [KernelVariant; 4] = [
        KernelVariant::Baseline,
        KernelVariant::FusedAtomic,
        KernelVariant::CacheBlocked {
            cache_size: 256,
            vector_width: 256,
        },
        KernelVariant::CacheBlocked {
            cache_size: 1,
            vector_width: 1,
        },
    ];

    fn identity(n: usize) -> CsbCooMatrix {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        CsbCooMatrix::from_triples(&t, n, n, &[0, n], &[0, n]).unwrap()
    }

    #[test]
    fn identity_copies_input() {
        let h = identity(3);
        let w = BlockVector::from_columns(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        for v in VARIANTS {
            let mut u = BlockVector::zeros(3, 2);
            spmm_notrans(&h, &w, &mut u, v).unwrap();
            assert_eq!(u, w);
            let mut u = BlockVector::zeros(3, 2);
            spmm_trans(&h, &w, &mut u, v).unwrap();
            assert_eq!(u, w);
        }
    }

    #[test]
    fn zero_matrix_leaves_accumulator() {
        let h = CsbCooMatrix::from_triples(&[], 4, 4, &[0, 2, 4], &[0, 2, 4]).unwrap();
        let w = BlockVector::from_fn(4, 3, |r, v| (r + v) as f64);
        for v in VARIANTS {
            let mut u = BlockVector::from_fn(4, 3, |_, _| 1.0);
            spmm_notrans(&h, &w, &mut u, v).unwrap();
            assert!(u.data().iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn transpose_by_hand() {
        let h = CsbCooMatrix::from_triples(
            &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)],
            2,
            3,
            &[0, 2],
            &[0, 3],
        )
        .unwrap();
        let w = BlockVector::from_columns(&[vec![1.0, 1.0]]).unwrap();
        for v in VARIANTS {
            let mut u = BlockVector::zeros(3, 1);
            spmm_trans(&h, &w, &mut u, v).unwrap();
            assert_eq!(u.data(), &[1.0, 3.0, 2.0]);
        }
    }

    #[test]
    fn accumulates_into_existing_output() {
        let h = identity(2);
        let w = BlockVector::from_columns(&[vec![1.0, 2.0]]).unwrap();
        for v in VARIANTS {
            let mut u = BlockVector::from_columns(&[vec![10.0, 20.0]]).unwrap();
            spmm_notrans(&h, &w, &mut u, v).unwrap();
            assert_eq!(u.data(), &[11.0, 22.0]);
        }
    }

    #[test]
    fn odd_widths_use_generic_path() {
        let h = CsbCooMatrix::from_triples(&[(0, 1, 2.0), (1, 0, 3.0)], 2, 2, &[0, 1, 2], &[0, 1, 2])
            .unwrap();
        let w = BlockVector::from_fn(2, 5, |r, v| (r * 5 + v) as f64);
        for v in VARIANTS {
            let mut u = BlockVector::zeros(2, 5);
            spmm_notrans(&h, &w, &mut u, v).unwrap();
            for c in 0..5 {
                assert_eq!(u.get(0, c), 2.0 * w.get(1, c));
                assert_eq!(u.get(1, c), 3.0 * w.get(0, c));
            }
        }
    }

    #[test]
    fn dimension_checks() {
        let h = CsbCooMatrix::from_triples(&[], 2, 3, &[0, 2], &[0, 3]).unwrap();
        let w = BlockVector::zeros(2, 1);
        let mut u = BlockVector::zeros(2, 1);
        assert!(matches!(
            spmm_notrans(&h, &w, &mut u, KernelVariant::Baseline),
            Err(Error::DimensionMismatch(_))
        ));
        let mut u3 = BlockVector::zeros(3, 2);
        assert!(spmm_trans(&h, &w, &mut u3, KernelVariant::Baseline).is_err());
        let mut u3 = BlockVector::zeros(3, 1);
        assert!(spmm_trans(&h, &w, &mut u3, KernelVariant::Baseline).is_ok());
    }

    #[test]
    fn rejects_zero_cache_size() {
        let h = identity(2);
        let w = BlockVector::zeros(2, 1);
        let mut u = BlockVector::zeros(2, 1);
        assert!(matches!(
            spmm_notrans(&h, &w, &mut u, KernelVariant::cache_blocked(0)),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn busy_section_goes_through_scratch() {
        let mut data = vec![1.0; 4];
        let sections = locked_sections(&mut data, &[0, 2, 4], 1);
        let mut scratch = vec![7.0; 9];
        std::thread::scope(|s| {
            let (held_tx, held_rx) = std::sync::mpsc::channel();
            let (tx, rx) = std::sync::mpsc::channel::<()>();
            let sec = &sections;
            s.spawn(move || {
                let _guard = sec[1].lock().unwrap();
                held_tx.send(()).unwrap();
                rx.recv().unwrap();
            });
            held_rx.recv().unwrap();
            with_section(&sections, 1, 2, &mut scratch, |out| {
                assert_eq!(out, &[0.0, 0.0]);
                out[1] += 5.0;
                tx.send(()).unwrap();
            });
        });
        drop(sections);
        assert_eq!(data, vec![1.0, 1.0, 1.0, 6.0]);
    }

    #[test]
    fn serde_tagging() {
        let v = KernelVariant::cache_blocked(64);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"tag":"CacheBlocked","cache_size":64,"vector_width":256}"#);
        assert_eq!(serde_json::from_str::<KernelVariant>(&s).unwrap(), v);
    }
}
