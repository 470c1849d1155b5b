use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operator::SymmetricOperator;
use super::ritz::{
    convergence_check, rayleigh_ritz_with, residual_block, update_blocks, BasisParts,
};
use crate::densela::{self, SmallDense};
use crate::error::{mismatch, Error, Result};
use crate::precond::{apply_preconditioner, column_shifts, DiagonalTileSet, FomConfig};
use crate::spmm::{BlockVector, KernelVariant};

/// Eigenvalues below this fraction of the largest Gram eigenvalue mark
/// dependent directions when a basis block has to be repaired.
const DROP_TOL: f64 = 1e-10;

/// Residual directions that keep less than this fraction of their norm after
/// projection against `[X P]` are dropped.
const PROJECTION_KEEP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of eigenpairs sought.
    pub k: usize,
    /// Block width, at least `k`.
    pub nb: usize,
    pub tol: f64,
    pub maxiter: usize,
    pub fom: FomConfig,
    pub variant: KernelVariant,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            nb: k + 3,
            tol: 1e-6,
            maxiter: 500,
            fom: FomConfig::default(),
            variant: KernelVariant::Baseline,
            seed: 0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.nb < self.k {
            return Err(Error::BadParams(format!("need 1 <= k <= nb, got k={} nb={}", self.k, self.nb)));
        }
        if 3 * self.nb > n {
            return Err(Error::BadParams(format!(
                "block width {} is too large for dimension {n} (need nb <= n/3)",
                self.nb
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::BadParams("tolerance must be positive".into()));
        }
        if self.fom.iterations == 0 {
            return Err(Error::BadParams("FOM needs at least one iteration".into()));
        }
        self.variant.validate()
    }
}

/// Iterates of the solver after an iteration. `hx`, `hw`, `hp` are kept by
/// recurrence, not by applying the operator.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub iteration: usize,
    pub x: BlockVector,
    pub w: BlockVector,
    pub p: Option<BlockVector>,
    pub hx: BlockVector,
    pub hw: BlockVector,
    pub hp: Option<BlockVector>,
    pub theta: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub n_converged: usize,
}

/// Wall time in seconds spent in each phase of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub spmm: f64,
    pub precond: f64,
    pub dense: f64,
    pub total: f64,
}

impl PhaseTimings {
    fn add(&mut self, o: &PhaseTimings) {
        self.spmm += o.spmm;
        self.precond += o.precond;
        self.dense += o.dense;
        self.total += o.total;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub n_converged: usize,
    /// Columns of `[X W P]` used in Rayleigh–Ritz.
    pub basis_width: usize,
    /// Whether `P` was discarded to recover a definite overlap matrix.
    pub restarted: bool,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    /// State after the initial Rayleigh–Ritz step.
    pub initial: Option<IterationRecord>,
    pub records: Vec<IterationRecord>,
    pub operator_calls: usize,
    pub precond_fallbacks: usize,
    pub comm_volume: u64,
    pub timings: PhaseTimings,
}

impl ConvergenceHistory {
    /// Zeroes every wall-clock measurement, leaving a history that depends
    /// only on the arithmetic.
    pub fn clear_timings(&mut self) {
        let zero = PhaseTimings::default();
        self.timings = zero;
        if let Some(r) = &mut self.initial {
            r.timings = zero;
        }
        self.records.iter_mut().for_each(|r| r.timings = zero);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterReached,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub eigenvalues: Vec<f64>,
    pub vectors: BlockVector,
    pub residual_norms: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub history: ConvergenceHistory,
}

/// LOBPCG for the `k` lowest eigenpairs of `op`.
pub fn lobpcg_solve<O: SymmetricOperator>(
    op: &mut O,
    precond: Option<&DiagonalTileSet>,
    x0: Option<&BlockVector>,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    lobpcg_solve_observed(op, precond, x0, cfg, |_| {})
}

/// [`lobpcg_solve`], calling `observer` with the solver state after every
/// iteration.
pub fn lobpcg_solve_observed<O: SymmetricOperator>(
    op: &mut O,
    precond: Option<&DiagonalTileSet>,
    x0: Option<&BlockVector>,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&SolverState),
) -> Result<SolveResult> {
    let n = op.dim();
    cfg.validate(n)?;
    if let Some(t) = precond {
        if t.dim() != n {
            return Err(mismatch("preconditioner dimension differs from the operator"));
        }
    }
    let (k, nb) = (cfg.k, cfg.nb);
    let mut history = ConvergenceHistory::default();
    let start = Instant::now();

    // Initial block and its Rayleigh–Ritz step.
    let mut clock = PhaseTimings::default();
    let t = Instant::now();
    let x = match x0 {
        Some(x0) => {
            if x0.nrows() != n || x0.nvec() != nb {
                return Err(mismatch(format!(
                    "initial block is {}x{}, expected {n}x{nb}",
                    x0.nrows(),
                    x0.nvec()
                )));
            }
            x0.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            BlockVector::from_fn(n, nb, |_, _| rng.gen_range(-1.0..=1.0))
        }
    };
    let (x, _) = orthonormalize(op, x, None).map_err(|_| {
        Error::BasisDegenerate("initial block does not have independent columns".into())
    })?;
    if x.nvec() != nb {
        return Err(Error::BasisDegenerate("initial block does not have independent columns".into()));
    }
    clock.dense += t.elapsed().as_secs_f64();
    let t = Instant::now();
    let hx = op.apply(&x)?;
    history.operator_calls += 1;
    clock.spmm += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut g = op.gram(&x, &hx)?;
    g.symmetrize();
    let mut o = op.gram(&x, &x)?;
    o.symmetrize();
    let (c, theta) = densela::sygv_lowest(&g, &o, nb)?;
    let x = x.mul_small(&c)?;
    let hx = hx.mul_small(&c)?;
    let r = residual_block(&hx, &x, &theta)?;
    let (_, n_conv) = convergence_check(&r, &x, &theta, cfg.tol, k);
    clock.dense += t.elapsed().as_secs_f64();
    clock.total = start.elapsed().as_secs_f64();

    let mut state = SolverState {
        iteration: 0,
        residual_norms: r.column_norms(),
        w: BlockVector::zeros(n, 0),
        hw: BlockVector::zeros(n, 0),
        x,
        hx,
        p: None,
        hp: None,
        theta,
        n_converged: n_conv,
    };
    let mut r = r;
    history.initial = Some(record(&state, nb, false, clock));
    history.timings.add(&clock);

    let mut status = if n_conv >= k {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterReached
    };
    let mut iterations = 0;
    while status != SolveStatus::Converged && iterations < cfg.maxiter {
        iterations += 1;
        let iter_start = Instant::now();
        let mut clock = PhaseTimings::default();

        // W = K⁻¹R on the raw residual.
        let t = Instant::now();
        let w = match precond {
            Some(tiles) => {
                let shifts = column_shifts(&state.theta, &state.residual_norms, nb);
                let (w, stats) = apply_preconditioner(tiles, &shifts, &r, &cfg.fom)?;
                history.precond_fallbacks += stats.fallbacks;
                w
            }
            None => r.clone(),
        };
        clock.precond += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let w = condition_directions(op, w, &state.x, state.p.as_ref())?;
        clock.dense += t.elapsed().as_secs_f64();
        if w.nvec() == 0 && state.p.is_none() {
            // Nothing left to search: the residuals lie in span(X) to
            // working precision.
            return Err(Error::BreakdownUnrecoverable { iteration: iterations });
        }

        let t = Instant::now();
        let hw = op.apply(&w)?;
        history.operator_calls += 1;
        clock.spmm += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut restarted = false;
        let rr = {
            let s = BasisParts::new(&state.x, &w, state.p.as_ref());
            let hs = BasisParts::new(&state.hx, &hw, state.hp.as_ref());
            ritz(op, s, hs, nb)
        };
        let coeffs = match rr {
            Ok(c) => c,
            Err(Error::BasisDegenerate(_)) if state.p.is_some() => {
                restarted = true;
                state.p = None;
                state.hp = None;
                let s = BasisParts::new(&state.x, &w, None);
                let hs = BasisParts::new(&state.hx, &hw, None);
                ritz(op, s, hs, nb).map_err(|e| match e {
                    Error::BasisDegenerate(_) => Error::BreakdownUnrecoverable { iteration: iterations },
                    e => e,
                })?
            }
            Err(Error::BasisDegenerate(_)) => {
                return Err(Error::BreakdownUnrecoverable { iteration: iterations })
            }
            Err(e) => return Err(e),
        };
        let s = BasisParts::new(&state.x, &w, state.p.as_ref());
        let hs = BasisParts::new(&state.hx, &hw, state.hp.as_ref());
        let basis_width = s.width();
        let (x, hx, p, hp) = update_blocks(s, hs, &coeffs)?;
        let (p, hp) = orthonormalize(op, p, Some(hp))?;
        let (p, hp) = if p.nvec() == 0 {
            (None, None)
        } else {
            (Some(p), hp)
        };

        r = residual_block(&hx, &x, &coeffs.theta)?;
        let (_, n_conv) = convergence_check(&r, &x, &coeffs.theta, cfg.tol, k);
        clock.dense += t.elapsed().as_secs_f64();
        clock.total = iter_start.elapsed().as_secs_f64();

        state = SolverState {
            iteration: iterations,
            x,
            w,
            p,
            hx,
            hw,
            hp,
            theta: coeffs.theta,
            residual_norms: r.column_norms(),
            n_converged: n_conv,
        };
        history.records.push(record(&state, basis_width, restarted, clock));
        history.timings.add(&clock);
        observer(&state);
        if n_conv >= k {
            status = SolveStatus::Converged;
        }
    }

    history.comm_volume = op.comm_volume();
    history.timings.total = start.elapsed().as_secs_f64();
    let cols: Vec<usize> = (0..k).collect();
    Ok(SolveResult {
        eigenvalues: state.theta[..k].to_vec(),
        vectors: state.x.select_columns(&cols),
        residual_norms: state.residual_norms[..k].to_vec(),
        status,
        iterations,
        history,
    })
}

fn record(state: &SolverState, basis_width: usize, restarted: bool, timings: PhaseTimings) -> IterationRecord {
    IterationRecord {
        iteration: state.iteration,
        theta: state.theta.clone(),
        residual_norms: state.residual_norms.clone(),
        n_converged: state.n_converged,
        basis_width,
        restarted,
        timings,
    }
}

fn ritz<O: SymmetricOperator>(
    op: &mut O,
    s: BasisParts,
    hs: BasisParts,
    k_keep: usize,
) -> Result<super::ritz::RitzCoefficients> {
    let mut gram = |a: &BlockVector, b: &BlockVector| op.gram(a, b);
    rayleigh_ritz_with(&mut gram, s, hs, k_keep)
}

/// Prepares preconditioned residuals for the basis: scales columns to unit
/// length, removes their components in `span([X P])` (two block passes),
/// drops columns with nothing left and orthonormalizes the rest.
fn condition_directions<O: SymmetricOperator>(
    op: &mut O,
    w: BlockVector,
    x: &BlockVector,
    p: Option<&BlockVector>,
) -> Result<BlockVector> {
    let norms = w.column_norms();
    let keep: Vec<usize> = (0..w.nvec())
        .filter(|&v| norms[v] > 0.0 && norms[v].is_finite())
        .collect();
    let mut w = w.select_columns(&keep);
    for r in 0..w.nrows() {
        for (d, &v) in w.row_mut(r).iter_mut().zip(&keep) {
            *d /= norms[v];
        }
    }
    for _ in 0..2 {
        project_out(op, &mut w, x)?;
        if let Some(p) = p {
            project_out(op, &mut w, p)?;
        }
    }
    let norms = w.column_norms();
    let keep: Vec<usize> = (0..w.nvec()).filter(|&v| norms[v] > PROJECTION_KEEP).collect();
    let w = w.select_columns(&keep);
    Ok(orthonormalize(op, w, None)?.0)
}

/// `W ← W − Q(QᵀW)` for orthonormal `Q`.
fn project_out<O: SymmetricOperator>(op: &mut O, w: &mut BlockVector, q: &BlockVector) -> Result<()> {
    if w.nvec() == 0 || q.nvec() == 0 {
        return Ok(());
    }
    let mut c = op.gram(q, w)?;
    c.scale(-1.0);
    w.add_mul_small(q, &c)
}

/// Orthonormalizes `v` by two passes of Cholesky QR, applying the same
/// column transformation to `hv`. If `v` is numerically rank deficient the
/// dependent directions are dropped through an eigen-decomposition of the
/// Gram matrix first.
fn orthonormalize<O: SymmetricOperator>(
    op: &mut O,
    v: BlockVector,
    hv: Option<BlockVector>,
) -> Result<(BlockVector, Option<BlockVector>)> {
    if v.nvec() == 0 {
        return Ok((v, hv));
    }
    match cholesky_qr(op, v.clone(), hv.clone()) {
        Ok(out) => return Ok(out),
        Err(Error::NotPositiveDefinite { .. }) | Err(Error::SingularTriangular) => {}
        Err(e) => return Err(e),
    }
    let mut b = op.gram(&v, &v)?;
    b.symmetrize();
    let (lambda, vecs) = densela::sym_eig(&b)?;
    let lmax = lambda.last().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..lambda.len())
        .filter(|&i| lambda[i] > DROP_TOL * lmax && lambda[i] > 0.0)
        .collect();
    let t = SmallDense::from_fn(v.nvec(), kept.len(), |i, j| {
        vecs.get(i, kept[j]) / lambda[kept[j]].sqrt()
    });
    let v = v.mul_small(&t)?;
    let hv = hv.map(|h| h.mul_small(&t)).transpose()?;
    if v.nvec() == 0 {
        return Ok((v, hv));
    }
    cholesky_qr(op, v, hv).map_err(|_| Error::BasisDegenerate("could not orthonormalize block".into()))
}

fn cholesky_qr<O: SymmetricOperator>(
    op: &mut O,
    mut v: BlockVector,
    mut hv: Option<BlockVector>,
) -> Result<(BlockVector, Option<BlockVector>)> {
    for _ in 0..2 {
        let mut b = op.gram(&v, &v)?;
        b.symmetrize();
        let r = densela::cholesky(&b)?;
        densela::trsm_right_inv(&mut v, &r)?;
        if let Some(h) = hv.as_mut() {
            densela::trsm_right_inv(h, &r)?;
        }
    }
    Ok((v, hv))
}
