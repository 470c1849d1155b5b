use crate::densela::{self, SmallDense};
use crate::error::{mismatch, Error, Result};
use crate::spmm::BlockVector;

/// The three parts of a search basis `[X W P]`, or of its image under `H`.
/// `p` is absent on the first iteration or after a restart.
#[derive(Debug, Clone, Copy)]
pub struct BasisParts<'a> {
    pub x: &'a BlockVector,
    pub w: &'a BlockVector,
    pub p: Option<&'a BlockVector>,
}

impl<'a> BasisParts<'a> {
    pub fn new(x: &'a BlockVector, w: &'a BlockVector, p: Option<&'a BlockVector>) -> Self {
        Self {
            x,
            w,
            p: p.filter(|p| p.nvec() > 0),
        }
    }

    fn parts(&self) -> Vec<&'a BlockVector> {
        let mut v = vec![self.x, self.w];
        v.extend(self.p);
        v
    }

    pub fn width(&self) -> usize {
        self.parts().iter().map(|b| b.nvec()).sum()
    }
}

/// Coefficients of the Ritz vectors in `[X W P]`, split into the block
/// rows `C₁`, `C₂`, `C₃`.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzCoefficients {
    pub c1: SmallDense,
    pub c2: SmallDense,
    pub c3: Option<SmallDense>,
    pub theta: Vec<f64>,
}

/// Rayleigh–Ritz on `[X W P]` with the serial Gram product.
pub fn rayleigh_ritz(s: BasisParts, hs: BasisParts, k_keep: usize) -> Result<RitzCoefficients> {
    rayleigh_ritz_with(&mut densela::gram, s, hs, k_keep)
}

/// Rayleigh–Ritz on `[X W P]`: the `k_keep` lowest eigenpairs of
/// `(SᵀHS, SᵀS)`. Both matrices are assembled from their lower block
/// triangle (`XᵀHX`, `WᵀHX`, `WᵀHW`, `PᵀHX`, `PᵀHW`, `PᵀHP`) and mirrored.
pub fn rayleigh_ritz_with(
    gram: &mut dyn FnMut(&BlockVector, &BlockVector) -> Result<SmallDense>,
    s: BasisParts,
    hs: BasisParts,
    k_keep: usize,
) -> Result<RitzCoefficients> {
    let sp = s.parts();
    let hp = hs.parts();
    if sp.len() != hp.len() {
        return Err(mismatch("basis and its image have different parts"));
    }
    let n = s.x.nrows();
    for (a, b) in sp.iter().zip(&hp) {
        if a.nrows() != n || b.nrows() != n || a.nvec() != b.nvec() {
            return Err(mismatch("basis parts do not conform"));
        }
    }
    let offs: Vec<usize> = std::iter::once(0)
        .chain(sp.iter().scan(0, |acc, b| {
            *acc += b.nvec();
            Some(*acc)
        }))
        .collect();
    let m = offs[sp.len()];
    if k_keep > m {
        return Err(mismatch(format!("asked for {k_keep} Ritz pairs from a basis of width {m}")));
    }

    let mut g = SmallDense::zeros(m, m);
    let mut o = SmallDense::zeros(m, m);
    for a in 0..sp.len() {
        for b in 0..=a {
            let gab = gram(sp[a], hp[b])?;
            let oab = if a == b { gram(sp[a], sp[a])? } else { gram(sp[a], sp[b])? };
            g.set_block(offs[a], offs[b], &gab);
            o.set_block(offs[a], offs[b], &oab);
            if a != b {
                g.set_block(offs[b], offs[a], &gab.transpose());
                o.set_block(offs[b], offs[a], &oab.transpose());
            }
        }
    }
    g.symmetrize();
    o.symmetrize();

    let (c, theta) = densela::sygv_lowest(&g, &o, k_keep).map_err(|e| match e {
        Error::NotPositiveDefinite { index, pivot } => Error::BasisDegenerate(format!(
            "overlap matrix lost definiteness at column {index} (pivot {pivot:e})"
        )),
        e => e,
    })?;
    let nx = s.x.nvec();
    let nw = s.w.nvec();
    Ok(RitzCoefficients {
        c1: c.row_block(0, nx),
        c2: c.row_block(nx, nw),
        c3: s.p.map(|p| c.row_block(nx + nw, p.nvec())),
        theta,
    })
}

/// New iterates from Ritz coefficients:
/// `X⁺ = X·C₁ + W·C₂ + P·C₃`, `P⁺ = W·C₂ + P·C₃`, and the same
/// combinations of `HX`, `HW`, `HP`. The operator is not applied.
pub fn update_blocks(
    s: BasisParts,
    hs: BasisParts,
    c: &RitzCoefficients,
) -> Result<(BlockVector, BlockVector, BlockVector, BlockVector)> {
    if s.p.is_some() != c.c3.is_some() || hs.p.is_some() != s.p.is_some() {
        return Err(mismatch("coefficient blocks do not conform to the basis"));
    }
    let combine = |parts: BasisParts| -> Result<(BlockVector, BlockVector)> {
        let mut p = parts.w.mul_small(&c.c2)?;
        if let (Some(pp), Some(c3)) = (parts.p, &c.c3) {
            p.add_mul_small(pp, c3)?;
        }
        let mut x = parts.x.mul_small(&c.c1)?;
        x.axpy(1.0, &p)?;
        Ok((x, p))
    };
    let (x, p) = combine(s)?;
    let (hx, hp) = combine(hs)?;
    Ok((x, hx, p, hp))
}

/// `R = HX − X·diag(θ)`.
pub fn residual_block(hx: &BlockVector, x: &BlockVector, theta: &[f64]) -> Result<BlockVector> {
    if hx.nrows() != x.nrows() || hx.nvec() != x.nvec() || theta.len() != x.nvec() {
        return Err(mismatch("residual of non-conforming blocks"));
    }
    let mut r = hx.clone();
    for row in 0..r.nrows() {
        let xr = x.row(row);
        for ((d, &xv), &t) in r.row_mut(row).iter_mut().zip(xr).zip(theta) {
            *d -= t * xv;
        }
    }
    Ok(r)
}

/// Column `v` is converged when `‖r_v‖ ≤ tol·max(1, |θ_v|)·‖x_v‖`.
/// Returns the per-column flags and the count among the first `k` columns.
pub fn convergence_check(
    r: &BlockVector,
    x: &BlockVector,
    theta: &[f64],
    tol: f64,
    k: usize,
) -> (Vec<bool>, usize) {
    let rn = r.column_norms();
    let xn = x.column_norms();
    let flags: Vec<bool> = rn
        .iter()
        .zip(&xn)
        .zip(theta)
        .map(|((&r, &x), &t)| r <= tol * t.abs().max(1.0) * x)
        .collect();
    let n = flags.iter().take(k).filter(|&&f| f).count();
    (flags, n)
}
