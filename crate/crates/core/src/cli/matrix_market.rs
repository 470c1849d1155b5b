//! Coordinate Matrix Market files for real symmetric matrices.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spmm::{SymmetricCsb, DEFAULT_BLOCK_EXTENT};

/// A symmetric matrix as its strictly-lower entries and its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTriples {
    pub n: usize,
    pub lower: Vec<(usize, usize, f64)>,
    pub diag: Vec<f64>,
}

impl SymmetricTriples {
    pub fn to_csb(&self, extent: usize) -> Result<SymmetricCsb> {
        SymmetricCsb::from_lower_triples(self.n, &self.lower, self.diag.clone(), extent)
    }

    /// Nonzeros of the full matrix.
    pub fn full_nnz(&self) -> usize {
        2 * self.lower.len() + self.diag.iter().filter(|&&d| d != 0.0).count()
    }
}

pub fn ingest_matrix_market(path: impl AsRef<Path>) -> Result<SymmetricTriples> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_matrix_market(f)
}

/// Parses a `coordinate real symmetric` file. Entries given in the upper
/// triangle are mirrored into the lower one.
pub fn read_matrix_market(r: impl Read) -> Result<SymmetricTriples> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(Error::ParseError { line: 1, msg: "empty file".into() })?;
    let header = header?;
    let h: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(Error::ParseError { line: 1, msg: format!("not a Matrix Market header: {header}") });
    }
    if h[2] != "coordinate" || !(h[3] == "real" || h[3] == "integer") || h[4] != "symmetric" {
        return Err(Error::NotSymmetricHeader(header));
    }

    let mut size: Option<(usize, usize)> = None;
    let mut lower = Vec::new();
    let mut diag = Vec::new();
    let mut seen_diag = Vec::new();
    let mut count = 0;
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        let bad = |msg: &str| Error::ParseError { line: lineno, msg: format!("{msg}: {t}") };
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(bad("expected `rows cols entries`"));
                }
                let nums: Vec<usize> = parts
                    .iter()
                    .map(|p| p.parse().map_err(|_| bad("bad size line")))
                    .collect::<Result<_>>()?;
                if nums[0] != nums[1] {
                    return Err(bad("symmetric matrix must be square"));
                }
                size = Some((nums[0], nums[2]));
                diag = vec![0.0; nums[0]];
                seen_diag = vec![false; nums[0]];
            }
            Some((n, _)) => {
                if parts.len() != 3 {
                    return Err(bad("expected `row col value`"));
                }
                let i: usize = parts[0].parse().map_err(|_| bad("bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| bad("bad column index"))?;
                let v: f64 = parts[2].parse().map_err(|_| bad("bad value"))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(bad("index out of range"));
                }
                let (i, j) = (i - 1, j - 1);
                if i == j {
                    if seen_diag[i] {
                        return Err(Error::DuplicateEntry { row: i, col: j });
                    }
                    seen_diag[i] = true;
                    diag[i] = v;
                } else {
                    lower.push((i.max(j), i.min(j), v));
                }
                count += 1;
            }
        }
    }
    let (n, expected) = size.ok_or(Error::ParseError { line: 1, msg: "missing size line".into() })?;
    if count != expected {
        return Err(Error::ParseError {
            line: 0,
            msg: format!("size line announces {expected} entries, found {count}"),
        });
    }
    let mut keys: Vec<(usize, usize)> = lower.iter().map(|&(i, j, _)| (i, j)).collect();
    keys.sort_unstable();
    if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateEntry { row: w[0].0, col: w[0].1 });
    }
    Ok(SymmetricTriples { n, lower, diag })
}

/// Writes the lower triangle and the nonzero diagonal entries.
pub fn write_matrix_market(m: &SymmetricTriples, mut w: impl Write) -> Result<()> {
    let nz_diag: Vec<usize> = (0..m.n).filter(|&i| m.diag[i] != 0.0).collect();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", m.n, m.n, m.lower.len() + nz_diag.len())?;
    for &i in &nz_diag {
        writeln!(w, "{} {} {}", i + 1, i + 1, m.diag[i])?;
    }
    for &(i, j, v) in &m.lower {
        writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Preconditioner tiles of `tile` rows, restarted at every CSB block
/// boundary so that no tile crosses one.
pub fn block_aligned_tiles(n: usize, extent: usize, tile: usize) -> Vec<usize> {
    let extent = if extent == 0 { DEFAULT_BLOCK_EXTENT } else { extent };
    let tile = tile.max(1);
    let mut offs = vec![0];
    let mut start = 0;
    while start < n {
        let end = (start + extent).min(n);
        let mut at = start;
        while at < end {
            at = (at + tile).min(end);
            offs.push(at);
        }
        start = end;
    }
    offs
}
