use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::matrix_market::{block_aligned_tiles, ingest_matrix_market, SymmetricTriples};
use super::report::{BenchReport, BenchRow, MatrixSummary, RunReport, SolveSummary};
use super::synthetic::{generate_synthetic, SyntheticKind, SyntheticParams};
use crate::dist::{build_layout, even_boundaries, partition_matrix, DistributedOperator};
use crate::error::{Error, Result};
use crate::lobpcg::{lobpcg_solve, CsbOperator, SolveStatus, SolverConfig};
use crate::precond::{extract_tiles, FomConfig};
use crate::spmm::{BlockVector, KernelVariant, SymmetricCsb, DEFAULT_BLOCK_EXTENT, DEFAULT_VECTOR_WIDTH};

#[derive(Debug, Parser)]
#[command(name = "blockeig", version, about = "Sparse symmetric block eigensolver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest eigenpairs of a matrix.
    Solve(SolveArgs),
    /// Time the SpMM kernel variants over a cache-size sweep.
    Bench(BenchArgs),
    /// Print the rank layout for a given partition count.
    ExplainLayout(LayoutArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Baseline,
    FusedAtomic,
    CacheBlocked,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixArgs {
    /// Matrix Market file (coordinate real symmetric).
    #[arg(long, conflicts_with = "gen")]
    pub mm: Option<PathBuf>,
    /// Synthetic matrix kind.
    #[arg(long, value_enum)]
    pub gen: Option<SyntheticKind>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.01)]
    pub density: f64,
    #[arg(long, default_value_t = 4)]
    pub bandwidth: usize,
    /// Rows and columns per CSB block.
    #[arg(long, default_value_t = DEFAULT_BLOCK_EXTENT)]
    pub block_size: usize,
    /// Binary CSB cache: read if it exists, written otherwise.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Block width (default k + 3).
    #[arg(long)]
    pub nb: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub maxiter: usize,
    #[arg(long, default_value_t = 4)]
    pub fom_iters: usize,
    /// Solve without the tile preconditioner.
    #[arg(long)]
    pub no_precond: bool,
    /// Preconditioner tile size for matrices without their own tiling.
    #[arg(long, default_value_t = 32)]
    pub tile_size: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Baseline)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = crate::spmm::DEFAULT_CACHE_SIZE)]
    pub cache_size: usize,
    /// Odd partition count; above 1 the solve runs over simulated ranks.
    #[arg(long, default_value_t = 1)]
    pub nd: usize,
    #[arg(long, env = "BLOCKEIG_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 4 unless the solve converged.
    #[arg(long)]
    pub strict: bool,
    /// Zero all wall-clock fields so reports can be compared byte for byte.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 8)]
    pub nb: usize,
    /// Parameter sweep, e.g. `cache=64,256,1024`.
    #[arg(long, default_value = "cache=64,256,1024")]
    pub sweep: String,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, env = "BLOCKEIG_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LayoutArgs {
    #[arg(long, default_value_t = 5)]
    pub nd: usize,
    /// Also list vector segments for this dimension.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Relative Frobenius distance a kernel may have from the baseline output
/// in the benchmark correctness gate.
pub const BENCH_GATE_TOL: f64 = 1e-10;

fn variant_of(v: VariantArg, cache_size: usize) -> KernelVariant {
    match v {
        VariantArg::Baseline => KernelVariant::Baseline,
        VariantArg::FusedAtomic => KernelVariant::FusedAtomic,
        VariantArg::CacheBlocked => KernelVariant::CacheBlocked {
            cache_size,
            vector_width: DEFAULT_VECTOR_WIDTH,
        },
    }
}

struct LoadedMatrix {
    csb: SymmetricCsb,
    tiles: Option<Vec<usize>>,
    summary: MatrixSummary,
}

fn load_matrix(a: &MatrixArgs) -> Result<LoadedMatrix> {
    if a.block_size == 0 {
        return Err(Error::BadParams("block size must be positive".into()));
    }
    if let Some(path) = &a.cache {
        if path.exists() {
            let f = std::fs::File::open(path)?;
            let csb = SymmetricCsb::read_binary(std::io::BufReader::new(f))?;
            let summary = MatrixSummary {
                source: format!("cache:{}", path.display()),
                n: csb.dim(),
                nnz: csb.full_nnz(),
                block_extent: csb.lower().row_offsets().get(1).copied().unwrap_or(0),
            };
            return Ok(LoadedMatrix { csb, tiles: None, summary });
        }
    }
    let (triples, tiles, source): (SymmetricTriples, Option<Vec<usize>>, String) = match (&a.mm, a.gen) {
        (Some(path), _) => (ingest_matrix_market(path)?, None, format!("mm:{}", path.display())),
        (None, Some(kind)) => {
            let mut p = SyntheticParams::new(kind, a.n);
            p.density = a.density;
            p.bandwidth = a.bandwidth;
            p.block_extent = a.block_size;
            p.seed = a.seed;
            let s = generate_synthetic(&p)?;
            let name = serde_json::to_value(kind).unwrap();
            (s.matrix, Some(s.tile_offsets), format!("gen:{}", name.as_str().unwrap_or("?")))
        }
        (None, None) => return Err(Error::BadParams("give a matrix with --mm or --gen".into())),
    };
    let csb = triples.to_csb(a.block_size)?;
    if let Some(path) = &a.cache {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        csb.write_binary(&mut w)?;
        std::io::Write::flush(&mut w)?;
    }
    let summary = MatrixSummary {
        source,
        n: csb.dim(),
        nnz: csb.full_nnz(),
        block_extent: a.block_size,
    };
    Ok(LoadedMatrix { csb, tiles, summary })
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::BadParams("thread count must be positive".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::BadParams(e.to_string()))
}

/// The arguments as JSON, leaving out options that were not given.
fn echo<T: Serialize>(args: &T) -> serde_json::Value {
    fn strip(v: &mut serde_json::Value) {
        if let serde_json::Value::Object(o) = v {
            o.retain(|_, x| !x.is_null());
            o.values_mut().for_each(strip);
        }
    }
    let mut v = serde_json::to_value(args).unwrap_or_default();
    strip(&mut v);
    v
}

pub fn cmd_solve(a: &SolveArgs) -> Result<RunReport> {
    let pool = thread_pool(a.threads)?;
    pool.install(|| solve_inner(a, pool.current_num_threads()))
}

fn solve_inner(a: &SolveArgs, threads: usize) -> Result<RunReport> {
    let m = load_matrix(&a.matrix)?;
    let variant = variant_of(a.variant, a.cache_size);
    let mut cfg = SolverConfig::new(a.k);
    if let Some(nb) = a.nb {
        cfg.nb = nb;
    }
    cfg.tol = a.tol;
    cfg.maxiter = a.maxiter;
    cfg.fom = FomConfig { iterations: a.fom_iters };
    cfg.variant = variant;
    cfg.seed = a.matrix.seed;
    cfg.validate(m.csb.dim())?;

    let tiles = if a.no_precond {
        None
    } else {
        let offs = m
            .tiles
            .clone()
            .unwrap_or_else(|| block_aligned_tiles(m.csb.dim(), m.summary.block_extent, a.tile_size));
        Some(extract_tiles(&m.csb, &offs)?)
    };

    let mut config = echo(a);
    config["threads"] = serde_json::json!(threads);
    config["solver"] = serde_json::to_value(&cfg).unwrap();
    let mut report = RunReport::new("solve", config);
    report.tiles = tiles.as_ref().map(|t| t.stats());

    let result = if a.nd == 1 {
        lobpcg_solve(&mut CsbOperator::new(&m.csb, variant), tiles.as_ref(), None, &cfg)?
    } else {
        let layout = build_layout(a.nd)?;
        let n = m.csb.dim();
        let lower = m.csb.lower().to_triples();
        let bounds = even_boundaries(n, a.nd);
        let extent = m.summary.block_extent.min(crate::spmm::MAX_BLOCK_EXTENT);
        let pm = partition_matrix(&lower, m.csb.diag(), &layout, &bounds, extent)?;
        let mut op = DistributedOperator::new(layout, pm, variant)?;
        let r = lobpcg_solve(&mut op, tiles.as_ref(), None, &cfg)?;
        report.communication = Some(op.comm_stats());
        r
    };

    let mut history = result.history;
    if a.no_timings {
        history.clear_timings();
    }
    report.matrix = Some(m.summary);
    report.timings = Some(history.timings);
    report.solve = Some(SolveSummary {
        status: result.status,
        iterations: result.iterations,
        eigenvalues: result.eigenvalues,
        residual_norms: result.residual_norms,
        operator_calls: history.operator_calls,
        precond_fallbacks: history.precond_fallbacks,
        history: history.records,
    });
    Ok(report)
}

/// Parses `cache=64,256,1024`.
pub fn parse_sweep(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::BadParams(format!("cannot parse sweep `{s}`, expected cache=N,N,..."));
    let list = s.strip_prefix("cache=").ok_or_else(bad)?;
    let sizes: Vec<usize> = list
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(bad());
    }
    Ok(sizes)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<RunReport> {
    let pool = thread_pool(a.threads)?;
    pool.install(|| bench_inner(a, pool.current_num_threads()))
}

fn bench_inner(a: &BenchArgs, threads: usize) -> Result<RunReport> {
    if a.nb == 0 || a.reps == 0 {
        return Err(Error::BadParams("nb and reps must be positive".into()));
    }
    let sizes = parse_sweep(&a.sweep)?;
    let m = load_matrix(&a.matrix)?;
    let n = m.csb.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(a.matrix.seed ^ 0x5eed);
    let w = BlockVector::from_fn(n, a.nb, |_, _| rng.gen_range(-1.0..=1.0));

    let mut variants = vec![KernelVariant::Baseline, KernelVariant::FusedAtomic];
    variants.extend(sizes.iter().map(|&c| KernelVariant::cache_blocked(c)));
    let reference = m.csb.apply(&w, KernelVariant::Baseline)?;
    let ref_norm = reference.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut rows: Vec<BenchRow> = variants
        .iter()
        .map(|v| {
            let out = m.csb.apply(&w, *v)?;
            let mut d = out;
            d.axpy(-1.0, &reference)?;
            let err = d.frobenius_norm() / ref_norm;
            let cache_size = match v {
                KernelVariant::CacheBlocked { cache_size, .. } => Some(*cache_size),
                _ => None,
            };
            Ok(BenchRow {
                variant: v.name().to_string(),
                cache_size,
                passed: err <= BENCH_GATE_TOL,
                rel_error: err.is_finite().then_some(err),
                min_seconds: None,
                median_seconds: None,
            })
        })
        .collect::<Result<_>>()?;

    // Repetitions are interleaved across variants so that slow phases of a
    // noisy machine hit every variant alike.
    let mut samples = vec![Vec::with_capacity(a.reps); variants.len()];
    for _ in 0..a.reps {
        for (i, v) in variants.iter().enumerate() {
            if !rows[i].passed {
                continue;
            }
            let t = Instant::now();
            let out = m.csb.apply(&w, *v)?;
            samples[i].push(t.elapsed().as_secs_f64());
            std::hint::black_box(out);
        }
    }
    for (row, s) in rows.iter_mut().zip(&mut samples) {
        if row.passed {
            s.sort_by(f64::total_cmp);
            row.min_seconds = Some(s[0]);
            row.median_seconds = Some(s[s.len() / 2]);
        }
    }

    let mut config = echo(a);
    config["threads"] = serde_json::json!(threads);
    let mut report = RunReport::new("bench", config);
    report.matrix = Some(m.summary);
    report.bench = Some(BenchReport {
        nb: a.nb,
        reps: a.reps,
        gate_tolerance: BENCH_GATE_TOL,
        rows,
    });
    Ok(report)
}

pub fn cmd_explain_layout(a: &LayoutArgs) -> Result<RunReport> {
    let layout = build_layout(a.nd)?;
    let bounds = a.n.map(|n| even_boundaries(n, a.nd));
    let mut report = RunReport::new("explain-layout", echo(a));
    report.layout = Some(layout.explain(bounds.as_deref()));
    Ok(report)
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_OTHER: i32 = 1;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ParseError { .. }
        | Error::NotSymmetricHeader(_)
        | Error::Io(_)
        | Error::IndexOutOfRange { .. }
        | Error::DuplicateEntry { .. }
        | Error::BlockTooLarge { .. }
        | Error::NotStrictlyLower { .. }
        | Error::MisalignedTiles { .. }
        | Error::BadParams(_)
        | Error::EvenNd(_) => EXIT_INPUT,
        Error::BreakdownUnrecoverable { .. }
        | Error::BasisDegenerate(_)
        | Error::NotPositiveDefinite { .. }
        | Error::SingularTriangular
        | Error::SingularProjection { .. }
        | Error::RankDeficient => EXIT_NUMERICAL,
        _ => EXIT_OTHER,
    }
}

/// Runs the command line `args` (program name first), writing the report
/// to `--out` or `stdout` and diagnostics to `stderr`. Returns the exit
/// status.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    let (result, out, strict) = match &cli.command {
        Command::Solve(a) => (cmd_solve(a), a.out.clone(), a.strict),
        Command::Bench(a) => (cmd_bench(a), a.out.clone(), false),
        Command::ExplainLayout(a) => (cmd_explain_layout(a), a.out.clone(), false),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    let json = match report.to_json() {
        Ok(j) => j,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let written = match &out {
        Some(p) => std::fs::write(p, json + "\n").map_err(Error::from),
        None => writeln!(stdout, "{json}").map_err(Error::from),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_INPUT;
    }
    let unconverged = report.solve.as_ref().is_some_and(|s| s.status != SolveStatus::Converged);
    if strict && unconverged {
        let _ = writeln!(stderr, "error: solve did not converge");
        return EXIT_NUMERICAL;
    }
    let failed_gate = report.bench.as_ref().is_some_and(|b| b.rows.iter().any(|r| !r.passed));
    if failed_gate {
        let _ = writeln!(stderr, "error: a kernel failed the correctness gate");
        return EXIT_NUMERICAL;
    }
    EXIT_OK
}
