//! JSON run reports. The layout is described in `docs/run-report.schema.json`.

use serde::{Deserialize, Serialize};

use crate::dist::CommStats;
use crate::error::{Error, Result};
use crate::lobpcg::{IterationRecord, PhaseTimings, SolveStatus};
use crate::precond::TileStats;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    /// `gen:<kind>`, `mm:<path>` or `cache:<path>`.
    pub source: String,
    pub n: usize,
    pub nnz: usize,
    pub block_extent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub eigenvalues: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub operator_calls: usize,
    pub precond_fallbacks: usize,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_size: Option<usize>,
    /// Output agreed with the baseline kernel.
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
    /// Present only for rows that passed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub nb: usize,
    pub reps: usize,
    pub gate_tolerance: f64,
    pub rows: Vec<BenchRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tiles: Option<TileStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<PhaseTimings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub communication: Option<CommStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<serde_json::Value>,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config,
            matrix: None,
            tiles: None,
            solve: None,
            timings: None,
            communication: None,
            bench: None,
            layout: None,
        }
    }

    /// Pretty JSON; fails if any number is not finite (JSON would turn it
    /// into `null`).
    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::to_value(self).map_err(|e| Error::Io(e.to_string()))?;
        if let Some(path) = find_null(&v, String::new()) {
            return Err(Error::BadParams(format!("report has a non-finite value at {path}")));
        }
        serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))
    }
}

fn find_null(v: &serde_json::Value, at: String) -> Option<String> {
    match v {
        serde_json::Value::Null => Some(at),
        serde_json::Value::Array(a) => a.iter().enumerate().find_map(|(i, x)| find_null(x, format!("{at}[{i}]"))),
        serde_json::Value::Object(o) => o.iter().find_map(|(k, x)| find_null(x, format!("{at}.{k}"))),
        _ => None,
    }
}
