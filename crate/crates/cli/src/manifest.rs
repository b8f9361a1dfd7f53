use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use expander_lab::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::args::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Solve,
    Sweep,
}

/// Everything needed to reproduce an output file.
///
/// `timestamp` records when the run happened and is never written into the
/// output itself, so replaying a manifest reproduces the output bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: JobKind,
    pub n: u32,
    pub p: u32,
    pub k: u32,
    pub epsilon: Vec<f64>,
    pub radius: Vec<f64>,
    pub format: Format,
    pub points: Option<usize>,
    pub tolerances: SolverConfig,
    /// RNG seeds consumed by the run (none for solve and sweep, which are
    /// deterministic).
    pub seeds: Vec<u64>,
    pub tool_version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn timestamp() -> u64 {
    if let Some(fixed) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
    {
        return fixed;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
