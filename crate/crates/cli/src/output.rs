//! Profile, sweep and verification outputs.
//!
//! Numbers are written in Rust's shortest round-trip form, so the text does
//! not depend on locale and parses back to the same `f64`.

use std::fmt::Write as _;

use expander_lab::solver::{Diagnostics, ProfileSample};
use serde::{Deserialize, Serialize};

pub const PROFILE_SCHEMA: &str = "expander-lab.profile.v1";
pub const SWEEP_SCHEMA: &str = "expander-lab.sweep.v1";

pub const PROFILE_HEADER: &str = "r,f,f_r,phi,psi,t";
pub const SWEEP_HEADER: &str = "eps,R,phi_inf,k_hat,residual,status";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub schema: String,
    pub n: u32,
    pub p: u32,
    pub k: u32,
    pub epsilon: f64,
    pub radius: f64,
    pub phi_inf: f64,
    pub phi_inf_error: f64,
    pub k_hat: Option<f64>,
    pub diagnostics: Diagnostics,
    pub samples: Vec<ProfileSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub eps: f64,
    pub radius: f64,
    pub phi_inf: Option<f64>,
    pub k_hat: Option<f64>,
    pub residual: Option<f64>,
    /// `ok`, or the name of the solver error.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDocument {
    pub schema: String,
    pub n: u32,
    pub p: u32,
    pub k: u32,
    pub rows: Vec<SweepRow>,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

pub fn profile_csv(doc: &ProfileDocument) -> String {
    let mut out = String::with_capacity(96 * (doc.samples.len() + 12));
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for s in &doc.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(s.r),
            num(s.f),
            num(s.f_r),
            num(s.phi),
            num(s.psi),
            num(s.t)
        );
    }
    let d = &doc.diagnostics;
    let _ = writeln!(out, "# phi_inf={}", num(doc.phi_inf));
    let _ = writeln!(out, "# phi_inf_error={}", num(doc.phi_inf_error));
    let _ = writeln!(out, "# max_residual={}", num(d.max_residual));
    let _ = writeln!(out, "# k_hat={}", opt(doc.k_hat));
    let _ = writeln!(out, "# envelope_ok={}", d.envelope_ok);
    let _ = writeln!(out, "# decay_fit={}", opt(d.decay_fit));
    let _ = writeln!(out, "# psi_final={}", num(d.psi_final));
    let _ = writeln!(out, "# certified={}", d.certified());
    out
}

pub fn json<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialize");
    text.push('\n');
    text
}

pub fn sweep_csv(doc: &SweepDocument) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in &doc.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(row.eps),
            num(row.radius),
            opt(row.phi_inf),
            opt(row.k_hat),
            opt(row.residual),
            row.status
        );
    }
    out
}

/// Parse the numeric rows and `# key=value` trailer of a profile CSV.
pub fn parse_profile_csv(text: &str) -> Result<(Vec<[f64; 6]>, Vec<(String, String)>), String> {
    let mut lines = text.lines();
    if lines.next() != Some(PROFILE_HEADER) {
        return Err("missing header".into());
    }
    let mut rows = Vec::new();
    let mut trailer = Vec::new();
    for line in lines {
        if let Some(comment) = line.strip_prefix("# ") {
            let (key, value) = comment
                .split_once('=')
                .ok_or_else(|| format!("bad comment line {line:?}"))?;
            trailer.push((key.to_string(), value.to_string()));
            continue;
        }
        if !trailer.is_empty() {
            return Err("data row after the trailer".into());
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| format!("{f:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let row: [f64; 6] = fields
            .try_into()
            .map_err(|v: Vec<f64>| format!("expected 6 fields, found {}", v.len()))?;
        rows.push(row);
    }
    Ok((rows, trailer))
}
