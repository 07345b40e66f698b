//! Check records and report rendering.
//!
//! A run produces one record per check: name, pass/fail, the observed
//! residual, the tolerance it was held to, and wall time. Domain errors
//! surface as failed checks with a detail string, never as panics.
//! Reports are deterministic for a fixed (command, n, seed, tolerances)
//! apart from the wall-time fields.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: String,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub n_modes: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<CheckRecord>,
    pub passed: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<serde_json::Value>,
}

impl Report {
    pub fn new(
        command: &str,
        n_modes: usize,
        seed: u64,
        tolerances: BTreeMap<String, f64>,
        checks: Vec<CheckRecord>,
        data: Option<serde_json::Value>,
    ) -> Report {
        let passed = checks.iter().filter(|c| c.status == "pass").count();
        let failed = checks.len() - passed;
        Report {
            command: command.to_string(),
            n_modes,
            seed,
            tolerances,
            checks,
            passed,
            failed,
            data,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn render_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Flat view of the check table; summary and data stay JSON-only.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("name,status,residual,tolerance,wall_time_ms,detail\n");
        for c in &self.checks {
            let residual = c.residual.map(|r| format!("{r:e}")).unwrap_or_default();
            let detail = c.detail.as_deref().unwrap_or("");
            let detail = if detail.contains([',', '"', '\n']) {
                format!("\"{}\"", detail.replace('"', "\"\""))
            } else {
                detail.to_string()
            };
            out.push_str(&format!(
                "{},{},{},{:e},{},{}\n",
                c.name, c.status, residual, c.tolerance, c.wall_time_ms, detail
            ));
        }
        out
    }
}

/// Accumulates records. `run` times a residual computation and compares
/// it against the tolerance; `pass_if` records an exact yes/no fact as a
/// 0-or-1 residual held to zero.
pub struct Checks {
    records: Vec<CheckRecord>,
}

impl Checks {
    pub fn new() -> Checks {
        Checks { records: Vec::new() }
    }

    pub fn run<F>(&mut self, name: &str, tolerance: f64, body: F)
    where
        F: FnOnce() -> Result<f64, fermi_gig_core::Error>,
    {
        let start = Instant::now();
        let outcome = body();
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let record = match outcome {
            Ok(residual) => CheckRecord {
                name: name.to_string(),
                status: if residual.is_finite() && residual <= tolerance {
                    "pass"
                } else {
                    "fail"
                }
                .to_string(),
                residual: Some(residual),
                tolerance,
                wall_time_ms,
                detail: None,
            },
            Err(e) => CheckRecord {
                name: name.to_string(),
                status: "fail".to_string(),
                residual: None,
                tolerance,
                wall_time_ms,
                detail: Some(e.to_string()),
            },
        };
        self.records.push(record);
    }

    pub fn pass_if(&mut self, name: &str, condition: bool, detail_on_fail: impl Into<String>) {
        self.records.push(CheckRecord {
            name: name.to_string(),
            status: if condition { "pass" } else { "fail" }.to_string(),
            residual: Some(if condition { 0.0 } else { 1.0 }),
            tolerance: 0.0,
            wall_time_ms: 0.0,
            detail: if condition {
                None
            } else {
                Some(detail_on_fail.into())
            },
        });
    }

    pub fn fail(&mut self, name: &str, tolerance: f64, detail: impl Into<String>) {
        self.records.push(CheckRecord {
            name: name.to_string(),
            status: "fail".to_string(),
            residual: None,
            tolerance,
            wall_time_ms: 0.0,
            detail: Some(detail.into()),
        });
    }

    pub fn into_records(self) -> Vec<CheckRecord> {
        self.records
    }
}
