//! Run configuration: a JSON document merged with command-line overrides.
//!
//! The document is a single object with optional `command`, `n_modes`,
//! `seed`, `tolerances` (name to value), and `payload` (matrices and
//! scalars specific to one subcommand). Matrices travel as row-major
//! nested arrays of `[re, im]` pairs. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;

use fermi_gig_core::CMatrix;
use num_complex::Complex64;
use serde::Deserialize;

/// Problems with the invocation itself, as opposed to failed checks.
/// These map to exit code 2.
#[derive(Debug)]
pub enum CliError {
    /// The document is not syntactically valid JSON.
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// The document parses but a field is missing, unknown, or malformed.
    Validation { field: String, message: String },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse {
                line,
                column,
                message,
            } => write!(f, "config parse error (line {line}, column {column}): {message}"),
            CliError::Validation { field, message } => {
                write!(f, "invalid config: {field}: {message}")
            }
        }
    }
}

impl std::error::Error for CliError {}

pub fn validation(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Row-major complex matrix as it appears in config documents and reports.
pub type Mat = Vec<Vec<[f64; 2]>>;

/// Command-specific inputs. Every field is optional; each runner states
/// which ones it reads and which it samples from the seeded stream instead.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payload {
    pub g: Option<Mat>,
    pub a: Option<Mat>,
    pub s: Option<Mat>,
    pub r: Option<Mat>,
    pub h: Option<Mat>,
    pub t_sym: Option<Mat>,
    pub q0: Option<Mat>,
    pub time: Option<f64>,
    pub branch: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<String>,
    n_modes: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
    payload: Option<Payload>,
}

/// Effective parameters for one run, after defaults and overrides.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub n_modes: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub payload: Payload,
}

impl RunConfig {
    /// Named tolerance with its documented default.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

fn parse_document(doc: &str) -> Result<RawConfig, CliError> {
    serde_json::from_str(doc).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            CliError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        } else {
            // serde names the offending field in the message.
            validation("document", e.to_string())
        }
    })
}

/// Builds the run configuration for `command`. `config` is either a path
/// or, when it starts with `{`, the document itself. Flags win over the
/// document; the document wins over defaults (n_modes 2, seed 1).
pub fn resolve_config(
    command: &str,
    config: Option<&str>,
    n: Option<usize>,
    seed: Option<u64>,
    tol_flags: &[String],
) -> Result<RunConfig, CliError> {
    let raw = match config {
        None => RawConfig::default(),
        Some(src) => {
            let doc = if src.trim_start().starts_with('{') {
                src.to_string()
            } else {
                std::fs::read_to_string(src)
                    .map_err(|e| validation("config", format!("cannot read {src}: {e}")))?
            };
            parse_document(&doc)?
        }
    };

    if let Some(declared) = &raw.command {
        if declared != command {
            return Err(validation(
                "command",
                format!("document declares '{declared}' but '{command}' was invoked"),
            ));
        }
    }

    let n_modes = n.or(raw.n_modes).unwrap_or(2);
    if !(1..=10).contains(&n_modes) {
        return Err(validation("n_modes", format!("{n_modes} is outside 1..=10")));
    }

    let mut tolerances = raw.tolerances;
    for (name, value) in &tolerances {
        if !(value.is_finite() && *value >= 0.0) {
            return Err(validation(
                "tolerances",
                format!("{name} = {value} must be finite and nonnegative"),
            ));
        }
    }
    for flag in tol_flags {
        let (name, value) = flag
            .split_once('=')
            .ok_or_else(|| validation("tol", format!("'{flag}' is not name=value")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| validation("tol", format!("'{value}' is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(validation("tol", format!("{v} must be finite and nonnegative")));
        }
        tolerances.insert(name.trim().to_string(), v);
    }

    Ok(RunConfig {
        command: command.to_string(),
        n_modes,
        seed: seed.or(raw.seed).unwrap_or(1),
        tolerances,
        payload: raw.payload.unwrap_or_default(),
    })
}

/// Decodes a payload matrix, naming the field on any shape mismatch.
pub fn to_cmatrix(field: &str, mat: &Mat, dim: usize) -> Result<CMatrix, CliError> {
    if mat.len() != dim || mat.iter().any(|row| row.len() != dim) {
        return Err(validation(field, format!("expected {dim}x{dim}")));
    }
    let mut m = CMatrix::zeros(dim, dim);
    for (i, row) in mat.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !(re.is_finite() && im.is_finite()) {
                return Err(validation(field, format!("entry ({i}, {j}) is not finite")));
            }
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

/// Encodes a matrix for report data in the same nested-array layout the
/// payload uses, so reported matrices round-trip through config documents.
pub fn mat_json(m: &CMatrix) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im]))
                .collect()
        })
        .collect();
    serde_json::Value::Array(rows)
}
