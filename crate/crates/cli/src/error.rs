use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use fockprobe::steady::TruncationReport;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// Output files do not match the config they claim to come from.
    pub const VERIFY_MISMATCH: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const SOLVER: u8 = 3;
    pub const IO: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Config { section: Option<String>, key: Option<String>, line: Option<usize>, message: String },

    #[error("{0}")]
    Solver(fockprobe::Error),

    #[error("truncation inadequate: {}", describe_truncation(.0))]
    Truncation(TruncationReport),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("verification failed: {0} mismatch(es)")]
    Verify(usize),
}

fn describe_truncation(r: &TruncationReport) -> String {
    r.modes
        .iter()
        .filter(|m| !m.pass)
        .map(|m| match m.recommended_dim {
            Some(n) => format!("{:?} top level holds {:.3e} > {:.1e}, recommended dimension {n}", m.mode, m.tail, r.threshold),
            None => format!("{:?} top level holds {:.3e} > {:.1e}", m.mode, m.tail, r.threshold),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config { section: None, key: None, line: None, message: message.into() }
    }

    pub fn at(section: &str, key: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        CliError::Config { section: Some(section.into()), key: Some(key.into()), line, message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => exit::CONFIG,
            CliError::Solver(_) | CliError::Truncation(_) => exit::SOLVER,
            CliError::Io { .. } => exit::IO,
            CliError::Verify(_) => exit::VERIFY_MISMATCH,
        }
    }

    /// Single JSON object written to stderr on failure.
    pub fn to_json(&self) -> Value {
        let mut body = json!({ "code": self.exit_code(), "message": self.to_string() });
        let obj = body.as_object_mut().unwrap();
        match self {
            CliError::Config { section, key, line, .. } => {
                obj.insert("kind".into(), json!("config"));
                obj.insert("section".into(), json!(section));
                obj.insert("key".into(), json!(key));
                obj.insert("line".into(), json!(line));
            }
            CliError::Solver(e) => {
                obj.insert("kind".into(), json!("solver"));
                if let fockprobe::Error::AtGridPoint { index, value, .. } = e {
                    obj.insert("grid_index".into(), json!(index));
                    obj.insert("grid_value_mhz".into(), json!(value / fockprobe::model::mhz::<f64>(1.0)));
                    obj.insert("cause".into(), json!(e.root().to_string()));
                }
            }
            CliError::Truncation(r) => {
                obj.insert("kind".into(), json!("truncation"));
                obj.insert("report".into(), serde_json::to_value(r).unwrap_or(Value::Null));
            }
            CliError::Io { path, .. } => {
                obj.insert("kind".into(), json!("io"));
                obj.insert("path".into(), json!(path.display().to_string()));
            }
            CliError::Verify(n) => {
                obj.insert("kind".into(), json!("verify"));
                obj.insert("mismatches".into(), json!(n));
            }
        }
        json!({ "error": body })
    }
}

impl From<fockprobe::Error> for CliError {
    fn from(e: fockprobe::Error) -> Self {
        use fockprobe::Error as E;
        // Parameter and frame problems come from the config, not the solver.
        match e.root() {
            E::InvalidParams(_) | E::FrameIncompatible(_) | E::InvalidDimension { .. } | E::NegativeRate { .. } => {
                CliError::config(e.to_string())
            }
            _ => CliError::Solver(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
