use std::fs;
use std::path::Path;

use fmpl::error::{FmplError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Command;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Written next to every output. `params` holds the fully resolved command,
/// so replaying it needs nothing else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub params: Command,
    pub resolved: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

pub fn digest_file(path: &str) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(InputDigest { path: path.to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

pub fn io_error(path: impl AsRef<Path>, e: std::io::Error) -> FmplError {
    FmplError::Input(format!("{}: {e}", path.as_ref().display()))
}

pub fn read_text(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn write_text(path: &str, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

impl RunManifest {
    pub fn load(path: &str) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| FmplError::Input(format!("{path}: {e}")))
    }

    /// Fails if any recorded input has changed since the run.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = digest_file(&input.path)?;
            if now.sha256 != input.sha256 {
                return Err(FmplError::Input(format!("{}: digest differs from manifest", input.path)));
            }
        }
        Ok(())
    }
}
