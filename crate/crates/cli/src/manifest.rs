//! The run manifest: one JSON line per invocation, appended to
//! `<out>/manifest.jsonl`, plus the resolved config as `<out>/resolved.toml`
//! so a run can be repeated with `--config <out>/resolved.toml`.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub threads: usize,
    /// SHA-256 of the resolved config followed by every input file.
    pub inputs_sha256: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub status: &'static str,
    pub exit_code: u8,
    pub diagnostics: serde_json::Value,
}

pub fn inputs_hash(resolved_toml: &str, files: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    h.update(resolved_toml.as_bytes());
    for f in files {
        h.update((f.len() as u64).to_le_bytes());
        h.update(f);
    }
    hex::encode(h.finalize())
}

pub fn write(out: &Path, resolved_toml: &str, manifest: &Manifest) -> Result<(), CliError> {
    fs::write(out.join("resolved.toml"), resolved_toml)?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join("manifest.jsonl"))?;
    let line = serde_json::to_string(manifest).map_err(|e| CliError::input(e.to_string()))?;
    writeln!(f, "{line}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_separates_inputs() {
        let a = inputs_hash("x", &[b"ab", b"c"]);
        let b = inputs_hash("x", &[b"a", b"bc"]);
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
        assert_eq!(a, inputs_hash("x", &[b"ab", b"c"]));
    }
}
