use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

/// Record of one command run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the effective configuration text.
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub version: &'static str,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, effective_config: &str) -> Self {
        Self {
            command: command.into(),
            config_digest: digest(effective_config),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
            duration_secs: 0.0,
        }
    }

    pub fn finish(mut self, dir: &Path, elapsed: Duration) -> anyhow::Result<PathBuf> {
        self.duration_secs = elapsed.as_secs_f64();
        let path = dir.join(FILE_NAME);
        fusetrack::io::write_json(&path, &self)?;
        Ok(path)
    }
}

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_sha256_hex() {
        assert_eq!(
            digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
