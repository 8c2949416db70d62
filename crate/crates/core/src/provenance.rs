//! Provenance stamps carried by every artifact the pipeline writes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!("roadscene/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub prompt_version: String,
    pub seed: u64,
    pub config_digest: String,
}

impl Provenance {
    pub fn new(prompt_version: &str, seed: u64, config_digest: &str) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            prompt_version: prompt_version.to_string(),
            seed,
            config_digest: config_digest.to_string(),
        }
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// First 16 hex characters of the SHA-256, used as a short digest in reports.
pub fn short_digest(bytes: &[u8]) -> String {
    sha256_hex(bytes)[..16].to_string()
}

/// Writes `<path>.provenance.json` next to a line-delimited artifact.
pub fn write_sidecar(path: &std::path::Path, provenance: &Provenance) -> std::io::Result<()> {
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".provenance.json");
    let mut body = serde_json::to_string_pretty(provenance).expect("provenance serializes");
    body.push('\n');
    std::fs::write(sidecar, body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(short_digest(b"abc"), "ba7816bf8f01cfea");
    }
}
