//! The split manifest ties `train` and `evaluate` to one partition.

use std::fs;
use std::path::{Path, PathBuf};

use mosaic_core::data::{read_normalized, write_normalized};
use mosaic_core::{InteractionLog, SplitDataset};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "split.json";
pub const TRAIN_FILE: &str = "train.bin";
pub const TEST_FILE: &str = "test.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub source_sha256: String,
    pub split_ratio: f64,
    pub n_users: usize,
    pub n_items: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub dropped_users: usize,
    pub train_file: String,
    pub train_sha256: String,
    pub test_file: String,
    pub test_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn encode(log: &InteractionLog) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_normalized(log, &mut bytes).expect("writing to memory");
    bytes
}

pub fn write_split(dir: &Path, source: &[u8], split: &SplitDataset) -> Result<SplitManifest, CliError> {
    let train = encode(&split.train);
    let test = encode(&split.test);
    let manifest = SplitManifest {
        source_sha256: sha256_hex(source),
        split_ratio: split.split_ratio,
        n_users: split.train.n_users(),
        n_items: split.train.n_items(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        dropped_users: split.dropped_users.len(),
        train_file: TRAIN_FILE.into(),
        train_sha256: sha256_hex(&train),
        test_file: TEST_FILE.into(),
        test_sha256: sha256_hex(&test),
    };
    crate::commands::write_file(&dir.join(TRAIN_FILE), &train)?;
    crate::commands::write_file(&dir.join(TEST_FILE), &test)?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    crate::commands::write_file(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

fn verified(dir: &Path, file: &str, expected: &str) -> Result<InteractionLog, CliError> {
    let path: PathBuf = dir.join(file);
    let bytes = fs::read(&path).map_err(|e| CliError::read(&path, e))?;
    let actual = sha256_hex(&bytes);
    if actual != expected {
        return Err(CliError::Input(format!(
            "{}: checksum {actual} does not match the manifest ({expected})",
            path.display()
        )));
    }
    read_normalized(bytes.as_slice()).map_err(|e| CliError::read(&path, e))
}

pub struct LoadedSplit {
    pub manifest: SplitManifest,
    pub test: InteractionLog,
}

/// Reads a manifest and its test partition, checking both partition checksums.
pub fn read_split(manifest_path: &Path) -> Result<LoadedSplit, CliError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| CliError::read(manifest_path, e))?;
    let manifest: SplitManifest = serde_json::from_str(&text).map_err(|e| CliError::read(manifest_path, e))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    verified(dir, &manifest.train_file, &manifest.train_sha256)?;
    let test = verified(dir, &manifest.test_file, &manifest.test_sha256)?;
    Ok(LoadedSplit { manifest, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
