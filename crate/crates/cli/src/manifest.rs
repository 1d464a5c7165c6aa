//! Run manifests: resolved parameters and content hashes, one
//! `key = value` per line in sorted order, so equal runs give equal bytes.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::parse_pairs;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Records `<key>.sha256` of a file's bytes.
    pub fn hash_file(&mut self, key: &str, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path)?;
        self.set(&format!("{key}.sha256"), sha256_hex(&bytes));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> CliResult<f64> {
        let v = self.get(key).ok_or_else(|| CliError::Io(format!("manifest has no `{key}`")))?;
        v.parse().map_err(|_| CliError::Io(format!("manifest `{key} = {v}` is not a number")))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let entries = parse_pairs(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { entries })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Shortest decimal that parses back to the same `f64`.
pub fn exact(v: f64) -> String {
    format!("{v:?}")
}
