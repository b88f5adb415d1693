//! Run manifest and idempotent persistence of command outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub format: String,
    /// SHA-256 of `config`.
    pub config_digest: String,
    /// The configuration text as read.
    pub config: String,
    /// Effective seed (after any command-line override).
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub tolerances: BTreeMap<String, BTreeMap<String, f64>>,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn new(command: &str, format: &str, config: &str, seed: u64, tolerances: BTreeMap<String, BTreeMap<String, f64>>) -> Self {
        let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        Self {
            schema_version: MANIFEST_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            format: format.to_string(),
            config_digest: sha256_hex(config.as_bytes()),
            config: config.to_string(),
            seed,
            started_at: now.clone(),
            finished_at: now,
            tolerances,
            outputs: Vec::new(),
        }
    }

    pub fn digest_is_consistent(&self) -> bool {
        sha256_hex(self.config.as_bytes()) == self.config_digest
    }

    fn same_run(&self, other: &RunManifest) -> Result<(), String> {
        let mut diffs = Vec::new();
        if self.command != other.command {
            diffs.push(format!("command {} vs {}", self.command, other.command));
        }
        if self.config_digest != other.config_digest {
            diffs.push(format!("config digest {} vs {}", self.config_digest, other.config_digest));
        }
        if self.seed != other.seed {
            diffs.push(format!("seed {} vs {}", self.seed, other.seed));
        }
        if self.format != other.format {
            diffs.push(format!("format {} vs {}", self.format, other.format));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(diffs.join("; "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Persisted {
    Fresh,
    /// Same run found; outputs were reproduced byte for byte.
    Reproduced,
}

fn check_name(name: &str) -> CliResult<()> {
    let p = Path::new(name);
    if name.is_empty() || p.components().count() != 1 || p.file_name().map(|f| f != name).unwrap_or(true) {
        return Err(CliError::Internal(format!("output name {name:?} is not a plain file name")));
    }
    Ok(())
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

/// Writes `files` and the manifest into `out` (and nowhere else).
///
/// An existing manifest must describe the same run; its inventory must then
/// match the new outputs exactly, and it is left untouched.
pub fn persist(out: &Path, mut manifest: RunManifest, files: Vec<(String, Vec<u8>)>) -> CliResult<Persisted> {
    for (name, _) in &files {
        check_name(name)?;
        if name == MANIFEST_FILE {
            return Err(CliError::Internal("output collides with the manifest".into()));
        }
    }
    manifest.outputs = files
        .iter()
        .map(|(name, b)| OutputEntry { file: name.clone(), bytes: b.len() as u64, sha256: sha256_hex(b) })
        .collect();
    fs::create_dir_all(out)?;
    let path = out.join(MANIFEST_FILE);
    if path.exists() {
        let text = fs::read_to_string(&path)?;
        let stored: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::DigestMismatch(format!("existing {} is unreadable: {e}", path.display())))?;
        if !stored.digest_is_consistent() {
            return Err(CliError::DigestMismatch(format!(
                "digest mismatch: stored config does not hash to the recorded digest in {}",
                path.display()
            )));
        }
        stored.same_run(&manifest).map_err(|d| {
            CliError::DigestMismatch(format!("digest mismatch with the run recorded in {}: {d}", out.display()))
        })?;
        if stored.outputs != manifest.outputs {
            return Err(CliError::DigestMismatch(format!(
                "digest mismatch: outputs of this run differ from the inventory in {}",
                path.display()
            )));
        }
        for (name, bytes) in &files {
            let target = out.join(name);
            if fs::read(&target).ok().as_deref() != Some(bytes.as_slice()) {
                write_atomic(out, name, bytes)?;
            }
        }
        return Ok(Persisted::Reproduced);
    }
    for (name, bytes) in &files {
        write_atomic(out, name, bytes)?;
    }
    manifest.finished_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(out, MANIFEST_FILE, format!("{text}\n").as_bytes())?;
    Ok(Persisted::Fresh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(cfg: &str) -> RunManifest {
        RunManifest::new("rates", "all", cfg, 1, BTreeMap::new())
    }

    #[test]
    fn fresh_then_reproduced_then_refused() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![("a.csv".to_string(), b"x,y\n1,2\n".to_vec())];
        assert_eq!(persist(dir.path(), manifest("c"), files.clone()).unwrap(), Persisted::Fresh);
        let before = fs::read(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(persist(dir.path(), manifest("c"), files.clone()).unwrap(), Persisted::Reproduced);
        assert_eq!(fs::read(dir.path().join(MANIFEST_FILE)).unwrap(), before);
        let e = persist(dir.path(), manifest("d"), files.clone()).unwrap_err();
        assert!(e.to_string().contains("digest mismatch"), "{e}");
        let other = vec![("a.csv".to_string(), b"x,y\n1,3\n".to_vec())];
        assert!(persist(dir.path(), manifest("c"), other).is_err());
        let stored: RunManifest = serde_json::from_slice(&before).unwrap();
        assert!(stored.digest_is_consistent());
        assert_eq!(stored.outputs[0].sha256, sha256_hex(b"x,y\n1,2\n"));
    }

    #[test]
    fn names_stay_inside_the_directory() {
        let dir = tempfile::tempdir().unwrap();
        for bad in ["../x", "/tmp/x", "a/b", "", "manifest.json"] {
            assert!(persist(dir.path(), manifest("c"), vec![(bad.to_string(), vec![])]).is_err(), "{bad}");
        }
    }
}
