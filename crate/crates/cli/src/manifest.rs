//! Run manifests: one JSON record per CLI invocation describing exactly what
//! was read, what was written, and under which seeds.
//!
//! Result files (datasets, checkpoints, reports) are byte-identical across
//! reruns with the same inputs; the manifest itself is the one artifact that
//! may differ, because it records wall-clock time.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use artscore::training::CHECKPOINT_VERSION;

/// What one `artscore` run read, wrote, and was seeded with.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Always `"artscore"`.
    pub tool: &'static str,
    pub tool_version: &'static str,
    /// Version of the checkpoint format this binary reads and writes.
    pub checkpoint_format_version: u32,
    /// The argv the run was invoked with.
    pub command: Vec<String>,
    /// SHA-256 digests of every input, keyed by role (`data`, `config_file`,
    /// `config_effective`, `checkpoint`, `ratings_a`, ...).
    pub inputs: BTreeMap<String, String>,
    /// Seeds the run consumed, keyed by what they drove.
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 digests of every file the run wrote, keyed by path.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_ms: u128,
}

impl RunManifest {
    pub fn new(command: Vec<String>) -> RunManifest {
        RunManifest {
            tool: "artscore",
            tool_version: env!("CARGO_PKG_VERSION"),
            checkpoint_format_version: CHECKPOINT_VERSION,
            command,
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_clock_ms: 0,
        }
    }

    pub fn input(&mut self, role: &str, digest: String) {
        self.inputs.insert(role.to_string(), digest);
    }

    pub fn input_file(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        let digest = sha256_file(path)?;
        self.input(role, digest);
        Ok(())
    }

    pub fn seed(&mut self, role: &str, seed: u64) {
        self.seeds.insert(role.to_string(), seed);
    }

    /// Records an already-written output file by digesting it back in.
    pub fn output_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let digest = sha256_file(path)?;
        self.outputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Serializes the manifest next to the run's outputs.
    pub fn write(mut self, path: &Path, started: std::time::Instant) -> anyhow::Result<()> {
        self.wall_clock_ms = started.elapsed().as_millis();
        let json = serde_json::to_string_pretty(&self).context("serialize run manifest")?;
        fs::write(path, json + "\n")
            .with_context(|| format!("write manifest {}", path.display()))?;
        Ok(())
    }
}

/// Hex SHA-256 of a byte string.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("read {}", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

/// Derived-artifact path: the full input path plus a suffix
/// (`model.json` -> `model.json.val.csv`). Appending to the complete file
/// name keeps derived paths collision-free even when two outputs share a
/// stem (`a.json` vs `a.jsonl`).
pub fn derived_path(base: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", base.display()))
}

/// Where a command's manifest lands: `<out>.manifest.json`, except for
/// directory outputs, which get `<dir>/manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    derived_path(out, ".manifest.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_input_sensitive() {
        let a = sha256_bytes(b"abc");
        assert_eq!(a, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_ne!(a, sha256_bytes(b"abd"));
    }

    #[test]
    fn derived_paths_do_not_collide_across_extensions() {
        let a = derived_path(Path::new("/tmp/a.json"), ".manifest.json");
        let b = derived_path(Path::new("/tmp/a.jsonl"), ".manifest.json");
        assert_ne!(a, b);
        assert_eq!(a, PathBuf::from("/tmp/a.json.manifest.json"));
    }

    #[test]
    fn manifest_serializes_with_sorted_keys() {
        let mut m = RunManifest::new(vec!["artscore".into(), "eval".into()]);
        m.input("data", "00".into());
        m.input("checkpoint", "11".into());
        m.seed("train", 7);
        let json = serde_json::to_string(&m).unwrap();
        let checkpoint_pos = json.find("\"checkpoint\":").unwrap();
        let data_pos = json.find("\"data\":").unwrap();
        assert!(checkpoint_pos < data_pos, "inputs map should be key-sorted");
    }
}
