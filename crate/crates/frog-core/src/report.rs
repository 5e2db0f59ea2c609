//! Structured artifacts a run leaves behind: metrics, timings, manifest.
//!
//! Everything is JSON. Metrics files are deterministic given (seed,
//! config): wall-clock numbers live in a separate `timings.json` that the
//! metrics file only points to, so reruns produce byte-identical metrics.
//! The manifest lists each deterministic artifact with its SHA-256, which
//! makes the manifest itself reproducible as well.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::Result;
use crate::train::{RankingMetrics, TrainReport};

pub const METRICS_FILE: &str = "metrics.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const DATASET_DIR: &str = "dataset";

/// One trained-and-evaluated model inside a metrics report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// Loss curves and selection info; absent for checkpoint-only evals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainReport>,
    pub test: RankingMetrics,
}

/// The metrics file for `train` and `eval` runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub runs: Vec<SeedRun>,
    /// Unweighted mean of `runs[*].test` per cutoff.
    pub mean: RankingMetrics,
    /// Wall-clock numbers live there, outside this file on purpose.
    pub timings_file: String,
}

/// Phase wall-clock durations, written separately from the metrics.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: BTreeMap<String, f64>,
}

impl Timings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Times `f`, recording the duration under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.seconds.insert(phase.to_string(), start.elapsed().as_secs_f64());
        out
    }

    pub fn record(&mut self, phase: &str, secs: f64) {
        self.seconds.insert(phase.to_string(), secs);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Reproduction record: the exact config, master seed, and content hashes
/// of every deterministic artifact the run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub artifacts: Vec<ManifestEntry>,
}

/// Serializes `value` as pretty JSON (trailing newline) at `path`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn sha256_hex(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `manifest.json` under `out`, hashing the listed artifacts
/// (paths relative to `out`; every listed file must exist).
pub fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, artifacts: &[String]) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(artifacts.len());
    for rel in artifacts {
        let full = out.join(rel);
        entries.push(ManifestEntry {
            path: rel.clone(),
            bytes: fs::metadata(&full)?.len(),
            sha256: sha256_hex(&full)?,
        });
    }
    let manifest = Manifest {
        command: command.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        artifacts: entries,
    };
    let path = out.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Relative paths of the three dataset files under [`DATASET_DIR`].
pub fn dataset_artifacts() -> Vec<String> {
    [crate::data::USERS_FILE, crate::data::EDGES_FILE, crate::data::INSTANCES_FILE]
        .iter()
        .map(|f| format!("{DATASET_DIR}/{f}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vector() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        fs::write(&path, b"abc").unwrap();
        assert_eq!(
            sha256_hex(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trips_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.json"), b"{}\n").unwrap();
        let cfg = RunConfig::default();
        let path = write_manifest(dir.path(), "synth", &cfg, &["a.json".to_string()]).unwrap();
        let manifest: Manifest = read_json(&path).unwrap();
        assert_eq!(manifest.command, "synth");
        assert_eq!(manifest.artifacts.len(), 1);
        assert_eq!(manifest.artifacts[0].bytes, 3);
        assert_eq!(manifest.config, cfg);
    }

    #[test]
    fn missing_artifact_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        assert!(write_manifest(dir.path(), "synth", &cfg, &["ghost.json".to_string()]).is_err());
    }

    #[test]
    fn timings_capture_phases() {
        let mut t = Timings::new();
        let v = t.time("phase", || 7);
        assert_eq!(v, 7);
        assert!(t.seconds["phase"] >= 0.0);
    }
}
