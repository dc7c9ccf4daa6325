//! Run manifests: every subcommand records its resolved configuration,
//! content hashes of its inputs, and its output paths, next to each output
//! it writes (inside directory outputs, as a `.manifest.json` sibling for
//! file outputs). Under reproducible mode no wall-clock time is recorded,
//! so reruns with identical inputs and configuration write byte-identical
//! manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file, or of a directory's sorted (relative path, contents)
/// stream.
pub fn digest_path(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, path, &mut files)?;
        files.sort();
        for rel in files {
            hasher.update(rel.as_bytes());
            hasher.update([0u8]);
            let bytes = fs::read(path.join(&rel))
                .with_context(|| format!("reading {}", path.join(&rel).display()))?;
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
    } else {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        hasher.update(&bytes);
    }
    Ok(hex(&hasher.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(
                path.strip_prefix(root)
                    .expect("children live under the root")
                    .to_string_lossy()
                    .replace('\\', "/"),
            );
        }
    }
    Ok(())
}

pub struct RunManifest {
    pub subcommand: &'static str,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub threads: Option<usize>,
    pub reproducible: bool,
}

impl RunManifest {
    /// Serialize and place the manifest alongside every output.
    pub fn write(&self) -> Result<()> {
        let mut inputs = Vec::new();
        for path in &self.inputs {
            inputs.push(json!({
                "path": path.to_string_lossy(),
                "sha256": digest_path(path)?,
            }));
        }
        let created_unix: Option<u64> = if self.reproducible {
            None
        } else {
            Some(SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs())
        };
        let doc = json!({
            "artifact_version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": inputs,
            "outputs": self
                .outputs
                .iter()
                .map(|p| p.to_string_lossy().into_owned())
                .collect::<Vec<_>>(),
            "threads": self.threads,
            "reproducible": self.reproducible,
            "created_unix": created_unix,
        });
        let text = serde_json::to_string_pretty(&doc)?;
        for output in &self.outputs {
            let target = if output.is_dir() {
                output.join("run_manifest.json")
            } else {
                let name = output
                    .file_name()
                    .map(|n| format!("{}.manifest.json", n.to_string_lossy()))
                    .unwrap_or_else(|| "run_manifest.json".into());
                output.with_file_name(name)
            };
            fs::write(&target, &text)
                .with_context(|| format!("writing manifest {}", target.display()))?;
        }
        Ok(())
    }
}
