//! Artifact files, run manifests and input freshness checks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::error::Error;

pub const TOOL: &str = concat!("gt ", env!("CARGO_PKG_VERSION"));

pub fn manifest_name(command: &str) -> String {
    format!("{command}_manifest.json")
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Record of one command invocation. Timestamps are the only fields that
/// differ between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool: String,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub input_dir: PathBuf,
    pub out_dir: PathBuf,
    /// File name to SHA-256 of every artifact read.
    pub inputs: BTreeMap<String, String>,
    /// File name to SHA-256 of every artifact written.
    pub outputs: BTreeMap<String, String>,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
}

/// Tracks reads and writes of one command and writes its manifest.
pub struct Run {
    manifest: RunManifest,
    input_dir: PathBuf,
    out_dir: PathBuf,
}

impl Run {
    pub fn start(
        command: &str,
        input_dir: &Path,
        out_dir: &Path,
        config_path: Option<&Path>,
        seed: Option<u64>,
        tau: Option<f64>,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        Ok(Run {
            manifest: RunManifest {
                command: command.to_string(),
                tool: TOOL.to_string(),
                config_path: config_path.map(Path::to_path_buf),
                seed,
                tau,
                input_dir: input_dir.to_path_buf(),
                out_dir: out_dir.to_path_buf(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                started_at_unix: unix_seconds(),
                finished_at_unix: 0,
            },
            input_dir: input_dir.to_path_buf(),
            out_dir: out_dir.to_path_buf(),
        })
    }

    pub fn produced_by(&self) -> String {
        manifest_name(&self.manifest.command)
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Resolves an input artifact, failing when it is absent or when the
    /// manifest of the command that wrote it records a different hash.
    /// `what` names the artifact in diagnostics (e.g. "model").
    pub fn input(&mut self, name: &str, what: &str) -> Result<PathBuf, CliError> {
        let path = self.input_dir.join(name);
        if !path.is_file() {
            return Err(CliError::Missing(format!(
                "missing {what}: {} not found",
                path.display()
            )));
        }
        let hash = sha256_file(&path)?;
        if let Some((producer, expected)) = find_producer(&self.input_dir, name)? {
            if expected != hash {
                return Err(CliError::Stale(format!(
                    "stale input: {} does not match the hash recorded in {producer}",
                    path.display()
                )));
            }
        }
        self.manifest.inputs.insert(name.to_string(), hash);
        Ok(path)
    }

    /// Like [`Run::input`] but returns `None` when the file does not exist.
    pub fn optional_input(&mut self, name: &str, what: &str) -> Result<Option<PathBuf>, CliError> {
        if self.input_dir.join(name).is_file() {
            self.input(name, what).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn record_external_input(&mut self, path: &Path) -> Result<(), CliError> {
        let hash = sha256_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    /// Records a file some other writer already placed in the output dir.
    pub fn record_output(&mut self, name: &str) -> Result<(), CliError> {
        let hash = sha256_file(&self.out_path(name))?;
        self.manifest.outputs.insert(name.to_string(), hash);
        Ok(())
    }

    /// Writes raw bytes and records the output.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out_path(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest
            .outputs
            .insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    /// Writes a value as pretty JSON with a `produced_by` field pointing at
    /// this command's manifest.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let value = serde_json::to_value(value).map_err(Error::from)?;
        self.write_json_value(name, value)
    }

    pub fn write_json_value(&mut self, name: &str, mut value: serde_json::Value) -> Result<(), CliError> {
        if let serde_json::Value::Object(map) = &mut value {
            map.insert("produced_by".into(), self.produced_by().into());
        }
        let mut bytes = serde_json::to_vec_pretty(&value).map_err(Error::from)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Writes the output produced by `fill` into an in-memory buffer first so
    /// the recorded hash matches the file exactly.
    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> crate::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.finished_at_unix = unix_seconds();
        let path = self.out_path(&manifest_name(&self.manifest.command));
        let bytes = serde_json::to_vec_pretty(&self.manifest).map_err(Error::from)?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

/// Finds the manifest in `dir` that lists `name` among its outputs.
fn find_producer(dir: &Path, name: &str) -> Result<Option<(String, String)>, CliError> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(None);
    };
    let mut manifests: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with("_manifest.json"))
        })
        .collect();
    manifests.sort();
    for path in manifests {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let Ok(m) = serde_json::from_slice::<RunManifest>(&bytes) else {
            log::warn!("ignoring unreadable manifest {}", path.display());
            continue;
        };
        if let Some(hash) = m.outputs.get(name) {
            let producer = path.file_name().unwrap().to_string_lossy().into_owned();
            return Ok(Some((producer, hash.clone())));
        }
    }
    Ok(None)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes).map_err(Error::from)?)
}

pub fn open(path: &Path) -> Result<fs::File, CliError> {
    Ok(fs::File::open(path).map_err(|e| Error::io(path, e))?)
}
