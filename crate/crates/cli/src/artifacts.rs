//! Output directory with a content-hash manifest. Every artifact is recorded
//! with its sha256 and the hashes of the artifacts it was built from; reads
//! re-hash the file and check both.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub sha256: String,
    pub producer: String,
    /// Input artifact name → its hash when this artifact was written.
    pub inputs: BTreeMap<String, String>,
}

/// The command whose run writes `name`.
pub fn producer_of(name: &str) -> &'static str {
    match name {
        "clean.csv" | "schema.json" | "split.json" => "ingest",
        "effects.csv" | "significance.json" | "heterogeneity.json" | "cate_tree.txt" | "policy_tree.txt" => "causal",
        "alignment.json" => "align",
        n if n.starts_with("cv_") => "tune",
        n if n.starts_with("model_") || n.starts_with("metrics_") => "train",
        n if n.starts_with("shap_") || n.starts_with("importance_") => "explain",
        n if n.starts_with("whatif_") => "whatif",
        _ => "all",
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Workspace {
    dir: PathBuf,
    manifest: Manifest,
}

impl Workspace {
    /// Opens (creating if needed) `dir` and its manifest.
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(MANIFEST);
        let manifest = if path.is_file() {
            let text = fs::read_to_string(&path).map_err(|e| CliError::Stage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Stage(format!("corrupt manifest {}: {e}", path.display())))?
        } else {
            Manifest::default()
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Writes `bytes` as `name`, recording the current hashes of `inputs`.
    pub fn write(&mut self, name: &str, bytes: &[u8], inputs: &[&str]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::Stage(format!("cannot write {}: {e}", path.display())))?;
        self.record(name, bytes, inputs)
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S, inputs: &[&str]) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes(), inputs)
    }

    /// Records a file some library function already wrote at `path(name)`.
    pub fn adopt(&mut self, name: &str, inputs: &[&str]) -> Result<(), CliError> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|e| CliError::Stage(format!("cannot read {}: {e}", path.display())))?;
        self.record(name, &bytes, inputs)
    }

    fn record(&mut self, name: &str, bytes: &[u8], inputs: &[&str]) -> Result<(), CliError> {
        let inputs = inputs
            .iter()
            .map(|i| {
                let e = self.manifest.artifacts.get(*i).ok_or_else(|| CliError::Prerequisite {
                    artifact: i.to_string(),
                    producer: producer_of(i),
                })?;
                Ok((i.to_string(), e.sha256.clone()))
            })
            .collect::<Result<_, CliError>>()?;
        self.manifest.artifacts.insert(
            name.to_string(),
            Entry {
                sha256: sha256_hex(bytes),
                producer: producer_of(name).to_string(),
                inputs,
            },
        );
        self.save()
    }

    fn save(&self) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let path = self.path(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::Stage(format!("cannot write {}: {e}", path.display())))
    }

    /// Checks `name` exists, matches its recorded hash, and was built from
    /// the inputs currently on record.
    pub fn verify(&self, name: &str) -> Result<Vec<u8>, CliError> {
        let producer = producer_of(name);
        let missing = || CliError::Prerequisite {
            artifact: name.to_string(),
            producer,
        };
        let entry = self.manifest.artifacts.get(name).ok_or_else(missing)?;
        let bytes = fs::read(self.path(name)).map_err(|_| missing())?;
        let found = sha256_hex(&bytes);
        if found != entry.sha256 {
            return Err(CliError::Integrity {
                artifact: name.to_string(),
                producer,
                expected: entry.sha256.clone(),
                found,
            });
        }
        for (input, hash) in &entry.inputs {
            if self.manifest.artifacts.get(input).map(|e| &e.sha256) != Some(hash) {
                return Err(CliError::Stale {
                    artifact: name.to_string(),
                    input: input.clone(),
                    producer,
                });
            }
        }
        Ok(bytes)
    }

    pub fn read_json<D: serde::de::DeserializeOwned>(&self, name: &str) -> Result<D, CliError> {
        let bytes = self.verify(name)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Stage(format!("cannot parse {name}: {e}")))
    }
}
