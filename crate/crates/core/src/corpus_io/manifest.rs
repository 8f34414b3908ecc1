use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CorpusError;

/// One line of `manifest.jsonl`: what a pipeline stage read, how it was
/// configured and what it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub run_id: String,
    pub step: String,
    /// Input path -> `sha256:<hex>` of the file bytes.
    pub input_digests: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
    pub output_counts: BTreeMap<String, u64>,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

impl ExperimentManifest {
    pub fn new(run_id: impl Into<String>, step: impl Into<String>) -> Self {
        ExperimentManifest {
            run_id: run_id.into(),
            step: step.into(),
            input_digests: BTreeMap::new(),
            parameters: BTreeMap::new(),
            output_counts: BTreeMap::new(),
            timestamp: now_rfc3339(),
        }
    }

    /// Records the digest of `path` as it is right now.
    pub fn add_input(&mut self, path: &Path) -> Result<(), CorpusError> {
        let digest = file_digest(path)?;
        self.input_digests
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn param(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.into(), value.to_string());
        self
    }

    pub fn count(&mut self, key: impl Into<String>, value: u64) -> &mut Self {
        self.output_counts.insert(key.into(), value);
        self
    }
}

fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

/// Fine-tuning hyperparameters of the downstream translation model. The
/// pipeline never trains; these are carried into the manifest so a run
/// records what model configuration its data was prepared for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelHyperparameters {
    pub max_sequence_length: u32,
    pub batch_size: u32,
    pub epochs: u32,
    pub learning_rate: String,
    pub weight_decay: String,
    pub beam_size: u32,
}

impl Default for ModelHyperparameters {
    fn default() -> Self {
        ModelHyperparameters {
            max_sequence_length: 100,
            batch_size: 16,
            epochs: 4,
            learning_rate: "4e-5".into(),
            weight_decay: "1e-8".into(),
            beam_size: 4,
        }
    }
}

impl ModelHyperparameters {
    pub fn record(&self, entry: &mut ExperimentManifest) {
        entry
            .param("model.max_sequence_length", self.max_sequence_length)
            .param("model.batch_size", self.batch_size)
            .param("model.epochs", self.epochs)
            .param("model.learning_rate", &self.learning_rate)
            .param("model.weight_decay", &self.weight_decay)
            .param("model.beam_size", self.beam_size);
    }
}

/// Appends `entry` as one JSON line. Existing bytes are never rewritten.
pub fn append_manifest(path: &Path, entry: &ExperimentManifest) -> Result<(), CorpusError> {
    let mut line = serde_json::to_string(entry).expect("manifest entries always serialize");
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CorpusError::io(path, e))?;
    f.write_all(line.as_bytes())
        .and_then(|_| f.sync_data())
        .map_err(|e| CorpusError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ExperimentManifest>, CorpusError> {
    let f = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|source| CorpusError::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// `sha256:<hex>` of the file contents.
pub fn file_digest(path: &Path) -> Result<String, CorpusError> {
    let mut f = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CorpusError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("sha256:{}", hex::encode(hasher.finalize())))
}
