//! Dataset container: a JSON manifest next to raw little-endian f32 samples
//! laid out `[window][channel][time]`.

use std::path::{Path, PathBuf};

use citrus_core::data::SignalSet;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WbError};
use crate::fsutil::{read, read_string, sha256_hex, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "data.f32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub fs: f64,
    pub channels: usize,
    pub window_len: usize,
    pub n_classes: usize,
    pub label_names: Vec<String>,
    pub has_subjects: bool,
    pub n_windows: usize,
    pub data_file: String,
    pub dtype: String,
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subjects: Option<Vec<u32>>,
}

impl DatasetManifest {
    pub fn of(set: &SignalSet) -> Self {
        DatasetManifest {
            name: set.name.clone(),
            fs: set.fs,
            channels: set.channels,
            window_len: set.window_len,
            n_classes: set.n_classes,
            label_names: set.label_names.clone(),
            has_subjects: set.subjects.is_some(),
            n_windows: set.len(),
            data_file: DATA_FILE.into(),
            dtype: "f32le".into(),
            labels: set.labels.clone(),
            subjects: set.subjects.clone(),
        }
    }

    pub fn expected_bytes(&self) -> usize {
        self.n_windows * self.channels * self.window_len * 4
    }

    fn check(&self) -> Result<()> {
        if self.dtype != "f32le" {
            return Err(WbError::format(format!(
                "unsupported dtype {:?}",
                self.dtype
            )));
        }
        if self.labels.len() != self.n_windows {
            return Err(WbError::format(format!(
                "{} labels for {} windows",
                self.labels.len(),
                self.n_windows
            )));
        }
        if self.has_subjects != self.subjects.is_some() {
            return Err(WbError::format(
                "has_subjects disagrees with the subject list",
            ));
        }
        Ok(())
    }
}

fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

pub fn encode_f32(data: &[f32]) -> Vec<u8> {
    data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

/// Write `set` into directory `dir` (created if needed).
pub fn save_dataset(set: &SignalSet, dir: &Path) -> Result<()> {
    set.validate()?;
    let manifest = DatasetManifest::of(set);
    write_atomic(&dir.join(&manifest.data_file), &encode_f32(&set.data))?;
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| WbError::Json {
        path: manifest_path(dir),
        source: e,
    })?;
    write_atomic(&manifest_path(dir), &json)
}

/// Load a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<SignalSet> {
    let path = manifest_path(dir);
    let manifest: DatasetManifest =
        serde_json::from_str(&read_string(&path)?).map_err(|e| WbError::Json {
            path: path.clone(),
            source: e,
        })?;
    manifest.check()?;
    let data_path = dir.join(&manifest.data_file);
    let bytes = read(&data_path)?;
    if bytes.len() != manifest.expected_bytes() {
        return Err(WbError::format(format!(
            "{}: expected {} bytes, found {}",
            data_path.display(),
            manifest.expected_bytes(),
            bytes.len()
        )));
    }
    let set = SignalSet {
        name: manifest.name,
        fs: manifest.fs,
        channels: manifest.channels,
        window_len: manifest.window_len,
        n_classes: manifest.n_classes,
        label_names: manifest.label_names,
        data: decode_f32(&bytes),
        labels: manifest.labels,
        subjects: manifest.subjects,
    };
    set.validate()?;
    Ok(set)
}

/// SHA-256 over manifest and data bytes, identifying a dataset on disk.
pub fn dataset_hash(dir: &Path) -> Result<String> {
    let mut bytes = read(&manifest_path(dir))?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes).map_err(|e| WbError::Json {
        path: manifest_path(dir),
        source: e,
    })?;
    bytes.extend(read(&dir.join(manifest.data_file))?);
    Ok(sha256_hex(&bytes))
}
