//! Record files: the CSV itself plus a `.meta.json` sidecar holding the
//! dataset and config hashes of every run appended to it.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use citrus_core::eval::{parse_records, RunRecord, RECORD_HEADER};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WbError};
use crate::fsutil::{read_string, write_atomic};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    /// Dataset name → content hash.
    pub datasets: BTreeMap<String, String>,
    /// Config hashes of the runs in the file.
    pub configs: Vec<String>,
}

pub fn meta_path(records: &Path) -> PathBuf {
    let mut s = records.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn read_meta(records: &Path) -> Result<RecordMeta> {
    let path = meta_path(records);
    if !path.exists() {
        return Ok(RecordMeta::default());
    }
    serde_json::from_str(&read_string(&path)?).map_err(|e| WbError::Json { path, source: e })
}

impl RecordMeta {
    /// Fold `other` in, refusing a dataset name bound to two hashes.
    pub fn merge(&mut self, other: &RecordMeta) -> Result<()> {
        for (name, hash) in &other.datasets {
            match self.datasets.get(name) {
                Some(h) if h != hash => {
                    return Err(WbError::format(format!(
                        "records for dataset {name} come from different data (hash {h} vs {hash})"
                    )))
                }
                _ => {
                    self.datasets.insert(name.clone(), hash.clone());
                }
            }
        }
        for c in &other.configs {
            if !self.configs.contains(c) {
                self.configs.push(c.clone());
            }
        }
        Ok(())
    }
}

/// Append `records` in a single write, creating the file with its header
/// when needed, and update the sidecar.
pub fn append_records(
    path: &Path,
    records: &[RunRecord],
    dataset_hash: &str,
    config_hash: &str,
) -> Result<()> {
    let mut meta = read_meta(path)?;
    let mut add = RecordMeta::default();
    for r in records {
        add.datasets
            .insert(r.dataset.clone(), dataset_hash.to_string());
    }
    add.configs.push(config_hash.to_string());
    meta.merge(&add)?;

    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| WbError::io(dir, e))?;
    }
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let mut text = String::new();
    if fresh {
        text.push_str(RECORD_HEADER);
        text.push('\n');
    }
    for r in records {
        text.push_str(&r.to_csv()?);
        text.push('\n');
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| WbError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| WbError::io(path, e))?;
    let json = serde_json::to_vec_pretty(&meta).expect("meta serializes");
    write_atomic(&meta_path(path), &json)
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    parse_records(&read_string(path)?)
        .map_err(|e| WbError::format(format!("{}: {e}", path.display())))
}
