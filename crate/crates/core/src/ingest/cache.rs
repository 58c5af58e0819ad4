//! Content-addressed store of per-source scan results.
//!
//! Objects live at `<dir>/objects/<2 hex>/<62 hex>.json`, keyed by the
//! SHA-256 of the source bytes (salted with the record schema version).
//! `<dir>/index.json` maps app ids onto object keys and scan status. Writes go
//! through a temporary file and an atomic rename, so concurrent readers never
//! observe a partial object.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IngestError;
use crate::dex::Diagnostic;
use crate::libid::ClassSummary;
use crate::model::{CallEdge, InvokeKind, MethodRef};

const SCHEMA: &[u8] = b"adscope-scan-v1\0";
const INDEX_FILE: &str = "index.json";

/// Call edge without its owning app, so identical sources share an object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawEdge {
    pub caller_class: String,
    pub callee: MethodRef,
    pub invoke_kind: InvokeKind,
}

impl RawEdge {
    pub fn from_edge(e: &CallEdge) -> Self {
        RawEdge { caller_class: e.caller_class.clone(), callee: e.callee.clone(), invoke_kind: e.invoke_kind }
    }

    pub fn bind(&self, app_id: &str) -> CallEdge {
        CallEdge {
            app_id: app_id.to_owned(),
            caller_class: self.caller_class.clone(),
            callee: self.callee.clone(),
            invoke_kind: self.invoke_kind,
        }
    }
}

/// Everything later stages need from one app's source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub edges: Vec<RawEdge>,
    /// Classes defined by the app's DEX images. Empty for call-log sources.
    pub classes: Vec<ClassSummary>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ScanRecord {
    pub fn call_edges(&self, app_id: &str) -> Vec<CallEdge> {
        self.edges.iter().map(|e| e.bind(app_id)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanStatus {
    Ok,
    /// Source missing or unreadable; a warning, not a failure.
    Skipped,
    /// Source present but could not be parsed.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub status: ScanStatus,
    pub digest: Option<String>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanIndex {
    pub entries: BTreeMap<String, IndexEntry>,
}

#[derive(Debug, Clone)]
pub struct ScanCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_owned(), source }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let parent = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    let tmp = parent.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

impl ScanCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, IngestError> {
        let dir = dir.into();
        std::fs::create_dir_all(dir.join("objects")).map_err(io_err(&dir))?;
        Ok(ScanCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key_for(source: &[u8]) -> String {
        let mut h = Sha256::new();
        h.update(SCHEMA);
        h.update(source);
        hex::encode(h.finalize())
    }

    fn object_path(&self, key: &str) -> PathBuf {
        let (a, b) = key.split_at(2.min(key.len()));
        self.dir.join("objects").join(a).join(format!("{b}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<ScanRecord>, IngestError> {
        let path = self.object_path(key);
        match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| IngestError::CacheCorrupt { key: key.to_owned(), reason: e.to_string() }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(IngestError::Io { path, source: e }),
        }
    }

    pub fn put(&self, key: &str, record: &ScanRecord) -> Result<(), IngestError> {
        let bytes = serde_json::to_vec(record)
            .map_err(|e| IngestError::CacheCorrupt { key: key.to_owned(), reason: e.to_string() })?;
        write_atomic(&self.object_path(key), &bytes)
    }

    pub fn index_path(&self) -> PathBuf {
        self.dir.join(INDEX_FILE)
    }

    /// `Ok(None)` when no scan has been recorded in this directory.
    pub fn load_index(&self) -> Result<Option<ScanIndex>, IngestError> {
        let path = self.index_path();
        match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| IngestError::CacheCorrupt { key: INDEX_FILE.into(), reason: e.to_string() }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(IngestError::Io { path, source: e }),
        }
    }

    pub fn store_index(&self, index: &ScanIndex) -> Result<(), IngestError> {
        let bytes = serde_json::to_vec_pretty(index)
            .map_err(|e| IngestError::CacheCorrupt { key: INDEX_FILE.into(), reason: e.to_string() })?;
        write_atomic(&self.index_path(), &bytes)
    }
}
