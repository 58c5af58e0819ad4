//! Corpus inputs: manifests, call logs, APK/DEX containers and the scan cache.

mod cache;
mod calllog;
mod container;
mod manifest;

use std::path::PathBuf;

pub use cache::{IndexEntry, RawEdge, ScanCache, ScanIndex, ScanRecord, ScanStatus};
pub use calllog::{parse_call_log, write_call_log};
pub use container::{unpack_bytes, unpack_container};
pub use manifest::{
    load_manifest, parse_bucket, parse_manifest, write_manifest, AppRecord, CorpusManifest, InstallBucket,
    CANONICAL_BUCKETS,
};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("manifest line {line}, field {field}: {reason}")]
    ManifestSyntax { line: usize, field: &'static str, reason: String },
    #[error("duplicate app id {app_id:?} at manifest line {line}")]
    DuplicateAppId { app_id: String, line: usize },
    #[error("call log line {line}: {reason}")]
    RecordSyntax { line: usize, reason: String },
    #[error("no DEX image found in {}", path.display())]
    NoDexFound { path: PathBuf },
    #[error("corrupt archive {}: {reason}", path.display())]
    ArchiveCorrupt { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cache entry {key}: {reason}")]
    CacheCorrupt { key: String, reason: String },
}
