use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Lower bounds of the store's install ranges.
pub const CANONICAL_BUCKETS: [u64; 18] = [
    0,
    1,
    5,
    10,
    50,
    100,
    500,
    1_000,
    5_000,
    10_000,
    50_000,
    100_000,
    500_000,
    1_000_000,
    5_000_000,
    10_000_000,
    50_000_000,
    100_000_000,
];

/// Install count of an app, stored as the lower bound of its store bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstallBucket {
    Known(u64),
    Unknown,
}

impl InstallBucket {
    pub fn lower_bound(self) -> Option<u64> {
        match self {
            InstallBucket::Known(n) => Some(n),
            InstallBucket::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRecord {
    pub app_id: String,
    pub source: String,
    pub install_bucket: InstallBucket,
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub apps: Vec<AppRecord>,
    pub registry_version: String,
    pub created: String,
}

/// Parses a bucket cell: a canonical lower bound (`5000`, `5,000`), a store
/// range (`5,000 – 10,000`, `5,000+`) or `unknown`.
pub fn parse_bucket(cell: &str) -> Result<InstallBucket, String> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("unknown") || cell == "?" {
        return Ok(InstallBucket::Unknown);
    }
    let lower = cell
        .split(['–', '—', '-'])
        .next()
        .unwrap_or("")
        .trim()
        .trim_end_matches('+')
        .replace([',', ' ', '_'], "");
    let n: u64 = lower.parse().map_err(|_| format!("unparseable install bucket {cell:?}"))?;
    if CANONICAL_BUCKETS.contains(&n) {
        Ok(InstallBucket::Known(n))
    } else {
        Err(format!("{n} is not a canonical bucket lower bound"))
    }
}

const META_PREFIX: &str = "#%";

/// Parses manifest text. Lines starting with `#%` carry `key=value` metadata
/// (`registry_version`, `created`); other `#` lines are comments.
pub fn parse_manifest(text: &str) -> Result<CorpusManifest, IngestError> {
    let mut manifest = CorpusManifest::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if let Some(meta) = trimmed.strip_prefix(META_PREFIX) {
            if let Some((k, v)) = meta.trim().split_once('=') {
                match k.trim() {
                    "registry_version" => manifest.registry_version = v.trim().to_owned(),
                    "created" => manifest.created = v.trim().to_owned(),
                    _ => {}
                }
            }
            continue;
        }
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() < 3 {
            return Err(IngestError::ManifestSyntax {
                line,
                field: "record",
                reason: format!("expected at least 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let app_id = fields[0].trim();
        if app_id.is_empty() {
            return Err(IngestError::ManifestSyntax { line, field: "app_id", reason: "empty".into() });
        }
        let source = fields[1].trim();
        if source.is_empty() {
            return Err(IngestError::ManifestSyntax { line, field: "source", reason: "empty".into() });
        }
        let install_bucket = parse_bucket(fields[2])
            .map_err(|reason| IngestError::ManifestSyntax { line, field: "install_bucket", reason })?;
        let mut extra = BTreeMap::new();
        for kv in fields[3..].iter().filter(|f| !f.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| IngestError::ManifestSyntax {
                line,
                field: "metadata",
                reason: format!("expected key=value, got {kv:?}"),
            })?;
            extra.insert(k.trim().to_owned(), v.trim().to_owned());
        }
        if !seen.insert(app_id.to_owned()) {
            return Err(IngestError::DuplicateAppId { app_id: app_id.to_owned(), line });
        }
        manifest.apps.push(AppRecord {
            app_id: app_id.to_owned(),
            source: source.to_owned(),
            install_bucket,
            extra,
        });
    }
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest, IngestError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
    parse_manifest(&text)
}

/// Canonical text form; `parse_manifest(write_manifest(m)) == m`.
pub fn write_manifest(m: &CorpusManifest) -> String {
    let mut out = String::new();
    if !m.registry_version.is_empty() {
        let _ = writeln!(out, "{META_PREFIX} registry_version={}", m.registry_version);
    }
    if !m.created.is_empty() {
        let _ = writeln!(out, "{META_PREFIX} created={}", m.created);
    }
    for app in &m.apps {
        out.push_str(&app.app_id);
        out.push('\t');
        out.push_str(&app.source);
        out.push('\t');
        match app.install_bucket {
            InstallBucket::Known(n) => {
                let _ = write!(out, "{n}");
            }
            InstallBucket::Unknown => out.push_str("unknown"),
        }
        for (k, v) in &app.extra {
            let _ = write!(out, "\t{k}={v}");
        }
        out.push('\n');
    }
    out
}
