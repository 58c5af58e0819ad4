use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReportError;

/// Per-library permission counts and privacy API-call counts, as published.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissionRow {
    pub library: String,
    pub permissions: u32,
    pub api_calls: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissionFixture {
    pub rows: Vec<PermissionRow>,
}

const SHIPPED: &str = include_str!("../../data/permissions.tsv");

impl PermissionFixture {
    /// Tab-separated `library permissions api_calls`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |reason: String| ReportError::FixtureSyntax { line: i + 1, reason };
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            if f.len() != 3 || f[0].is_empty() {
                return Err(err(format!("expected 3 tab-separated fields, got {}", f.len())));
            }
            let num = |s: &str, what: &str| s.parse::<u32>().map_err(|_| err(format!("bad {what} count {s:?}")));
            rows.push(PermissionRow {
                library: f[0].to_owned(),
                permissions: num(f[1], "permission")?,
                api_calls: num(f[2], "api call")?,
            });
        }
        Ok(PermissionFixture { rows })
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| ReportError::MissingFixture { path: path.display().to_string() })?;
        Self::parse(&text)
    }

    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("shipped permission fixture parses")
    }
}
