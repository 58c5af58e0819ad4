use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fingerprint::LibraryFingerprint;
use super::LibIdError;

const DEFAULT_REGISTRY: &str = include_str!("../../data/registry.tsv");

/// A known ad or analytics library.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibrarySpec {
    pub canonical_name: String,
    /// Dotted Java package prefixes, e.g. `com.google.ads`.
    pub package_prefixes: Vec<String>,
    pub fingerprint: Option<LibraryFingerprint>,
    pub notes: String,
}

/// Immutable set of library specs with a precomputed prefix index.
#[derive(Debug, Clone)]
pub struct Registry {
    specs: Vec<LibrarySpec>,
    /// Slash-form prefix -> index into `specs`.
    by_prefix: HashMap<String, usize>,
    version: String,
}

fn is_java_identifier(seg: &str) -> bool {
    let mut chars = seg.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

pub fn is_valid_prefix(prefix: &str) -> bool {
    prefix.split('.').all(is_java_identifier)
}

impl Registry {
    /// Validates specs and builds the prefix index. Duplicate prefixes within
    /// one spec are merged; a prefix claimed by two specs is an error.
    pub fn new(specs: Vec<LibrarySpec>, version: impl Into<String>) -> Result<Self, LibIdError> {
        let mut by_prefix = HashMap::new();
        let mut names = HashMap::new();
        for (i, spec) in specs.iter().enumerate() {
            if let Some(prev) = names.insert(spec.canonical_name.clone(), i) {
                return Err(LibIdError::AmbiguousRegistry {
                    prefix: String::new(),
                    first: specs[prev].canonical_name.clone(),
                    second: spec.canonical_name.clone(),
                });
            }
            if spec.package_prefixes.is_empty() && spec.fingerprint.is_none() {
                return Err(LibIdError::InvalidSpec {
                    library: spec.canonical_name.clone(),
                    reason: "needs a package prefix or a fingerprint".into(),
                });
            }
            for prefix in &spec.package_prefixes {
                if !is_valid_prefix(prefix) {
                    return Err(LibIdError::InvalidSpec {
                        library: spec.canonical_name.clone(),
                        reason: format!("invalid package prefix {prefix:?}"),
                    });
                }
                let key = prefix.replace('.', "/");
                match by_prefix.insert(key, i) {
                    Some(prev) if prev != i => {
                        return Err(LibIdError::AmbiguousRegistry {
                            prefix: prefix.clone(),
                            first: specs[prev].canonical_name.clone(),
                            second: spec.canonical_name.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Registry { specs, by_prefix, version: version.into() })
    }

    /// Parses the tab-separated registry format. Fingerprint references are
    /// resolved relative to `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, LibIdError> {
        let mut specs = Vec::new();
        let mut version = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim_end_matches('\r');
            if let Some(meta) = raw.strip_prefix("#%") {
                if let Some(v) = meta.trim().strip_prefix("registry_version=") {
                    version = v.trim().to_owned();
                }
                continue;
            }
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            let name = cols[0];
            if name.is_empty() {
                return Err(LibIdError::RegistrySyntax { line, reason: "empty library name".into() });
            }
            let prefixes: Vec<String> = cols
                .get(1)
                .copied()
                .unwrap_or("")
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty() && *p != "-")
                .map(str::to_owned)
                .collect();
            let fingerprint = match cols.get(2).copied().filter(|c| !c.is_empty() && *c != "-") {
                None => None,
                Some(rel) => {
                    let path = base_dir.map(|b| b.join(rel)).unwrap_or_else(|| rel.into());
                    let bytes = std::fs::read(&path).map_err(|e| LibIdError::RegistrySyntax {
                        line,
                        reason: format!("fingerprint {}: {e}", path.display()),
                    })?;
                    Some(serde_json::from_slice(&bytes).map_err(|e| LibIdError::RegistrySyntax {
                        line,
                        reason: format!("fingerprint {}: {e}", path.display()),
                    })?)
                }
            };
            let notes = cols.get(3).copied().unwrap_or("").to_owned();
            specs.push(LibrarySpec { canonical_name: name.to_owned(), package_prefixes: prefixes, fingerprint, notes });
        }
        Registry::new(specs, version)
    }

    pub fn load(path: &Path) -> Result<Self, LibIdError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LibIdError::RegistrySyntax { line: 0, reason: format!("{}: {e}", path.display()) })?;
        Registry::parse(&text, path.parent())
    }

    /// The shipped registry of the twenty most common libraries.
    pub fn default_top20() -> Self {
        Registry::parse(DEFAULT_REGISTRY, None).expect("shipped registry is valid")
    }

    pub fn specs(&self) -> &[LibrarySpec] {
        &self.specs
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn spec(&self, name: &str) -> Option<&LibrarySpec> {
        self.specs.iter().find(|s| s.canonical_name == name)
    }

    pub fn spec_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.canonical_name == name)
    }

    /// Longest registered prefix containing the class, as (spec index,
    /// slash-form prefix). Prefixes only match at package boundaries.
    pub fn match_prefix<'a>(&'a self, class_descriptor: &'a str) -> Option<(usize, &'a str)> {
        let body = class_descriptor.strip_prefix('L')?.strip_suffix(';')?;
        let mut end = body.rfind('/')?;
        loop {
            let candidate = &body[..end];
            if let Some(&i) = self.by_prefix.get(candidate) {
                return Some((i, candidate));
            }
            end = candidate.rfind('/')?;
        }
    }

    /// Canonical name of the library owning `class_descriptor`, if any.
    pub fn match_library(&self, class_descriptor: &str) -> Option<&str> {
        self.match_prefix(class_descriptor).map(|(i, _)| self.specs[i].canonical_name.as_str())
    }
}
