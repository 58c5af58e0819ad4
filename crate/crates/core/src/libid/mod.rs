//! Library identification: package-prefix matching, fingerprint detection of
//! renamed copies, and partitioning of call edges by who calls whom.

mod fingerprint;
mod registry;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{CallEdge, InvokeKind, MethodRef};

pub use fingerprint::{
    fingerprint_classes, fingerprint_summaries, in_package, normalize_root, similarity, summarize_classes,
    ClassSignature, ClassSummary, LibraryFingerprint, ReturnKind,
};
pub use registry::{is_valid_prefix, LibrarySpec, Registry};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LibIdError {
    #[error("registry is ambiguous: prefix {prefix:?} claimed by both {first} and {second}")]
    AmbiguousRegistry { prefix: String, first: String, second: String },
    #[error("library {library}: {reason}")]
    InvalidSpec { library: String, reason: String },
    #[error("registry line {line}: {reason}")]
    RegistrySyntax { line: usize, reason: String },
    #[error("no classes under package {root:?}")]
    EmptyPackage { root: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "matched_by", rename_all = "lowercase")]
pub enum MatchKind {
    Prefix { prefix: String },
    Fingerprint { root: String, score: f64 },
}

/// Evidence that an app contains a library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryHit {
    pub app_id: String,
    pub canonical_name: String,
    #[serde(flatten)]
    pub matched_by: MatchKind,
}

/// One prefix hit per library found among `classes`, reporting the
/// lexicographically first matching prefix.
pub fn prefix_hits<'a>(
    app_id: &str,
    classes: impl IntoIterator<Item = &'a str>,
    registry: &Registry,
) -> Vec<LibraryHit> {
    let mut found: BTreeSet<(usize, String)> = BTreeSet::new();
    for c in classes {
        if let Some((i, p)) = registry.match_prefix(c) {
            found.insert((i, p.replace('/', ".")));
        }
    }
    let mut seen = BTreeSet::new();
    let mut hits: Vec<LibraryHit> = found
        .into_iter()
        .filter(|(i, _)| seen.insert(*i))
        .map(|(i, prefix)| LibraryHit {
            app_id: app_id.to_owned(),
            canonical_name: registry.specs()[i].canonical_name.clone(),
            matched_by: MatchKind::Prefix { prefix },
        })
        .collect();
    hits.sort_by(|a, b| a.canonical_name.cmp(&b.canonical_name));
    hits
}

/// Every proper package prefix of every class (`com`, `com/a`, `com/a/b` for
/// `Lcom/a/b/C;`).
fn candidate_roots(sorted: &[ClassSummary]) -> BTreeSet<&str> {
    let mut roots = BTreeSet::new();
    for s in sorted {
        let Some(body) = s.descriptor.strip_prefix('L').and_then(|d| d.strip_suffix(';')) else { continue };
        for (i, _) in body.match_indices('/') {
            roots.insert(&body[..i]);
        }
    }
    roots
}

/// Finds renamed copies of fingerprinted libraries among an app's classes.
///
/// Every package prefix is a candidate root. For each fingerprinted spec the
/// best-scoring root at or above `threshold` is reported; ties go to the
/// deepest root.
pub fn detect_obfuscated(
    app_id: &str,
    classes: &[ClassSummary],
    registry: &Registry,
    threshold: f64,
) -> Vec<LibraryHit> {
    let fingerprinted: Vec<(usize, &LibraryFingerprint)> = registry
        .specs()
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.fingerprint.as_ref().map(|f| (i, f)))
        .collect();
    if fingerprinted.is_empty() || classes.is_empty() {
        return Vec::new();
    }
    let mut sorted = classes.to_vec();
    sorted.sort_by(|a, b| a.descriptor.cmp(&b.descriptor));

    // (score, depth, root) of the best candidate per spec
    let mut best: Vec<Option<(f64, usize, String)>> = vec![None; fingerprinted.len()];
    for root in candidate_roots(&sorted) {
        let lead = format!("L{root}/");
        let start = sorted.partition_point(|s| s.descriptor.as_str() < lead.as_str());
        let members = sorted[start..].iter().take_while(|s| s.descriptor.starts_with(&lead));
        let Some(candidate) = fingerprint_summaries(members, root) else { continue };
        let depth = root.matches('/').count();
        for (slot, (_, reference)) in best.iter_mut().zip(&fingerprinted) {
            let score = similarity(&candidate, reference);
            if score < threshold {
                continue;
            }
            let better = match slot {
                None => true,
                Some((s, d, r)) => score > *s || (score == *s && (depth > *d || (depth == *d && root < r.as_str()))),
            };
            if better {
                *slot = Some((score, depth, root.to_owned()));
            }
        }
    }
    let mut hits: Vec<LibraryHit> = best
        .into_iter()
        .zip(&fingerprinted)
        .filter_map(|(slot, (i, _))| {
            slot.map(|(score, _, root)| LibraryHit {
                app_id: app_id.to_owned(),
                canonical_name: registry.specs()[*i].canonical_name.clone(),
                matched_by: MatchKind::Fingerprint { root: root.replace('/', "."), score },
            })
        })
        .collect();
    hits.sort_by(|a, b| a.canonical_name.cmp(&b.canonical_name));
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Resolved<'a> {
    spec: usize,
    fingerprint_root: Option<&'a str>,
}

/// Per-app view of the registry extended with fingerprint-detected roots.
#[derive(Debug, Clone)]
pub struct LibraryResolver<'r> {
    registry: &'r Registry,
    /// Slash-form root -> spec index.
    roots: Vec<(String, usize)>,
}

impl<'r> LibraryResolver<'r> {
    pub fn new(registry: &'r Registry) -> Self {
        LibraryResolver { registry, roots: Vec::new() }
    }

    pub fn with_hits(registry: &'r Registry, hits: &[LibraryHit]) -> Self {
        let mut roots: Vec<(String, usize)> = hits
            .iter()
            .filter_map(|h| match &h.matched_by {
                MatchKind::Fingerprint { root, .. } => {
                    registry.spec_index(&h.canonical_name).map(|i| (normalize_root(root), i))
                }
                MatchKind::Prefix { .. } => None,
            })
            .collect();
        roots.sort();
        roots.dedup();
        LibraryResolver { registry, roots }
    }

    fn resolve<'a>(&'a self, class_descriptor: &'a str) -> Option<Resolved<'a>> {
        let by_prefix = self.registry.match_prefix(class_descriptor);
        let by_root = self
            .roots
            .iter()
            .filter(|(r, _)| in_package(class_descriptor, r))
            .max_by_key(|(r, _)| r.len());
        match (by_prefix, by_root) {
            (Some((i, p)), Some((r, j))) => Some(if r.len() > p.len() {
                Resolved { spec: *j, fingerprint_root: Some(r) }
            } else {
                Resolved { spec: i, fingerprint_root: None }
            }),
            (Some((i, _)), None) => Some(Resolved { spec: i, fingerprint_root: None }),
            (None, Some((r, j))) => Some(Resolved { spec: *j, fingerprint_root: Some(r) }),
            (None, None) => None,
        }
    }

    pub fn library_of(&self, class_descriptor: &str) -> Option<&'r str> {
        self.resolve(class_descriptor).map(|r| self.registry.specs()[r.spec].canonical_name.as_str())
    }

    /// Canonical names of all libraries owning any of `classes`.
    pub fn libraries_in<'a>(&self, classes: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
        classes.into_iter().filter_map(|c| self.library_of(c)).map(str::to_owned).collect()
    }
}

/// An app-to-library call with the callee attributed to its library.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LibCall {
    pub app_id: String,
    pub library: String,
    pub caller_class: String,
    /// Callee, with fingerprint-detected package names rewritten to the
    /// library's first registered prefix.
    pub method: MethodRef,
    pub invoke_kind: InvokeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeSplit {
    pub app_to_lib: Vec<LibCall>,
    pub lib_to_lib: Vec<CallEdge>,
    pub app_internal: Vec<CallEdge>,
}

fn rewrite_root(descriptor: &str, from: &str, to: &str) -> String {
    let dims = descriptor.len() - descriptor.trim_start_matches('[').len();
    let (arr, elem) = descriptor.split_at(dims);
    match elem.strip_prefix('L').and_then(|e| e.strip_prefix(from)) {
        Some(rest) if rest.starts_with('/') => format!("{arr}L{to}{rest}"),
        _ => descriptor.to_owned(),
    }
}

/// Partitions edges: app-to-library when only the callee belongs to a
/// library, library-to-library when both ends do (including a library
/// calling itself), app-internal otherwise.
pub fn split_edges(edges: &[CallEdge], resolver: &LibraryResolver<'_>) -> EdgeSplit {
    let mut out = EdgeSplit::default();
    for edge in edges {
        let callee = resolver.resolve(&edge.callee.class_descriptor);
        let caller = resolver.resolve(&edge.caller_class);
        match (caller, callee) {
            (None, Some(r)) => {
                let spec = &resolver.registry.specs()[r.spec];
                let mut method = edge.callee.clone();
                if let (Some(root), Some(prefix)) = (r.fingerprint_root, spec.package_prefixes.first()) {
                    let to = prefix.replace('.', "/");
                    method.class_descriptor = rewrite_root(&method.class_descriptor, root, &to);
                    for p in &mut method.param_descriptors {
                        *p = rewrite_root(p, root, &to);
                    }
                    method.return_descriptor = rewrite_root(&method.return_descriptor, root, &to);
                }
                out.app_to_lib.push(LibCall {
                    app_id: edge.app_id.clone(),
                    library: spec.canonical_name.clone(),
                    caller_class: edge.caller_class.clone(),
                    method,
                    invoke_kind: edge.invoke_kind,
                });
            }
            (Some(_), Some(_)) => out.lib_to_lib.push(edge.clone()),
            _ => out.app_internal.push(edge.clone()),
        }
    }
    out
}
