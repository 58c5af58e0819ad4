//! Rename-invariant structural fingerprints.
//!
//! A class is summarised by the sorted multiset of `(parameter count, coarse
//! return kind)` over the methods it defines, plus the string constants its
//! code loads. None of this depends on class, method or package names, so a
//! library re-packaged under a different name keeps its fingerprint.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::LibIdError;
use crate::dex::{extract::const_string_indices, DexFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    Void,
    Primitive,
    Object,
    Array,
}

impl ReturnKind {
    pub fn of(descriptor: &str) -> Self {
        match descriptor.as_bytes().first() {
            Some(b'V') => ReturnKind::Void,
            Some(b'L') => ReturnKind::Object,
            Some(b'[') => ReturnKind::Array,
            _ => ReturnKind::Primitive,
        }
    }
}

/// Sorted `(parameter count, return kind)` pairs of one class.
pub type ClassSignature = Vec<(u16, ReturnKind)>;

/// Name-free summary of one defined class, kept in the scan cache.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassSummary {
    pub descriptor: String,
    pub signature: ClassSignature,
    pub strings: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryFingerprint {
    pub class_signatures: BTreeSet<ClassSignature>,
    pub anchor_strings: BTreeSet<String>,
}

/// Summaries of every class defined in `dex`, in class-table order.
pub fn summarize_classes(dex: &DexFile) -> Vec<ClassSummary> {
    dex.classes
        .iter()
        .map(|class| {
            let mut signature: ClassSignature = class
                .methods
                .iter()
                .filter_map(|m| {
                    let id = dex.method_refs.get(m.method_idx as usize)?;
                    let proto = &dex.protos[id.proto_idx as usize];
                    let params = u16::try_from(proto.param_descriptors.len()).unwrap_or(u16::MAX);
                    Some((params, ReturnKind::of(&proto.return_descriptor)))
                })
                .collect();
            signature.sort_unstable();
            let strings = class
                .methods
                .iter()
                .filter_map(|m| m.code.as_deref())
                .flat_map(const_string_indices)
                .filter_map(|i| dex.strings.get(i as usize).cloned())
                .collect();
            ClassSummary { descriptor: class.descriptor.clone(), signature, strings }
        })
        .collect()
}

/// Normalises `com.foo`, `com/foo`, `Lcom/foo/` to the slash form `com/foo`.
pub fn normalize_root(root: &str) -> String {
    root.trim()
        .trim_start_matches('L')
        .trim_end_matches(';')
        .trim_matches('/')
        .replace('.', "/")
}

/// True when the class descriptor lies inside package `root` (slash form).
pub fn in_package(descriptor: &str, root: &str) -> bool {
    descriptor
        .strip_prefix('L')
        .and_then(|d| d.strip_prefix(root))
        .is_some_and(|rest| rest.starts_with('/'))
}

/// Fingerprint over the summaries whose class lies under `root`.
pub fn fingerprint_summaries<'a>(
    summaries: impl IntoIterator<Item = &'a ClassSummary>,
    root: &str,
) -> Option<LibraryFingerprint> {
    let root = normalize_root(root);
    let mut fp = LibraryFingerprint::default();
    let mut any = false;
    for s in summaries.into_iter().filter(|s| in_package(&s.descriptor, &root)) {
        any = true;
        fp.class_signatures.insert(s.signature.clone());
        fp.anchor_strings.extend(s.strings.iter().cloned());
    }
    any.then_some(fp)
}

/// Fingerprints every class of `dex` under `package_root`.
pub fn fingerprint_classes(dex: &DexFile, package_root: &str) -> Result<LibraryFingerprint, LibIdError> {
    fingerprint_summaries(&summarize_classes(dex), package_root)
        .ok_or_else(|| LibIdError::EmptyPackage { root: package_root.to_owned() })
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Mean of class-signature and anchor-string Jaccard indices; the
/// class-signature index alone when neither side has anchor strings.
pub fn similarity(a: &LibraryFingerprint, b: &LibraryFingerprint) -> f64 {
    let classes = jaccard(&a.class_signatures, &b.class_signatures);
    if a.anchor_strings.is_empty() && b.anchor_strings.is_empty() {
        classes
    } else {
        (classes + jaccard(&a.anchor_strings, &b.anchor_strings)) / 2.0
    }
}
