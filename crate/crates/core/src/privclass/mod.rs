//! Privacy classification of working-API methods.

mod category;
mod heuristic;
mod rules;

use serde::{Deserialize, Serialize};

use crate::apirecon::WorkingApi;
use crate::model::MethodRef;

pub use category::PrivacyCategory;
pub use heuristic::{heuristic_suggest, tokenize};
pub use rules::{classify, Classification, ClassifiedApi, Matcher, PrivacyRule, RuleSource, Ruleset};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrivClassError {
    #[error("ruleset line {line}: {reason}")]
    RuleSyntax { line: usize, reason: String },
    #[error("conflicting overrides for {library} {method}: `{first}` vs `{second}`")]
    ConflictingOverrides { library: String, method: String, first: String, second: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub method: MethodRef,
    pub category: PrivacyCategory,
    pub confidence: f64,
}

/// Heuristic suggestions for the methods of `api` that no rule classifies.
pub fn suggest_for_library(api: &WorkingApi, classified: &ClassifiedApi) -> Vec<Suggestion> {
    let methods = classified.libraries.get(&api.library);
    api.entries
        .keys()
        .filter(|m| methods.and_then(|ms| ms.get(*m)).is_none_or(|c| c.rule.is_none()))
        .filter_map(|m| match heuristic_suggest(m) {
            (Some(category), confidence) => Some(Suggestion { method: m.clone(), category, confidence }),
            (None, _) => None,
        })
        .collect()
}

/// Renders suggestions as a ruleset fragment for human review. Each rule is
/// pinned to its exact name and descriptor. No suggestions give an empty
/// fragment.
pub fn render_fragment(library: &str, suggestions: &[Suggestion]) -> String {
    if suggestions.is_empty() {
        return String::new();
    }
    let mut out = format!("# Suggested rules for {library}; review before merging.\n");
    for s in suggestions {
        let rule = PrivacyRule {
            library: Some(library.to_owned()),
            method: Matcher::Exact(s.method.method_name.clone()),
            descriptor: Some(Matcher::Exact(s.method.descriptor())),
            category: Some(s.category),
            source: RuleSource::Heuristic,
            note: format!("confidence={:.2}", s.confidence),
        };
        out.push_str(&rule.to_line());
        out.push('\n');
    }
    out
}
