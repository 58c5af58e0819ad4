use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PrivClassError, PrivacyCategory};
use crate::apirecon::WorkingApis;
use crate::model::MethodRef;

const SHIPPED_RULES: &str = include_str!("../../data/rules.tsv");

/// Rule provenance, lowest precedence first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleSource {
    Heuristic,
    Shipped,
    Override,
}

impl RuleSource {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleSource::Heuristic => "heuristic",
            RuleSource::Shipped => "shipped",
            RuleSource::Override => "override",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [RuleSource::Heuristic, RuleSource::Shipped, RuleSource::Override]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

/// Exact string or a `*`-anchored glob (`set*`, `*Gender`, `*gender*`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Matcher {
    Exact(String),
    Prefix(String),
    Suffix(String),
    Contains(String),
}

impl Matcher {
    pub fn parse(s: &str) -> Result<Self, String> {
        let (lead, trail) = (s.starts_with('*'), s.ends_with('*') && s.len() > 1);
        let inner = s.trim_start_matches('*').trim_end_matches('*');
        if inner.contains('*') {
            return Err(format!("wildcard only allowed at the ends: {s:?}"));
        }
        if inner.is_empty() {
            return Err(format!("empty matcher {s:?}"));
        }
        Ok(match (lead, trail) {
            (false, false) => Matcher::Exact(inner.into()),
            (false, true) => Matcher::Prefix(inner.into()),
            (true, false) => Matcher::Suffix(inner.into()),
            (true, true) => Matcher::Contains(inner.into()),
        })
    }

    pub fn matches(&self, s: &str) -> bool {
        match self {
            Matcher::Exact(p) => s == p,
            Matcher::Prefix(p) => s.starts_with(p.as_str()),
            Matcher::Suffix(p) => s.ends_with(p.as_str()),
            Matcher::Contains(p) => s.contains(p.as_str()),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Matcher::Exact(_))
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Matcher::Exact(p) => write!(f, "{p}"),
            Matcher::Prefix(p) => write!(f, "{p}*"),
            Matcher::Suffix(p) => write!(f, "*{p}"),
            Matcher::Contains(p) => write!(f, "*{p}*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyRule {
    /// Canonical library name; `None` is the `*` wildcard.
    pub library: Option<String>,
    pub method: Matcher,
    pub descriptor: Option<Matcher>,
    /// `None` marks a method explicitly as not privacy related.
    pub category: Option<PrivacyCategory>,
    pub source: RuleSource,
    pub note: String,
}

impl PrivacyRule {
    fn matches(&self, library: &str, method: &MethodRef) -> bool {
        self.library.as_deref().is_none_or(|l| l == library)
            && self.method.matches(&method.method_name)
            && self.descriptor.as_ref().is_none_or(|d| d.matches(&method.descriptor()))
    }

    /// Exact name beats a pattern; then a named library beats `*`; then a
    /// descriptor constraint beats none.
    fn specificity(&self) -> (bool, bool, bool) {
        (self.method.is_exact(), self.library.is_some(), self.descriptor.is_some())
    }

    /// One line of the ruleset file format.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.library.as_deref().unwrap_or("*"),
            self.method,
            self.descriptor.as_ref().map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
            self.category.map(|c| c.as_str()).unwrap_or("None"),
            self.source.as_str(),
            self.note
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ruleset {
    pub rules: Vec<PrivacyRule>,
}

impl Ruleset {
    /// Parses the ruleset format. With `force_source`, every rule takes that
    /// source regardless of its source column (used for override files).
    pub fn parse(text: &str, force_source: Option<RuleSource>) -> Result<Self, PrivClassError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            let err = |reason: String| PrivClassError::RuleSyntax { line, reason };
            if cols.len() < 4 {
                return Err(err(format!("expected at least 4 tab-separated fields, got {}", cols.len())));
            }
            let library = match cols[0] {
                "" => return Err(err("empty library scope".into())),
                "*" => None,
                l => Some(l.to_owned()),
            };
            let method = Matcher::parse(cols[1]).map_err(err)?;
            let descriptor = match cols[2] {
                "" | "-" => None,
                d => Some(Matcher::parse(d).map_err(err)?),
            };
            let category = match cols[3] {
                "None" | "none" | "-" => None,
                c => Some(c.parse().map_err(err)?),
            };
            let source = match force_source {
                Some(s) => s,
                None => match cols.get(4).copied().filter(|s| !s.is_empty()) {
                    None => RuleSource::Shipped,
                    Some(s) => RuleSource::parse(s).ok_or_else(|| err(format!("unknown rule source {s:?}")))?,
                },
            };
            let note = cols.get(5).copied().unwrap_or("").to_owned();
            rules.push(PrivacyRule { library, method, descriptor, category, source, note });
        }
        Ok(Ruleset { rules })
    }

    pub fn load(path: &Path, force_source: Option<RuleSource>) -> Result<Self, PrivClassError> {
        let text = std::fs::read_to_string(path).map_err(|e| PrivClassError::RuleSyntax {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Ruleset::parse(&text, force_source)
    }

    /// The shipped ruleset covering the top-20 libraries.
    pub fn shipped() -> Self {
        Ruleset::parse(SHIPPED_RULES, None).expect("shipped ruleset is valid")
    }

    /// Appends user overrides, forcing them to override precedence.
    pub fn with_overrides(mut self, overrides: Ruleset) -> Self {
        self.rules.extend(overrides.rules.into_iter().map(|mut r| {
            r.source = RuleSource::Override;
            r
        }));
        self
    }

    /// Winning rule for one method, by (source, specificity, declaration order).
    pub fn resolve(&self, library: &str, method: &MethodRef) -> Result<Option<usize>, PrivClassError> {
        let matching: Vec<usize> =
            (0..self.rules.len()).filter(|&i| self.rules[i].matches(library, method)).collect();
        let key = |i: usize| (self.rules[i].source, self.rules[i].specificity());
        // max_by keeps the last maximum, so compare indices reversed to keep the first.
        let Some(best) = matching.iter().copied().max_by(|&a, &b| key(a).cmp(&key(b)).then(b.cmp(&a))) else {
            return Ok(None);
        };
        let win = &self.rules[best];
        if win.source == RuleSource::Override {
            if let Some(&other) =
                matching.iter().find(|&&i| i != best && key(i) == key(best) && self.rules[i].category != win.category)
            {
                return Err(PrivClassError::ConflictingOverrides {
                    library: library.to_owned(),
                    method: method.to_string(),
                    first: win.to_line(),
                    second: self.rules[other].to_line(),
                });
            }
        }
        Ok(Some(best))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub category: Option<PrivacyCategory>,
    /// Index of the winning rule in the ruleset, if any matched.
    pub rule: Option<usize>,
    pub source: Option<RuleSource>,
}

/// Every working-API method with its resolved category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedApi {
    pub libraries: BTreeMap<String, BTreeMap<MethodRef, Classification>>,
}

impl ClassifiedApi {
    pub fn category_of(&self, library: &str, method: &MethodRef) -> Option<PrivacyCategory> {
        self.libraries.get(library)?.get(method)?.category
    }

    /// (classified, unclassified) method counts for one library.
    pub fn coverage(&self, library: &str) -> (usize, usize) {
        let Some(methods) = self.libraries.get(library) else { return (0, 0) };
        let classified = methods.values().filter(|c| c.category.is_some()).count();
        (classified, methods.len() - classified)
    }

    /// Number of distinct privacy-related methods in a library's working API.
    pub fn privacy_method_count(&self, library: &str) -> usize {
        self.coverage(library).0
    }
}

/// Resolves a category for every method of every working API.
pub fn classify(apis: &WorkingApis, ruleset: &Ruleset) -> Result<ClassifiedApi, PrivClassError> {
    let mut out = ClassifiedApi::default();
    for (library, api) in apis {
        let methods = out.libraries.entry(library.clone()).or_default();
        for method in api.entries.keys() {
            let rule = ruleset.resolve(library, method)?;
            let (category, source) = match rule {
                Some(i) => (ruleset.rules[i].category, Some(ruleset.rules[i].source)),
                None => (None, None),
            };
            methods.insert(method.clone(), Classification { category, rule, source });
        }
    }
    Ok(out)
}
