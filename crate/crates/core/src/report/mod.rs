//! Corpus statistics over analyzed apps.
//!
//! Each statistic is a per-app reduction folded into a [`Tally`]; tallies
//! merge associatively, so any partition of the corpus gives the same totals.

mod fixture;
mod render;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::apirecon::WorkingApis;
use crate::ingest::{CorpusManifest, InstallBucket, CANONICAL_BUCKETS};
use crate::libid::{LibCall, LibraryHit};
use crate::privclass::{ClassifiedApi, PrivacyCategory};

pub use fixture::{PermissionFixture, PermissionRow};
pub use render::{render, Format, ReportBundle, RunMetadata};

pub const OTHER_ROW: &str = "Other";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("permission fixture line {line}: {reason}")]
    FixtureSyntax { line: usize, reason: String },
    #[error("permission fixture {path} is missing")]
    MissingFixture { path: String },
}

/// One app after library identification and edge splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppAnalysis {
    pub app_id: String,
    pub install_bucket: InstallBucket,
    /// Canonical names of libraries the app contains.
    pub libraries: BTreeSet<String>,
    pub hits: Vec<LibraryHit>,
    pub calls: Vec<LibCall>,
    /// Library-to-library edges, kept only as a count; they never reach leak
    /// statistics.
    pub lib_to_lib_edges: u64,
    pub app_internal_edges: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LeakCallKey {
    pub app_id: String,
    pub library: String,
    pub category: PrivacyCategory,
}

/// Distinct leak keys of one app. Repeated call sites and repeated methods of
/// the same category to the same library collapse to one key.
pub fn leak_keys(app: &AppAnalysis, classified: &ClassifiedApi) -> BTreeSet<LeakCallKey> {
    app.calls
        .iter()
        .filter_map(|c| {
            classified.category_of(&c.library, &c.method).map(|category| LeakCallKey {
                app_id: app.app_id.clone(),
                library: c.library.clone(),
                category,
            })
        })
        .collect()
}

/// Mergeable corpus counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total_apps: u64,
    pub unknown_install_apps: u64,
    pub known_install_weight: u64,
    pub lib_to_lib_edges: u64,
    pub bucket_apps: BTreeMap<u64, u64>,
    pub bucket_keys: BTreeMap<u64, u64>,
    pub library_apps: BTreeMap<String, u64>,
    /// Apps containing at least one library outside the top set.
    pub other_apps: u64,
    pub category_apps: BTreeMap<PrivacyCategory, u64>,
    pub category_weight: BTreeMap<PrivacyCategory, u64>,
    pub library_category_apps: BTreeMap<(String, PrivacyCategory), u64>,
}

impl Tally {
    /// Tally of a single app. `top` is the set of libraries shown on their
    /// own market-share rows.
    pub fn of_app(app: &AppAnalysis, classified: &ClassifiedApi, top: &BTreeSet<String>) -> Tally {
        let keys = leak_keys(app, classified);
        let mut t = Tally { total_apps: 1, lib_to_lib_edges: app.lib_to_lib_edges, ..Tally::default() };
        let weight = app.install_bucket.lower_bound();
        match weight {
            Some(b) => {
                t.known_install_weight = b;
                t.bucket_apps.insert(b, 1);
                t.bucket_keys.insert(b, keys.len() as u64);
            }
            None => t.unknown_install_apps = 1,
        }
        for lib in &app.libraries {
            t.library_apps.insert(lib.clone(), 1);
        }
        if app.libraries.iter().any(|l| !top.contains(l)) {
            t.other_apps = 1;
        }
        let categories: BTreeSet<PrivacyCategory> = keys.iter().map(|k| k.category).collect();
        for c in categories {
            t.category_apps.insert(c, 1);
            if let Some(w) = weight {
                t.category_weight.insert(c, w);
            }
        }
        for k in keys {
            t.library_category_apps.insert((k.library, k.category), 1);
        }
        t
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        fn add<K: Ord>(into: &mut BTreeMap<K, u64>, from: BTreeMap<K, u64>) {
            for (k, v) in from {
                *into.entry(k).or_default() += v;
            }
        }
        self.total_apps += other.total_apps;
        self.unknown_install_apps += other.unknown_install_apps;
        self.known_install_weight += other.known_install_weight;
        self.lib_to_lib_edges += other.lib_to_lib_edges;
        self.other_apps += other.other_apps;
        add(&mut self.bucket_apps, other.bucket_apps);
        add(&mut self.bucket_keys, other.bucket_keys);
        add(&mut self.library_apps, other.library_apps);
        add(&mut self.category_apps, other.category_apps);
        add(&mut self.category_weight, other.category_weight);
        add(&mut self.library_category_apps, other.library_category_apps);
        self
    }

    pub fn from_apps(apps: &[AppAnalysis], classified: &ClassifiedApi, top: &BTreeSet<String>) -> Tally {
        apps.iter().map(|a| Tally::of_app(a, classified, top)).fold(Tally::default(), Tally::merge)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketShare {
    pub library: String,
    pub app_count: u64,
    pub pct_of_corpus: f64,
}

/// Apps per library, descending by count (ties by name). Libraries outside
/// `top` fold into one "Other" row counting distinct apps.
pub fn market_share(tally: &Tally, top: &BTreeSet<String>) -> Vec<MarketShare> {
    let mut rows: Vec<MarketShare> = tally
        .library_apps
        .iter()
        .filter(|(lib, n)| top.contains(*lib) && **n > 0)
        .map(|(lib, &n)| MarketShare { library: lib.clone(), app_count: n, pct_of_corpus: ratio(n, tally.total_apps) })
        .collect();
    rows.sort_by(|a, b| b.app_count.cmp(&a.app_count).then_with(|| a.library.cmp(&b.library)));
    if tally.other_apps > 0 {
        rows.push(MarketShare {
            library: OTHER_ROW.into(),
            app_count: tally.other_apps,
            pct_of_corpus: ratio(tally.other_apps, tally.total_apps),
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryUsage {
    pub category: PrivacyCategory,
    pub apps_making_call: u64,
    pub pct_of_apps: f64,
    pub installs_weight: u64,
    pub pct_of_installs: f64,
}

/// One row per category, in table order. Apps with unknown installs count
/// towards `pct_of_apps` but are left out of both sides of `pct_of_installs`.
pub fn category_usage(tally: &Tally) -> Vec<CategoryUsage> {
    PrivacyCategory::ALL
        .into_iter()
        .map(|category| {
            let apps = tally.category_apps.get(&category).copied().unwrap_or(0);
            let weight = tally.category_weight.get(&category).copied().unwrap_or(0);
            CategoryUsage {
                category,
                apps_making_call: apps,
                pct_of_apps: ratio(apps, tally.total_apps),
                installs_weight: weight,
                pct_of_installs: ratio(weight, tally.known_install_weight),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketProfile {
    pub bucket: u64,
    pub app_count: u64,
    pub leak_keys: u64,
    pub mean_keys_per_app: f64,
}

/// Mean distinct leak keys per app for each canonical bucket holding at
/// least one app, ascending. Second value: canonical buckets with no apps.
pub fn bucket_profile(tally: &Tally) -> (Vec<BucketProfile>, Vec<u64>) {
    let mut rows = Vec::new();
    let mut empty = Vec::new();
    for b in CANONICAL_BUCKETS {
        match tally.bucket_apps.get(&b).copied().unwrap_or(0) {
            0 => empty.push(b),
            n => {
                let keys = tally.bucket_keys.get(&b).copied().unwrap_or(0);
                rows.push(BucketProfile { bucket: b, app_count: n, leak_keys: keys, mean_keys_per_app: ratio(keys, n) });
            }
        }
    }
    (rows, empty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryColumn {
    pub library: String,
    pub apps_containing: u64,
    /// Indexed like [`PrivacyCategory::ALL`]. `None` when the library's
    /// classified API has no method of that category.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerLibraryTable {
    pub columns: Vec<LibraryColumn>,
    /// Requested libraries contained in no app.
    pub omitted: Vec<String>,
}

/// Category x library matrix: apps making at least one call of the category
/// to the library over apps containing the library. Columns keep the order
/// of `libraries`.
pub fn per_library_table(tally: &Tally, classified: &ClassifiedApi, libraries: &[String]) -> PerLibraryTable {
    let mut table = PerLibraryTable::default();
    for lib in libraries {
        let den = tally.library_apps.get(lib).copied().unwrap_or(0);
        if den == 0 {
            table.omitted.push(lib.clone());
            continue;
        }
        let exposed: BTreeSet<PrivacyCategory> = classified
            .libraries
            .get(lib)
            .map(|ms| ms.values().filter_map(|c| c.category).collect())
            .unwrap_or_default();
        let cells = PrivacyCategory::ALL
            .into_iter()
            .map(|c| {
                exposed.contains(&c).then(|| {
                    ratio(tally.library_category_apps.get(&(lib.clone(), c)).copied().unwrap_or(0), den)
                })
            })
            .collect();
        table.columns.push(LibraryColumn { library: lib.clone(), apps_containing: den, cells });
    }
    table
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, ReportError> {
    if x.len() != y.len() {
        return Err(ReportError::DegenerateInput(format!("lengths differ ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(ReportError::DegenerateInput(format!("need at least 2 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ReportError::DegenerateInput("non-finite value".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(ReportError::DegenerateInput("constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstallHistogram {
    pub counts: BTreeMap<u64, u64>,
    pub unknown: u64,
}

/// Apps per install bucket, straight from the manifest.
pub fn corpus_summary(manifest: &CorpusManifest) -> InstallHistogram {
    let mut h = InstallHistogram::default();
    for app in &manifest.apps {
        match app.install_bucket {
            InstallBucket::Known(b) => *h.counts.entry(b).or_default() += 1,
            InstallBucket::Unknown => h.unknown += 1,
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub library: String,
    pub permissions: u32,
    pub fixture_api_calls: u32,
    pub corpus_privacy_methods: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rows: Vec<CorrelationRow>,
    /// Permissions vs the fixture's API-call counts.
    pub fixture_r: Option<f64>,
    pub fixture_note: Option<String>,
    /// Permissions vs privacy-related methods found in this corpus.
    pub corpus_r: Option<f64>,
    pub corpus_note: Option<String>,
}

fn split_result(r: Result<f64, ReportError>) -> (Option<f64>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

pub fn correlation(fixture: &PermissionFixture, classified: &ClassifiedApi) -> Correlation {
    let rows: Vec<CorrelationRow> = fixture
        .rows
        .iter()
        .map(|r| CorrelationRow {
            library: r.library.clone(),
            permissions: r.permissions,
            fixture_api_calls: r.api_calls,
            corpus_privacy_methods: classified.privacy_method_count(&r.library) as u64,
        })
        .collect();
    let perms: Vec<f64> = rows.iter().map(|r| r.permissions as f64).collect();
    let paper: Vec<f64> = rows.iter().map(|r| r.fixture_api_calls as f64).collect();
    let corpus: Vec<f64> = rows.iter().map(|r| r.corpus_privacy_methods as f64).collect();
    let (fixture_r, fixture_note) = split_result(pearson(&perms, &paper));
    let (corpus_r, corpus_note) = split_result(pearson(&perms, &corpus));
    Correlation { rows, fixture_r, fixture_note, corpus_r, corpus_note }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSizeRow {
    pub library: String,
    pub distinct_methods: u64,
    pub privacy_methods: u64,
    pub unclassified_methods: u64,
}

pub fn api_size_rows(apis: &WorkingApis, classified: &ClassifiedApi) -> Vec<ApiSizeRow> {
    apis.keys()
        .map(|lib| {
            let (c, n) = classified.coverage(lib);
            ApiSizeRow {
                library: lib.clone(),
                distinct_methods: apis[lib].distinct_method_count() as u64,
                privacy_methods: c as u64,
                unclassified_methods: n as u64,
            }
        })
        .collect()
}
