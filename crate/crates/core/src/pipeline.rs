//! End-to-end stages shared by the command-line driver and the tests:
//! scanning sources (with an optional cache), per-app analysis and report
//! assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::apirecon::{ApiAccumulator, WorkingApis};
use crate::dex::{extract_call_edges, parse_dex};
use crate::ingest::{
    parse_call_log, unpack_bytes, AppRecord, CorpusManifest, IndexEntry, IngestError, RawEdge, ScanCache, ScanIndex,
    ScanRecord, ScanStatus,
};
use crate::libid::{detect_obfuscated, prefix_hits, split_edges, summarize_classes, LibraryResolver, Registry};
use crate::privclass::{classify, ClassifiedApi, PrivClassError, Ruleset};
use crate::report::{AppAnalysis, PermissionFixture, ReportBundle, RunMetadata};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Classify(#[from] PrivClassError),
    #[error("scan cache is missing {0}; run `scan` first")]
    MissingCache(String),
    #[error("unknown library {0:?}")]
    UnknownLibrary(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Runs `f` on a pool of `workers` threads. Results never depend on the
/// count; only scheduling does.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Scans one source image: a DEX file, a zip container of DEX files, or a
/// plain-text call log. Errors describe why the source could not be parsed.
pub fn scan_bytes(bytes: Vec<u8>, path: &Path) -> Result<ScanRecord, String> {
    let looks_binary = bytes.starts_with(b"dex\n") || bytes.starts_with(b"PK");
    if !looks_binary {
        let edges = parse_call_log(bytes.as_slice(), "").map_err(|e| e.to_string())?;
        return Ok(ScanRecord { edges: edges.iter().map(RawEdge::from_edge).collect(), ..ScanRecord::default() });
    }
    let images = unpack_bytes(bytes, path).map_err(|e| e.to_string())?;
    let mut record = ScanRecord::default();
    for (i, image) in images.iter().enumerate() {
        let dex = parse_dex(image).map_err(|e| format!("dex image {i}: {e}"))?;
        let extraction = extract_call_edges(&dex, "");
        record.edges.extend(extraction.edges.iter().map(RawEdge::from_edge));
        record.diagnostics.extend(dex.diagnostics.iter().cloned());
        record.diagnostics.extend(extraction.diagnostics);
        record.classes.extend(summarize_classes(&dex));
    }
    Ok(record)
}

pub fn resolve_source(base: &Path, source: &str) -> PathBuf {
    let p = Path::new(source);
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

/// Result of scanning one app.
#[derive(Debug, Clone, PartialEq)]
pub struct AppScan {
    pub entry: IndexEntry,
    pub record: Option<ScanRecord>,
}

fn scan_app(app: &AppRecord, base: &Path, cache: Option<&ScanCache>) -> Result<AppScan, PipelineError> {
    let path = resolve_source(base, &app.source);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => {
            log::warn!("{}: skipped, cannot read {}: {e}", app.app_id, path.display());
            return Ok(AppScan {
                entry: IndexEntry { status: ScanStatus::Skipped, digest: None, message: Some(e.to_string()) },
                record: None,
            });
        }
    };
    let key = ScanCache::key_for(&bytes);
    if let Some(cache) = cache {
        if let Some(record) = cache.get(&key)? {
            return Ok(AppScan {
                entry: IndexEntry { status: ScanStatus::Ok, digest: Some(key), message: None },
                record: Some(record),
            });
        }
    }
    match scan_bytes(bytes, &path) {
        Ok(record) => {
            if let Some(cache) = cache {
                cache.put(&key, &record)?;
            }
            Ok(AppScan {
                entry: IndexEntry { status: ScanStatus::Ok, digest: Some(key), message: None },
                record: Some(record),
            })
        }
        Err(message) => {
            log::error!("{}: {message}", app.app_id);
            Ok(AppScan {
                entry: IndexEntry { status: ScanStatus::Failed, digest: Some(key), message: Some(message) },
                record: None,
            })
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanOutcome {
    pub index: ScanIndex,
    pub records: BTreeMap<String, ScanRecord>,
}

impl ScanOutcome {
    pub fn ids_with(&self, status: ScanStatus) -> Vec<String> {
        self.index.entries.iter().filter(|(_, e)| e.status == status).map(|(k, _)| k.clone()).collect()
    }
}

/// Scans every app of the manifest. Relative sources resolve against `base`.
/// With a cache, records are stored and reused by content digest and the
/// index is rewritten.
pub fn scan_corpus(
    manifest: &CorpusManifest,
    base: &Path,
    cache: Option<&ScanCache>,
    workers: usize,
) -> Result<ScanOutcome, PipelineError> {
    let scans: Vec<Result<AppScan, PipelineError>> =
        with_workers(workers, || manifest.apps.par_iter().map(|a| scan_app(a, base, cache)).collect())?;
    let mut out = ScanOutcome::default();
    for (app, scan) in manifest.apps.iter().zip(scans) {
        let scan = scan?;
        if let Some(record) = scan.record {
            out.records.insert(app.app_id.clone(), record);
        }
        out.index.entries.insert(app.app_id.clone(), scan.entry);
    }
    if let Some(cache) = cache {
        cache.store_index(&out.index)?;
    }
    Ok(out)
}

/// Reloads a previous scan of `manifest` from the cache.
pub fn load_scan(manifest: &CorpusManifest, cache: &ScanCache) -> Result<ScanOutcome, PipelineError> {
    let index = cache.load_index()?.ok_or_else(|| PipelineError::MissingCache(cache.index_path().display().to_string()))?;
    let mut out = ScanOutcome::default();
    for app in &manifest.apps {
        let entry = index
            .entries
            .get(&app.app_id)
            .ok_or_else(|| PipelineError::MissingCache(format!("index entry for app {}", app.app_id)))?;
        if entry.status == ScanStatus::Ok {
            let key = entry.digest.as_deref().unwrap_or_default();
            let record = cache
                .get(key)?
                .ok_or_else(|| PipelineError::MissingCache(format!("object {key} for app {}", app.app_id)))?;
            out.records.insert(app.app_id.clone(), record);
        }
        out.index.entries.insert(app.app_id.clone(), entry.clone());
    }
    Ok(out)
}

/// Identifies libraries in one app and splits its edges.
pub fn analyze_app(app: &AppRecord, record: &ScanRecord, registry: &Registry, threshold: f64) -> AppAnalysis {
    let mut classes: BTreeSet<&str> = record.classes.iter().map(|c| c.descriptor.as_str()).collect();
    for e in &record.edges {
        classes.insert(&e.caller_class);
        classes.insert(&e.callee.class_descriptor);
    }
    let mut hits = prefix_hits(&app.app_id, classes.iter().copied(), registry);
    hits.extend(detect_obfuscated(&app.app_id, &record.classes, registry, threshold));
    let resolver = LibraryResolver::with_hits(registry, &hits);
    let split = split_edges(&record.call_edges(&app.app_id), &resolver);
    AppAnalysis {
        app_id: app.app_id.clone(),
        install_bucket: app.install_bucket,
        libraries: resolver.libraries_in(classes.iter().copied()),
        hits,
        calls: split.app_to_lib,
        lib_to_lib_edges: split.lib_to_lib.len() as u64,
        app_internal_edges: split.app_internal.len() as u64,
    }
}

/// Analyzes every scanned app, in manifest order.
pub fn analyze_corpus(
    manifest: &CorpusManifest,
    records: &BTreeMap<String, ScanRecord>,
    registry: &Registry,
    threshold: f64,
    workers: usize,
) -> Result<Vec<AppAnalysis>, PipelineError> {
    let present: Vec<(&AppRecord, &ScanRecord)> =
        manifest.apps.iter().filter_map(|a| records.get(&a.app_id).map(|r| (a, r))).collect();
    with_workers(workers, || present.par_iter().map(|(a, r)| analyze_app(a, r, registry, threshold)).collect())
}

/// Working APIs of all libraries, merged from per-app partial results.
pub fn working_apis(apps: &[AppAnalysis]) -> WorkingApis {
    apps.par_iter()
        .map(|a| {
            let mut acc = ApiAccumulator::default();
            acc.extend(&a.calls);
            acc
        })
        .reduce(ApiAccumulator::default, ApiAccumulator::merge)
        .finish()
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub registry: Registry,
    pub ruleset: Ruleset,
    pub threshold: f64,
    pub top: usize,
    pub workers: usize,
    pub fixture: Option<PermissionFixture>,
}

pub struct Analysis {
    pub apps: Vec<AppAnalysis>,
    pub classified: ClassifiedApi,
    pub bundle: ReportBundle,
}

/// Everything downstream of scanning.
pub fn analyze(manifest: &CorpusManifest, scan: &ScanOutcome, cfg: &AnalysisConfig) -> Result<Analysis, PipelineError> {
    let apps = analyze_corpus(manifest, &scan.records, &cfg.registry, cfg.threshold, cfg.workers)?;
    let apis = with_workers(cfg.workers, || working_apis(&apps))?;
    let classified = classify(&apis, &cfg.ruleset)?;
    let libraries: Vec<String> = cfg.registry.specs().iter().map(|s| s.canonical_name.clone()).collect();
    let metadata = RunMetadata {
        registry_version: cfg.registry.version().to_owned(),
        rule_count: cfg.ruleset.rules.len(),
        threshold: cfg.threshold,
        top: cfg.top,
        manifest_apps: manifest.apps.len() as u64,
        skipped_apps: scan.ids_with(ScanStatus::Skipped),
        failed_apps: scan.ids_with(ScanStatus::Failed),
    };
    let bundle =
        ReportBundle::build(metadata, manifest, &apps, apis, &classified, &libraries, cfg.fixture.as_ref());
    Ok(Analysis { apps, classified, bundle })
}

/// Heuristic rules fragment for one library's unclassified working-API
/// methods.
pub fn suggest_rules(library: &str, analysis: &Analysis, registry: &Registry) -> Result<String, PipelineError> {
    if registry.spec(library).is_none() {
        return Err(PipelineError::UnknownLibrary(library.to_owned()));
    }
    let suggestions = analysis
        .bundle
        .working_apis
        .get(library)
        .map(|api| crate::privclass::suggest_for_library(api, &analysis.classified))
        .unwrap_or_default();
    Ok(crate::privclass::render_fragment(library, &suggestions))
}
