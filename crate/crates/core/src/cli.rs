//! Command-line driver.
//!
//! Exit codes: 0 success, 1 hard failure, 2 configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ingest::{load_manifest, unpack_container, CorpusManifest, ScanCache, ScanStatus};
use crate::libid::{fingerprint_summaries, normalize_root, summarize_classes, Registry, DEFAULT_THRESHOLD};
use crate::pipeline::{self, AnalysisConfig, ScanOutcome};
use crate::privclass::{RuleSource, Ruleset};
use crate::report::{render, Format, PermissionFixture};

#[derive(Debug, Parser)]
#[command(name = "adscope", version, about = "Ad-library API and privacy-leak analysis for Android app corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract call edges of every app into the scan cache.
    Scan(ScanArgs),
    /// Compute corpus statistics and write report files.
    Report(ReportArgs),
    /// Draft privacy rules for a library's unclassified methods.
    SuggestRules(SuggestArgs),
    /// Build a structural fingerprint of a package from a reference DEX or APK.
    Fingerprint(FingerprintArgs),
    /// Check manifest, registry, ruleset and fixture files.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, env = "ADSCOPE_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    /// Library registry (default: built-in top-20 registry).
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Ruleset replacing the shipped one.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Override rulesets, merged over the base rules.
    #[arg(long)]
    overrides: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 20)]
    top: usize,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Permission/API-call fixture for the correlation report (default: built-in).
    #[arg(long)]
    permissions: Option<PathBuf>,
    /// Skip the correlation report.
    #[arg(long, conflicts_with = "permissions")]
    no_correlation: bool,
}

#[derive(Debug, Args)]
struct SuggestArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long)]
    library: String,
    /// Write the fragment here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FingerprintArgs {
    #[arg(long)]
    dex: PathBuf,
    /// Package root, dotted (`com.airpush`) or slashed.
    #[arg(long)]
    package: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    overrides: Vec<PathBuf>,
    #[arg(long)]
    permissions: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Failure(String),
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn failure<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Failure(e.to_string())
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Scan(a) => cmd_scan(a),
        Command::Report(a) => cmd_report(a),
        Command::SuggestRules(a) => cmd_suggest(a),
        Command::Fingerprint(a) => cmd_fingerprint(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn workers(n: Option<usize>) -> Result<usize, CliError> {
    match n {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn manifest_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_owned).unwrap_or_default()
}

fn load_corpus(a: &CorpusArgs) -> Result<CorpusManifest, CliError> {
    load_manifest(&a.manifest).map_err(config)
}

fn load_ruleset(rules: Option<&Path>, overrides: &[PathBuf]) -> Result<Ruleset, CliError> {
    let mut ruleset = match rules {
        Some(p) => Ruleset::load(p, None).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => Ruleset::shipped(),
    };
    for p in overrides {
        let o = Ruleset::load(p, Some(RuleSource::Override)).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        ruleset = ruleset.with_overrides(o);
    }
    Ok(ruleset)
}

fn load_registry(path: Option<&Path>) -> Result<Registry, CliError> {
    match path {
        Some(p) => Registry::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        None => Ok(Registry::default_top20()),
    }
}

fn analysis_config(a: &AnalysisArgs, workers: usize) -> Result<AnalysisConfig, CliError> {
    if !(a.threshold > 0.0 && a.threshold <= 1.0) {
        return Err(CliError::Config(format!("--threshold must be in (0, 1], got {}", a.threshold)));
    }
    if a.top == 0 {
        return Err(CliError::Config("--top must be at least 1".into()));
    }
    Ok(AnalysisConfig {
        registry: load_registry(a.registry.as_deref())?,
        ruleset: load_ruleset(a.rules.as_deref(), &a.overrides)?,
        threshold: a.threshold,
        top: a.top,
        workers,
        fixture: None,
    })
}

/// Reuses the cache when one is configured, otherwise scans in memory.
fn obtain_scan(a: &CorpusArgs, manifest: &CorpusManifest, workers: usize) -> Result<ScanOutcome, CliError> {
    match &a.cache_dir {
        Some(dir) => {
            if !dir.join("index.json").is_file() {
                return Err(CliError::Failure(format!("scan cache {} is missing; run `scan` first", dir.display())));
            }
            let cache = ScanCache::open(dir).map_err(failure)?;
            pipeline::load_scan(manifest, &cache).map_err(failure)
        }
        None => pipeline::scan_corpus(manifest, &manifest_base(&a.manifest), None, workers).map_err(failure),
    }
}

fn cmd_scan(a: ScanArgs) -> Result<(), CliError> {
    let workers = workers(a.corpus.workers)?;
    let manifest = load_corpus(&a.corpus)?;
    let dir = a
        .corpus
        .cache_dir
        .as_ref()
        .ok_or_else(|| CliError::Config("scan needs --cache-dir or ADSCOPE_CACHE_DIR".into()))?;
    let cache = ScanCache::open(dir).map_err(failure)?;
    let outcome =
        pipeline::scan_corpus(&manifest, &manifest_base(&a.corpus.manifest), Some(&cache), workers).map_err(failure)?;
    let failed = outcome.ids_with(ScanStatus::Failed);
    eprintln!(
        "scanned {} apps: {} ok, {} skipped, {} failed",
        manifest.apps.len(),
        outcome.ids_with(ScanStatus::Ok).len(),
        outcome.ids_with(ScanStatus::Skipped).len(),
        failed.len()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(format!("failed apps: {}", failed.join(", "))))
    }
}

fn cmd_report(a: ReportArgs) -> Result<(), CliError> {
    let workers = workers(a.corpus.workers)?;
    let manifest = load_corpus(&a.corpus)?;
    let mut cfg = analysis_config(&a.analysis, workers)?;
    cfg.fixture = match (&a.permissions, a.no_correlation) {
        (_, true) => None,
        (Some(p), false) => Some(PermissionFixture::load(p).map_err(config)?),
        (None, false) => Some(PermissionFixture::shipped()),
    };
    let scan = obtain_scan(&a.corpus, &manifest, workers)?;
    let analysis = pipeline::analyze(&manifest, &scan, &cfg).map_err(failure)?;
    let format = match a.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let files = render(&analysis.bundle, format).map_err(failure)?;
    write_files(&a.out_dir, &files)?;
    eprintln!("wrote {} report files to {}", files.len(), a.out_dir.display());
    Ok(())
}

/// Writes report files into `dir`.
fn write_files(dir: &Path, files: &std::collections::BTreeMap<String, Vec<u8>>) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("{}: {e}", dir.display())))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_suggest(a: SuggestArgs) -> Result<(), CliError> {
    let workers = workers(a.corpus.workers)?;
    let manifest = load_corpus(&a.corpus)?;
    let cfg = analysis_config(&a.analysis, workers)?;
    if cfg.registry.spec(&a.library).is_none() {
        return Err(CliError::Config(format!("unknown library {:?}", a.library)));
    }
    let scan = obtain_scan(&a.corpus, &manifest, workers)?;
    let analysis = pipeline::analyze(&manifest, &scan, &cfg).map_err(failure)?;
    let fragment = pipeline::suggest_rules(&a.library, &analysis, &cfg.registry).map_err(config)?;
    match a.output {
        Some(p) => std::fs::write(&p, fragment).map_err(|e| CliError::Failure(format!("{}: {e}", p.display()))),
        None => {
            print!("{fragment}");
            Ok(())
        }
    }
}

fn cmd_fingerprint(a: FingerprintArgs) -> Result<(), CliError> {
    let images = unpack_container(&a.dex).map_err(failure)?;
    let mut summaries = Vec::new();
    for (i, image) in images.iter().enumerate() {
        let dex = crate::dex::parse_dex(image).map_err(|e| CliError::Failure(format!("dex image {i}: {e}")))?;
        summaries.extend(summarize_classes(&dex));
    }
    let root = normalize_root(&a.package);
    let fp = fingerprint_summaries(&summaries, &root)
        .ok_or_else(|| CliError::Failure(format!("no classes under package {:?}", a.package)))?;
    let mut json = serde_json::to_string_pretty(&fp).map_err(failure)?;
    json.push('\n');
    match a.output {
        Some(p) => std::fs::write(&p, json).map_err(|e| CliError::Failure(format!("{}: {e}", p.display()))),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn cmd_validate(a: ValidateArgs) -> Result<(), CliError> {
    let mut problems = Vec::new();
    let mut check = |what: String, r: Result<String, String>| match r {
        Ok(detail) => println!("ok      {what}: {detail}"),
        Err(e) => {
            println!("invalid {what}: {e}");
            problems.push(what);
        }
    };
    if let Some(p) = &a.manifest {
        check(
            p.display().to_string(),
            load_manifest(p).map_err(|e| e.to_string()).map(|m| {
                let base = manifest_base(p);
                let missing = m
                    .apps
                    .iter()
                    .filter(|r| !pipeline::resolve_source(&base, &r.source).exists())
                    .count();
                format!("{} apps, {missing} with missing sources", m.apps.len())
            }),
        );
    }
    match &a.registry {
        Some(p) => check(
            p.display().to_string(),
            Registry::load(p).map(|r| format!("{} libraries", r.specs().len())).map_err(|e| e.to_string()),
        ),
        None => println!("ok      built-in registry: {} libraries", Registry::default_top20().specs().len()),
    }
    let rules = match &a.rules {
        Some(p) => Ruleset::load(p, None).map_err(|e| e.to_string()),
        None => Ok(Ruleset::shipped()),
    };
    check(
        a.rules.as_ref().map_or("built-in ruleset".into(), |p| p.display().to_string()),
        rules.as_ref().map(|r| format!("{} rules", r.rules.len())).map_err(Clone::clone),
    );
    for p in &a.overrides {
        check(
            p.display().to_string(),
            Ruleset::load(p, Some(RuleSource::Override))
                .map(|r| format!("{} override rules", r.rules.len()))
                .map_err(|e| e.to_string()),
        );
    }
    if let Some(p) = &a.permissions {
        check(
            p.display().to_string(),
            PermissionFixture::load(p).map(|f| format!("{} libraries", f.rows.len())).map_err(|e| e.to_string()),
        );
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{} invalid input(s)", problems.len())))
    }
}
