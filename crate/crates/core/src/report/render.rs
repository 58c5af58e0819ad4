//! Report files. Every run writes the same file names; CSV holds the table,
//! `metadata.json` holds denominators and exclusion counts for all of them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::*;
use crate::apirecon::{api_size_distribution, working_api_csv, working_api_json, ApiSizeHistogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub registry_version: String,
    pub rule_count: usize,
    pub threshold: f64,
    pub top: usize,
    pub manifest_apps: u64,
    pub skipped_apps: Vec<String>,
    pub failed_apps: Vec<String>,
}

/// All statistics of one run, ready to render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: RunMetadata,
    pub tally: Tally,
    pub market_share: Vec<MarketShare>,
    pub category_usage: Vec<CategoryUsage>,
    pub per_library: PerLibraryTable,
    pub bucket_profile: Vec<BucketProfile>,
    pub empty_buckets: Vec<u64>,
    pub corpus_summary: InstallHistogram,
    pub api_sizes: Vec<ApiSizeRow>,
    pub api_histogram: ApiSizeHistogram,
    pub correlation: Option<Correlation>,
    pub working_apis: WorkingApis,
}

impl ReportBundle {
    /// `libraries` lists registry libraries in registry order; the first
    /// `metadata.top` of them get their own market-share rows.
    pub fn build(
        metadata: RunMetadata,
        manifest: &CorpusManifest,
        apps: &[AppAnalysis],
        working_apis: WorkingApis,
        classified: &ClassifiedApi,
        libraries: &[String],
        fixture: Option<&PermissionFixture>,
    ) -> Self {
        let top: BTreeSet<String> = libraries.iter().take(metadata.top).cloned().collect();
        let tally = Tally::from_apps(apps, classified, &top);
        let (bucket_profile, empty_buckets) = bucket_profile(&tally);
        ReportBundle {
            market_share: market_share(&tally, &top),
            category_usage: category_usage(&tally),
            per_library: per_library_table(&tally, classified, libraries),
            bucket_profile,
            empty_buckets,
            corpus_summary: corpus_summary(manifest),
            api_sizes: api_size_rows(&working_apis, classified),
            api_histogram: api_size_distribution(&working_apis),
            correlation: fixture.map(|f| correlation(f, classified)),
            working_apis,
            metadata,
            tally,
        }
    }

    fn metadata_json(&self) -> Value {
        let t = &self.tally;
        json!({
            "run": self.metadata,
            "corpus": {
                "analyzed_apps": t.total_apps,
                "unknown_install_apps": t.unknown_install_apps,
                "known_install_weight": t.known_install_weight,
                "lib_to_lib_edges_excluded": t.lib_to_lib_edges,
            },
            "market_share": { "denominator_apps": t.total_apps, "other_row": OTHER_ROW },
            "category_usage": {
                "apps_denominator": t.total_apps,
                "installs_denominator": t.known_install_weight,
                "excluded_unknown_install_apps": t.unknown_install_apps,
                "developer_channel": PrivacyCategory::ALL
                    .iter()
                    .filter(|c| c.is_developer_channel())
                    .map(|c| c.as_str())
                    .collect::<Vec<_>>(),
            },
            "per_library": {
                "denominators": self.per_library.columns.iter()
                    .map(|c| (c.library.clone(), c.apps_containing))
                    .collect::<BTreeMap<_, _>>(),
                "omitted_no_apps": self.per_library.omitted,
            },
            "bucket_profile": {
                "omitted_empty_buckets": self.empty_buckets,
                "excluded_unknown_install_apps": t.unknown_install_apps,
            },
            "corpus_summary": { "manifest_apps": self.metadata.manifest_apps, "unknown": self.corpus_summary.unknown },
            "api_size": self.api_histogram,
            "correlation": self.correlation.as_ref().map(|c| json!({
                "libraries": c.rows.len(),
                "fixture_pearson": c.fixture_r,
                "fixture_note": c.fixture_note,
                "corpus_pearson": c.corpus_r,
                "corpus_note": c.corpus_note,
            })),
        })
    }
}

fn pct(f: f64, decimals: usize) -> String {
    format!("{:.*}", decimals, f * 100.0)
}

fn csv_table<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, csv::Error>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("json values serialize");
    out.push(b'\n');
    out
}

/// Renders every report to `file name -> bytes`. Output depends only on the
/// bundle, so equal bundles give byte-identical files.
pub fn render(bundle: &ReportBundle, format: Format) -> Result<BTreeMap<String, Vec<u8>>, csv::Error> {
    let mut files = BTreeMap::new();
    let ext = format.extension();
    let b = bundle;

    let market = match format {
        Format::Csv => csv_table(
            &["library", "app_count", "pct_of_corpus"],
            b.market_share.iter().map(|r| [r.library.clone(), r.app_count.to_string(), pct(r.pct_of_corpus, 2)]),
        )?,
        Format::Json => pretty(&json!(b.market_share)),
    };
    files.insert(format!("market_share.{ext}"), market);

    let usage = match format {
        Format::Csv => csv_table(
            &["category", "label", "apps_making_call", "pct_of_apps", "installs_weight", "pct_of_installs", "developer_channel"],
            b.category_usage.iter().map(|r| {
                [
                    r.category.as_str().to_owned(),
                    r.category.label().to_owned(),
                    r.apps_making_call.to_string(),
                    pct(r.pct_of_apps, 2),
                    r.installs_weight.to_string(),
                    pct(r.pct_of_installs, 2),
                    r.category.is_developer_channel().to_string(),
                ]
            }),
        )?,
        Format::Json => pretty(&json!(b
            .category_usage
            .iter()
            .map(|r| json!({
                "category": r.category,
                "apps_making_call": r.apps_making_call,
                "pct_of_apps": r.pct_of_apps,
                "installs_weight": r.installs_weight,
                "pct_of_installs": r.pct_of_installs,
                "developer_channel": r.category.is_developer_channel(),
            }))
            .collect::<Vec<_>>())),
    };
    files.insert(format!("category_usage.{ext}"), usage);

    let per_lib = match format {
        Format::Csv => {
            let mut header = vec!["category"];
            header.extend(b.per_library.columns.iter().map(|c| c.library.as_str()));
            csv_table(
                &header,
                PrivacyCategory::ALL.iter().enumerate().map(|(i, cat)| {
                    std::iter::once(cat.label().to_owned())
                        .chain(b.per_library.columns.iter().map(move |c| c.cells[i].map(|v| pct(v, 1)).unwrap_or_default()))
                        .collect::<Vec<_>>()
                }),
            )?
        }
        Format::Json => pretty(&json!(b.per_library)),
    };
    files.insert(format!("per_library.{ext}"), per_lib);

    let profile = match format {
        Format::Csv => csv_table(
            &["bucket", "app_count", "leak_keys", "mean_keys_per_app"],
            b.bucket_profile.iter().map(|r| {
                [r.bucket.to_string(), r.app_count.to_string(), r.leak_keys.to_string(), format!("{:.4}", r.mean_keys_per_app)]
            }),
        )?,
        Format::Json => pretty(&json!(b.bucket_profile)),
    };
    files.insert(format!("bucket_profile.{ext}"), profile);

    let summary = match format {
        Format::Csv => csv_table(
            &["bucket", "app_count"],
            b.corpus_summary
                .counts
                .iter()
                .map(|(k, v)| [k.to_string(), v.to_string()])
                .chain((b.corpus_summary.unknown > 0).then(|| ["unknown".to_owned(), b.corpus_summary.unknown.to_string()])),
        )?,
        Format::Json => pretty(&json!(b.corpus_summary)),
    };
    files.insert(format!("corpus_summary.{ext}"), summary);

    let sizes = match format {
        Format::Csv => csv_table(
            &["library", "distinct_methods", "privacy_methods", "unclassified_methods"],
            b.api_sizes.iter().map(|r| {
                [
                    r.library.clone(),
                    r.distinct_methods.to_string(),
                    r.privacy_methods.to_string(),
                    r.unclassified_methods.to_string(),
                ]
            }),
        )?,
        Format::Json => pretty(&json!({ "libraries": b.api_sizes, "histogram": b.api_histogram })),
    };
    files.insert(format!("api_size.{ext}"), sizes);

    let working = match format {
        Format::Csv => working_api_csv(&b.working_apis)?.into_bytes(),
        Format::Json => pretty(&working_api_json(&b.working_apis)),
    };
    files.insert(format!("working_api.{ext}"), working);

    if let Some(c) = &b.correlation {
        let body = match format {
            Format::Csv => csv_table(
                &["library", "permissions", "fixture_api_calls", "corpus_privacy_methods"],
                c.rows.iter().map(|r| {
                    [
                        r.library.clone(),
                        r.permissions.to_string(),
                        r.fixture_api_calls.to_string(),
                        r.corpus_privacy_methods.to_string(),
                    ]
                }),
            )?,
            Format::Json => pretty(&json!(c)),
        };
        files.insert(format!("correlation.{ext}"), body);
    }

    let plot: BTreeMap<String, f64> =
        b.bucket_profile.iter().map(|r| (r.bucket.to_string(), r.mean_keys_per_app)).collect();
    files.insert(
        "bucket_profile_plot.json".into(),
        pretty(&json!({
            "x": b.bucket_profile.iter().map(|r| r.bucket).collect::<Vec<_>>(),
            "y": b.bucket_profile.iter().map(|r| r.mean_keys_per_app).collect::<Vec<_>>(),
            "by_bucket": plot,
        })),
    );
    files.insert("metadata.json".into(), pretty(&b.metadata_json()));
    Ok(files)
}
