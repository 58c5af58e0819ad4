//! Brute-force recount of every report value straight from the planted
//! ground truth, with no use of the crate's aggregation code.

use std::collections::{BTreeMap, BTreeSet};

use adscope::ingest::{InstallBucket, CANONICAL_BUCKETS};
use adscope::privclass::PrivacyCategory;
use adscope::report::ReportBundle;
use adscope::MethodRef;

use super::SynthApp;

pub fn check(bundle: &ReportBundle, apps: &[SynthApp], registry_order: &[String], top: usize) -> Result<(), String> {
    let n = apps.len() as u64;
    let frac = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let fail = |what: &str, got: String, want: String| Err(format!("{what}: got {got}, want {want}"));

    // market share
    let top_set: BTreeSet<&str> = registry_order.iter().take(top).map(String::as_str).collect();
    let mut want_ms: Vec<(String, u64)> = Vec::new();
    for lib in &top_set {
        let c = apps.iter().filter(|a| a.contained().contains(lib)).count() as u64;
        if c > 0 {
            want_ms.push((lib.to_string(), c));
        }
    }
    want_ms.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let other = apps.iter().filter(|a| a.contained().iter().any(|l| !top_set.contains(l))).count() as u64;
    if other > 0 {
        want_ms.push(("Other".into(), other));
    }
    let got_ms: Vec<(String, u64)> = bundle.market_share.iter().map(|r| (r.library.clone(), r.app_count)).collect();
    if got_ms != want_ms {
        return fail("market share", format!("{got_ms:?}"), format!("{want_ms:?}"));
    }
    for r in &bundle.market_share {
        if r.pct_of_corpus != frac(r.app_count, n) {
            return fail("market share pct", r.pct_of_corpus.to_string(), frac(r.app_count, n).to_string());
        }
    }

    // category usage
    let known_weight: u64 = apps.iter().filter_map(|a| a.bucket.lower_bound()).sum();
    for (i, cat) in PrivacyCategory::ALL.iter().enumerate() {
        let users: Vec<&SynthApp> = apps.iter().filter(|a| a.leak_pairs().iter().any(|(_, c)| c == cat)).collect();
        let count = users.len() as u64;
        let weight: u64 = users.iter().filter_map(|a| a.bucket.lower_bound()).sum();
        let row = &bundle.category_usage[i];
        let want = (*cat, count, frac(count, n), weight, frac(weight, known_weight));
        let got = (row.category, row.apps_making_call, row.pct_of_apps, row.installs_weight, row.pct_of_installs);
        if got != want {
            return fail("category usage", format!("{got:?}"), format!("{want:?}"));
        }
    }

    // bucket profile
    let mut want_bp = Vec::new();
    let mut want_empty = Vec::new();
    for b in CANONICAL_BUCKETS {
        let in_bucket: Vec<&SynthApp> = apps.iter().filter(|a| a.bucket == InstallBucket::Known(b)).collect();
        if in_bucket.is_empty() {
            want_empty.push(b);
            continue;
        }
        let keys: u64 = in_bucket.iter().map(|a| a.leak_pairs().len() as u64).sum();
        want_bp.push((b, in_bucket.len() as u64, keys, frac(keys, in_bucket.len() as u64)));
    }
    let got_bp: Vec<_> =
        bundle.bucket_profile.iter().map(|r| (r.bucket, r.app_count, r.leak_keys, r.mean_keys_per_app)).collect();
    if got_bp != want_bp || bundle.empty_buckets != want_empty {
        return fail("bucket profile", format!("{got_bp:?}"), format!("{want_bp:?}"));
    }

    // per-library table
    let mut exposed: BTreeMap<&str, BTreeSet<PrivacyCategory>> = BTreeMap::new();
    for a in apps {
        for c in &a.calls {
            if let Some(cat) = c.category {
                exposed.entry(c.lib).or_default().insert(cat);
            }
        }
    }
    let mut col_iter = bundle.per_library.columns.iter();
    let mut omitted = Vec::new();
    for lib in registry_order {
        let containing: Vec<&SynthApp> = apps.iter().filter(|a| a.contained().contains(lib.as_str())).collect();
        if containing.is_empty() {
            omitted.push(lib.clone());
            continue;
        }
        let Some(col) = col_iter.next() else { return Err(format!("per-library: missing column {lib}")) };
        if col.library != *lib || col.apps_containing != containing.len() as u64 {
            return fail("per-library column", format!("{} {}", col.library, col.apps_containing), format!("{lib} {}", containing.len()));
        }
        for (i, cat) in PrivacyCategory::ALL.iter().enumerate() {
            let want = exposed.get(lib.as_str()).is_some_and(|s| s.contains(cat)).then(|| {
                let k = containing.iter().filter(|a| a.leak_pairs().contains(&(lib_static(lib), *cat))).count() as u64;
                frac(k, containing.len() as u64)
            });
            if col.cells[i] != want {
                return fail(&format!("per-library cell {lib}/{cat}"), format!("{:?}", col.cells[i]), format!("{want:?}"));
            }
        }
    }
    if col_iter.next().is_some() || bundle.per_library.omitted != omitted {
        return fail("per-library omitted", format!("{:?}", bundle.per_library.omitted), format!("{omitted:?}"));
    }

    // corpus summary
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    let mut unknown = 0;
    for a in apps {
        match a.bucket {
            InstallBucket::Known(b) => *hist.entry(b).or_default() += 1,
            InstallBucket::Unknown => unknown += 1,
        }
    }
    if bundle.corpus_summary.counts != hist || bundle.corpus_summary.unknown != unknown {
        return fail("corpus summary", format!("{:?}", bundle.corpus_summary), format!("{hist:?} + {unknown}"));
    }

    // working API
    let mut usage: BTreeMap<(&str, MethodRef), (BTreeSet<&str>, u64)> = BTreeMap::new();
    for a in apps {
        for c in &a.calls {
            let e = usage.entry((c.lib, c.method_ref())).or_default();
            e.0.insert(&a.id);
            e.1 += u64::from(c.sites);
        }
    }
    let mut got_usage = BTreeMap::new();
    for (lib, api) in &bundle.working_apis {
        for (m, u) in &api.entries {
            got_usage.insert((lib.clone(), m.clone()), (u.app_count, u.call_site_count));
        }
    }
    let want_usage: BTreeMap<(String, MethodRef), (u64, u64)> =
        usage.iter().map(|((l, m), (s, c))| ((l.to_string(), m.clone()), (s.len() as u64, *c))).collect();
    if got_usage != want_usage {
        return fail("working api", format!("{} entries", got_usage.len()), format!("{} entries", want_usage.len()));
    }

    // API sizes
    for row in &bundle.api_sizes {
        let methods: BTreeSet<&MethodRef> = usage.keys().filter(|(l, _)| *l == row.library).map(|(_, m)| m).collect();
        let privacy = apps
            .iter()
            .flat_map(|a| &a.calls)
            .filter(|c| c.lib == row.library && c.category.is_some())
            .map(|c| c.method_ref())
            .collect::<BTreeSet<_>>()
            .len() as u64;
        let want = (methods.len() as u64, privacy, methods.len() as u64 - privacy);
        let got = (row.distinct_methods, row.privacy_methods, row.unclassified_methods);
        if got != want {
            return fail(&format!("api size {}", row.library), format!("{got:?}"), format!("{want:?}"));
        }
    }
    if bundle.tally.lib_to_lib_edges != apps.iter().map(|a| (a.mediation.len() + a.dormant.len()) as u64).sum::<u64>() {
        return Err("lib_to_lib edge count".into());
    }
    Ok(())
}

fn lib_static(name: &str) -> &'static str {
    super::lib(name).name
}
