//! Working-API reconstruction: every library method apps were observed to
//! call, with how many apps call it and how many call sites there are.
//!
//! All library versions pool together under the library's canonical name.
//! Aggregation is associative (per-entry sum of call sites, union of app
//! sets), so partial results from any partition of the corpus merge to the
//! same answer.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::libid::LibCall;
use crate::model::MethodRef;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub app_count: u64,
    pub call_site_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingApiEntry {
    pub library: String,
    pub method: MethodRef,
    pub app_count: u64,
    pub call_site_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingApi {
    pub library: String,
    pub entries: BTreeMap<MethodRef, Usage>,
}

impl WorkingApi {
    pub fn distinct_method_count(&self) -> usize {
        self.entries.len()
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = WorkingApiEntry> + '_ {
        self.entries.iter().map(|(m, u)| WorkingApiEntry {
            library: self.library.clone(),
            method: m.clone(),
            app_count: u.app_count,
            call_site_count: u.call_site_count,
        })
    }
}

pub type WorkingApis = BTreeMap<String, WorkingApi>;

/// Mergeable partial aggregation holding app-id sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApiAccumulator {
    cells: BTreeMap<(String, MethodRef), (BTreeSet<String>, u64)>,
}

impl ApiAccumulator {
    pub fn add(&mut self, call: &LibCall) {
        let cell = self.cells.entry((call.library.clone(), call.method.clone())).or_default();
        if !cell.0.contains(&call.app_id) {
            cell.0.insert(call.app_id.clone());
        }
        cell.1 += 1;
    }

    pub fn extend<'a>(&mut self, calls: impl IntoIterator<Item = &'a LibCall>) {
        for c in calls {
            self.add(c);
        }
    }

    pub fn merge(mut self, other: ApiAccumulator) -> ApiAccumulator {
        for (key, (apps, sites)) in other.cells {
            let cell = self.cells.entry(key).or_default();
            cell.0.extend(apps);
            cell.1 += sites;
        }
        self
    }

    /// Drops the app sets, keeping only their sizes.
    pub fn finish(self) -> WorkingApis {
        let mut out = WorkingApis::new();
        for ((library, method), (apps, sites)) in self.cells {
            out.entry(library.clone())
                .or_insert_with(|| WorkingApi { library, entries: BTreeMap::new() })
                .entries
                .insert(method, Usage { app_count: apps.len() as u64, call_site_count: sites });
        }
        out
    }
}

/// Reconstructs every library's working API from app-to-library calls.
pub fn reconstruct<'a>(calls: impl IntoIterator<Item = &'a LibCall>) -> WorkingApis {
    let mut acc = ApiAccumulator::default();
    acc.extend(calls);
    acc.finish()
}

/// App-at-a-time aggregation that keeps only counts. Each app must be fed
/// exactly once; memory is bounded by the number of distinct methods.
#[derive(Debug, Clone, Default)]
pub struct StreamingReconstructor {
    counts: BTreeMap<(String, MethodRef), Usage>,
}

impl StreamingReconstructor {
    /// Adds all calls of one app.
    pub fn add_app<'a>(&mut self, calls: impl IntoIterator<Item = &'a LibCall>) {
        let mut local: BTreeMap<(&str, &MethodRef), u64> = BTreeMap::new();
        for c in calls {
            *local.entry((&c.library, &c.method)).or_default() += 1;
        }
        for ((lib, m), sites) in local {
            let u = self.counts.entry((lib.to_owned(), m.clone())).or_default();
            u.app_count += 1;
            u.call_site_count += sites;
        }
    }

    pub fn finish(self) -> WorkingApis {
        let mut out = WorkingApis::new();
        for ((library, method), usage) in self.counts {
            out.entry(library.clone())
                .or_insert_with(|| WorkingApi { library, entries: BTreeMap::new() })
                .entries
                .insert(method, usage);
        }
        out
    }
}

/// Library counts by working-API size.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSizeHistogram {
    pub up_to_10: usize,
    pub from_11_to_50: usize,
    pub from_51_to_200: usize,
    pub over_200: usize,
    pub per_library: BTreeMap<String, usize>,
}

pub fn api_size_distribution(apis: &WorkingApis) -> ApiSizeHistogram {
    let mut h = ApiSizeHistogram::default();
    for (lib, api) in apis {
        let n = api.distinct_method_count();
        match n {
            0..=10 => h.up_to_10 += 1,
            11..=50 => h.from_11_to_50 += 1,
            51..=200 => h.from_51_to_200 += 1,
            _ => h.over_200 += 1,
        }
        h.per_library.insert(lib.clone(), n);
    }
    h
}

/// CSV export: library, class, method, descriptor, app_count, call_site_count.
pub fn working_api_csv(apis: &WorkingApis) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["library", "class", "method", "descriptor", "app_count", "call_site_count"])?;
    for api in apis.values() {
        for e in api.iter_entries() {
            w.write_record([
                e.library.as_str(),
                e.method.class_descriptor.as_str(),
                e.method.method_name.as_str(),
                e.method.descriptor().as_str(),
                e.app_count.to_string().as_str(),
                e.call_site_count.to_string().as_str(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// JSON export with the same fields as the CSV form.
pub fn working_api_json(apis: &WorkingApis) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = apis
        .values()
        .flat_map(|api| api.iter_entries())
        .map(|e| {
            serde_json::json!({
                "library": e.library,
                "class": e.method.class_descriptor,
                "method": e.method.method_name,
                "descriptor": e.method.descriptor(),
                "app_count": e.app_count,
                "call_site_count": e.call_site_count,
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}
