//! Static analysis of the interface between Android apps and their embedded
//! advertising libraries.
//!
//! The pipeline reads DEX images (or a plain-text call log), extracts every
//! invoke edge, attributes callee classes to known ad libraries by package
//! prefix or by a rename-invariant structural fingerprint, rebuilds each
//! library's *working API* from the calls apps actually make, classifies
//! privacy-leaking methods into sixteen categories and aggregates corpus
//! statistics.
//!
//! ```no_run
//! use adscope::{dex, libid::Registry};
//!
//! let bytes = std::fs::read("classes.dex")?;
//! let file = dex::parse_dex(&bytes)?;
//! let edges = dex::extract_call_edges(&file, "com.example.app").edges;
//! let registry = Registry::default_top20();
//! for e in &edges {
//!     if let Some(lib) = registry.match_library(&e.callee.class_descriptor) {
//!         println!("{lib}: {}", e.callee);
//!     }
//! }
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod apirecon;
pub mod cli;
pub mod dex;
pub mod ingest;
pub mod libid;
pub mod model;
pub mod pipeline;
pub mod privclass;
pub mod report;

pub use model::{CallEdge, InvokeKind, MethodRef};
