use std::io::BufRead;

use super::IngestError;
use crate::model::{is_class_descriptor, CallEdge, InvokeKind, MethodRef};

/// Reads a call log: one edge per line with columns caller class, callee
/// class, method name, `(params)ret` descriptor and an optional invoke kind
/// (default `virtual`). Columns are tab-separated; whitespace separation is
/// accepted when a line has no tab.
pub fn parse_call_log<R: BufRead>(input: R, app_id: &str) -> Result<Vec<CallEdge>, IngestError> {
    let mut edges = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IngestError::RecordSyntax { line: line_no, reason: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let syntax = |reason: String| IngestError::RecordSyntax { line: line_no, reason };
        if !(4..=5).contains(&cols.len()) {
            return Err(syntax(format!("expected 4 or 5 columns, got {}", cols.len())));
        }
        if !is_class_descriptor(cols[0]) {
            return Err(syntax(format!("caller {:?} is not a class descriptor", cols[0])));
        }
        let callee = MethodRef::from_descriptor(cols[1], cols[2], cols[3]).map_err(|e| syntax(e.to_string()))?;
        let invoke_kind = match cols.get(4) {
            None => InvokeKind::Virtual,
            Some(k) => InvokeKind::parse(k).ok_or_else(|| syntax(format!("unknown invoke kind {k:?}")))?,
        };
        edges.push(CallEdge { app_id: app_id.to_owned(), caller_class: cols[0].to_owned(), callee, invoke_kind });
    }
    Ok(edges)
}

/// Inverse of [`parse_call_log`], always emitting the invoke-kind column.
pub fn write_call_log(edges: &[CallEdge]) -> String {
    let mut out = String::new();
    for e in edges {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.caller_class,
            e.callee.class_descriptor,
            e.callee.method_name,
            e.callee.descriptor(),
            e.invoke_kind
        ));
    }
    out
}
