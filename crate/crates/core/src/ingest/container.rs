use std::io::{Cursor, Read};
use std::path::Path;

use super::IngestError;

/// Returns every DEX image in a raw `.dex` file or an APK, in
/// `classes.dex`, `classes2.dex`, ... order.
pub fn unpack_container(path: &Path) -> Result<Vec<Vec<u8>>, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
    unpack_bytes(bytes, path)
}

/// Same as [`unpack_container`] for an in-memory image; `path` is only used
/// in error messages.
pub fn unpack_bytes(bytes: Vec<u8>, path: &Path) -> Result<Vec<Vec<u8>>, IngestError> {
    if bytes.starts_with(b"dex\n") {
        return Ok(vec![bytes]);
    }
    if !bytes.starts_with(b"PK") {
        return Err(IngestError::ArchiveCorrupt {
            path: path.to_owned(),
            reason: "neither a DEX image nor a zip archive".into(),
        });
    }
    let corrupt = |e: zip::result::ZipError| IngestError::ArchiveCorrupt { path: path.to_owned(), reason: e.to_string() };
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(corrupt)?;
    let mut names: Vec<(u32, String)> = archive
        .file_names()
        .filter_map(|name| dex_ordinal(name).map(|n| (n, name.to_owned())))
        .collect();
    if names.is_empty() {
        return Err(IngestError::NoDexFound { path: path.to_owned() });
    }
    names.sort();
    let mut images = Vec::with_capacity(names.len());
    for (_, name) in names {
        let mut entry = archive.by_name(&name).map_err(corrupt)?;
        let mut buf = Vec::new();
        entry.read_to_end(&mut buf).map_err(|e| IngestError::ArchiveCorrupt {
            path: path.to_owned(),
            reason: format!("{name}: {e}"),
        })?;
        images.push(buf);
    }
    Ok(images)
}

/// `classes.dex` -> 1, `classesN.dex` -> N; anything else is not a primary
/// code image.
fn dex_ordinal(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("classes")?.strip_suffix(".dex")?;
    if digits.is_empty() {
        Some(1)
    } else if digits.bytes().all(|b| b.is_ascii_digit()) && !digits.starts_with('0') {
        digits.parse().ok().filter(|&n| n >= 2)
    } else {
        None
    }
}
