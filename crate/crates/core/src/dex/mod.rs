//! Native DEX reader.
//!
//! Decodes the header, the string/type/proto/method tables and every class's
//! code items, then walks instruction streams to recover invoke edges. Every
//! read is bounds-checked against the input image.

pub(crate) mod extract;
pub mod opcodes;
mod reader;

use serde::{Deserialize, Serialize};

use crate::model::{self, MethodRef};
use reader::{decode_mutf8, Reader};

pub use extract::{extract_call_edges, Extraction, Insn, Instructions};

pub const HEADER_SIZE: usize = 0x70;
pub const ENDIAN_CONSTANT: u32 = 0x1234_5678;
pub const NO_INDEX: u32 = 0xffff_ffff;
pub const SUPPORTED_VERSIONS: std::ops::RangeInclusive<u32> = 35..=39;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DexError {
    #[error("malformed header at offset {offset:#x}: {reason}")]
    MalformedHeader { offset: u64, reason: String },
    #[error("{table} index {index} out of range (size {size}) at offset {offset:#x}")]
    IndexOutOfRange { offset: u64, table: &'static str, index: u64, size: u64 },
    #[error("{section} truncated at offset {offset:#x}: needs {needed} bytes, file is {file_len}")]
    TruncatedSection { offset: u64, section: &'static str, needed: u64, file_len: u64 },
    #[error("malformed data at offset {offset:#x}: {reason}")]
    MalformedData { offset: u64, reason: &'static str },
    #[error("invalid type descriptor {descriptor:?} at offset {offset:#x}")]
    BadDescriptor { offset: u64, descriptor: String },
}

impl DexError {
    pub fn offset(&self) -> u64 {
        match self {
            DexError::MalformedHeader { offset, .. }
            | DexError::IndexOutOfRange { offset, .. }
            | DexError::TruncatedSection { offset, .. }
            | DexError::MalformedData { offset, .. }
            | DexError::BadDescriptor { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    LossyString,
    UnknownOpcode,
    TruncatedInstruction,
    BadMethodIndex,
    UnsupportedInvoke,
}

/// Non-fatal finding attached to an app's scan.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub location: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proto {
    pub return_descriptor: String,
    pub param_descriptors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodId {
    pub class_idx: u32,
    pub proto_idx: u32,
    pub name_idx: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedMethod {
    pub method_idx: u32,
    pub access_flags: u32,
    /// Instruction stream; `None` for abstract and native methods.
    pub code: Option<Vec<u16>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub descriptor: String,
    pub methods: Vec<EncodedMethod>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DexFile {
    pub version: u32,
    pub strings: Vec<String>,
    pub type_descriptors: Vec<String>,
    pub protos: Vec<Proto>,
    pub method_refs: Vec<MethodId>,
    pub classes: Vec<ClassDef>,
    pub diagnostics: Vec<Diagnostic>,
}

impl DexFile {
    /// Resolves a method table entry into a fully spelled `MethodRef`.
    pub fn method_ref(&self, idx: u32) -> Option<MethodRef> {
        let id = self.method_refs.get(idx as usize)?;
        let proto = &self.protos[id.proto_idx as usize];
        Some(MethodRef::new(
            self.type_descriptors[id.class_idx as usize].clone(),
            self.strings[id.name_idx as usize].clone(),
            proto.param_descriptors.clone(),
            proto.return_descriptor.clone(),
        ))
    }
}

struct Header {
    version: u32,
    file_size: u32,
    string_ids: (u32, u32),
    type_ids: (u32, u32),
    proto_ids: (u32, u32),
    field_ids: (u32, u32),
    method_ids: (u32, u32),
    class_defs: (u32, u32),
}

fn parse_header(data: &[u8]) -> Result<Header, DexError> {
    if data.len() < HEADER_SIZE {
        return Err(DexError::MalformedHeader {
            offset: data.len() as u64,
            reason: format!("need {HEADER_SIZE} header bytes, got {}", data.len()),
        });
    }
    let magic = &data[..8];
    if &magic[..4] != b"dex\n" || magic[7] != 0 {
        return Err(DexError::MalformedHeader { offset: 0, reason: "bad magic".into() });
    }
    let version = std::str::from_utf8(&magic[4..7])
        .ok()
        .filter(|v| v.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| DexError::MalformedHeader { offset: 4, reason: "bad version digits".into() })?;
    if !SUPPORTED_VERSIONS.contains(&version) {
        return Err(DexError::MalformedHeader {
            offset: 4,
            reason: format!("unsupported version {version:03}"),
        });
    }
    let mut r = Reader::at(data, 32, "header")?;
    let file_size = r.u32()?;
    let header_size = r.u32()?;
    let endian_tag = r.u32()?;
    if header_size as usize != HEADER_SIZE {
        return Err(DexError::MalformedHeader {
            offset: 36,
            reason: format!("header_size {header_size:#x}"),
        });
    }
    if endian_tag != ENDIAN_CONSTANT {
        return Err(DexError::MalformedHeader {
            offset: 40,
            reason: format!("unsupported endian tag {endian_tag:#x}"),
        });
    }
    if file_size as usize > data.len() {
        return Err(DexError::TruncatedSection {
            offset: 32,
            section: "file",
            needed: u64::from(file_size),
            file_len: data.len() as u64,
        });
    }
    let mut r = Reader::at(data, 56, "header")?;
    let mut pair = || -> Result<(u32, u32), DexError> { Ok((r.u32()?, r.u32()?)) };
    Ok(Header {
        version,
        file_size,
        string_ids: pair()?,
        type_ids: pair()?,
        proto_ids: pair()?,
        field_ids: pair()?,
        method_ids: pair()?,
        class_defs: pair()?,
    })
}

/// Verifies that a table of `count` fixed-width entries fits in the image.
fn table<'a>(
    data: &'a [u8],
    (count, off): (u32, u32),
    entry: u64,
    section: &'static str,
) -> Result<Reader<'a>, DexError> {
    let needed = u64::from(count) * entry;
    if count > 0 && u64::from(off) + needed > data.len() as u64 {
        return Err(DexError::TruncatedSection {
            offset: u64::from(off),
            section,
            needed,
            file_len: data.len() as u64,
        });
    }
    Reader::at(data, if count == 0 { 0 } else { off as usize }, section)
}

/// Caps the total decoded volume (string bytes, methods, code units) so
/// that tables sharing one offset cannot force quadratic work.
struct Budget {
    left: u64,
}

impl Budget {
    fn new(len: usize) -> Self {
        Budget { left: 32 * len as u64 + (1 << 20) }
    }

    fn spend(&mut self, n: u64, offset: usize) -> Result<(), DexError> {
        self.left = self.left.checked_sub(n).ok_or(DexError::MalformedData {
            offset: offset as u64,
            reason: "decoded element count exceeds file size (overlapping sections)",
        })?;
        Ok(())
    }
}

fn check_index(idx: u32, size: usize, table: &'static str, offset: usize) -> Result<(), DexError> {
    if (idx as usize) < size {
        Ok(())
    } else {
        Err(DexError::IndexOutOfRange {
            offset: offset as u64,
            table,
            index: u64::from(idx),
            size: size as u64,
        })
    }
}

/// Parses a complete DEX image.
pub fn parse_dex(data: &[u8]) -> Result<DexFile, DexError> {
    let h = parse_header(data)?;
    // Sections past the declared file size are not part of this image.
    let data = &data[..h.file_size.max(HEADER_SIZE as u32) as usize];
    let mut diagnostics = Vec::new();
    let mut budget = Budget::new(data.len());

    let mut strings = Vec::new();
    let mut r = table(data, h.string_ids, 4, "string_ids")?;
    for i in 0..h.string_ids.0 {
        let off = r.u32()? as usize;
        let mut s = Reader::at(data, off, "string_data")?;
        let _utf16_len = s.uleb128()?;
        let raw = s.c_str()?;
        budget.spend(raw.len() as u64, off)?;
        let (text, lossy) = decode_mutf8(raw);
        if lossy {
            diagnostics.push(Diagnostic {
                kind: DiagnosticKind::LossyString,
                location: format!("string {i} @ {off:#x}"),
                detail: "invalid MUTF-8 replaced".into(),
            });
        }
        strings.push(text);
    }

    let mut type_descriptors = Vec::new();
    let mut r = table(data, h.type_ids, 4, "type_ids")?;
    for _ in 0..h.type_ids.0 {
        let pos = r.pos();
        let idx = r.u32()?;
        check_index(idx, strings.len(), "string", pos)?;
        let desc = &strings[idx as usize];
        if !model::is_type_descriptor(desc) {
            return Err(DexError::BadDescriptor { offset: pos as u64, descriptor: desc.clone() });
        }
        budget.spend(desc.len() as u64, pos)?;
        type_descriptors.push(desc.clone());
    }

    let mut protos = Vec::new();
    let mut r = table(data, h.proto_ids, 12, "proto_ids")?;
    for _ in 0..h.proto_ids.0 {
        let pos = r.pos();
        let shorty = r.u32()?;
        check_index(shorty, strings.len(), "string", pos)?;
        let ret = r.u32()?;
        check_index(ret, type_descriptors.len(), "type", pos + 4)?;
        let params_off = r.u32()?;
        let mut params = Vec::new();
        if params_off != 0 {
            let mut t = Reader::at(data, params_off as usize, "type_list")?;
            let n = t.u32()?;
            for _ in 0..n {
                let p = t.pos();
                let ty = u32::from(t.u16()?);
                check_index(ty, type_descriptors.len(), "type", p)?;
                let desc = &type_descriptors[ty as usize];
                budget.spend(desc.len() as u64 + 1, p)?;
                if desc == "V" {
                    return Err(DexError::BadDescriptor { offset: p as u64, descriptor: desc.clone() });
                }
                params.push(desc.clone());
            }
        }
        protos.push(Proto {
            return_descriptor: type_descriptors[ret as usize].clone(),
            param_descriptors: params,
        });
    }

    let mut method_refs = Vec::new();
    let mut r = table(data, h.method_ids, 8, "method_ids")?;
    for _ in 0..h.method_ids.0 {
        let pos = r.pos();
        let class_idx = u32::from(r.u16()?);
        check_index(class_idx, type_descriptors.len(), "type", pos)?;
        let proto_idx = u32::from(r.u16()?);
        check_index(proto_idx, protos.len(), "proto", pos + 2)?;
        let name_idx = r.u32()?;
        check_index(name_idx, strings.len(), "string", pos + 4)?;
        method_refs.push(MethodId { class_idx, proto_idx, name_idx });
    }

    // Field table is only needed for index validation in class data.
    table(data, h.field_ids, 8, "field_ids")?;
    let field_count = h.field_ids.0 as usize;

    let mut classes = Vec::new();
    let mut r = table(data, h.class_defs, 32, "class_defs")?;
    for _ in 0..h.class_defs.0 {
        let pos = r.pos();
        let class_idx = r.u32()?;
        check_index(class_idx, type_descriptors.len(), "type", pos)?;
        for _ in 0..5 {
            r.u32()?;
        }
        let class_data_off = r.u32()?;
        r.u32()?;
        let methods = if class_data_off == 0 {
            Vec::new()
        } else {
            parse_class_data(data, class_data_off as usize, method_refs.len(), field_count, &mut budget)?
        };
        classes.push(ClassDef { descriptor: type_descriptors[class_idx as usize].clone(), methods });
    }

    Ok(DexFile { version: h.version, strings, type_descriptors, protos, method_refs, classes, diagnostics })
}

fn parse_class_data(
    data: &[u8],
    off: usize,
    method_count: usize,
    field_count: usize,
    budget: &mut Budget,
) -> Result<Vec<EncodedMethod>, DexError> {
    let mut r = Reader::at(data, off, "class_data")?;
    let static_fields = r.uleb128()?;
    let instance_fields = r.uleb128()?;
    let direct = r.uleb128()?;
    let virt = r.uleb128()?;
    for n in [static_fields, instance_fields] {
        let mut idx: u32 = 0;
        for _ in 0..n {
            let pos = r.pos();
            budget.spend(1, pos)?;
            idx = idx.wrapping_add(r.uleb128()?);
            check_index(idx, field_count, "field", pos)?;
            r.uleb128()?;
        }
    }
    let mut methods = Vec::new();
    for n in [direct, virt] {
        let mut idx: u32 = 0;
        for _ in 0..n {
            let pos = r.pos();
            budget.spend(1, pos)?;
            idx = idx.wrapping_add(r.uleb128()?);
            check_index(idx, method_count, "method", pos)?;
            let access_flags = r.uleb128()?;
            let code_off = r.uleb128()?;
            let code = if code_off == 0 { None } else { Some(parse_code_item(data, code_off as usize, budget)?) };
            methods.push(EncodedMethod { method_idx: idx, access_flags, code });
        }
    }
    Ok(methods)
}

fn parse_code_item(data: &[u8], off: usize, budget: &mut Budget) -> Result<Vec<u16>, DexError> {
    let mut r = Reader::at(data, off, "code_item")?;
    // registers, ins, outs, tries, debug_info_off
    for _ in 0..4 {
        r.u16()?;
    }
    r.u32()?;
    let units = r.u32()?;
    let start = r.pos();
    if start as u64 + u64::from(units) * 2 > data.len() as u64 {
        return Err(DexError::TruncatedSection {
            offset: start as u64,
            section: "insns",
            needed: u64::from(units) * 2,
            file_len: data.len() as u64,
        });
    }
    budget.spend(u64::from(units), start)?;
    (0..units).map(|_| r.u16()).collect()
}
