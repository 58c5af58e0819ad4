use super::opcodes::{self, FILL_ARRAY_DATA_PAYLOAD, PACKED_SWITCH_PAYLOAD, SPARSE_SWITCH_PAYLOAD};
use super::{Diagnostic, DiagnosticKind, DexFile};
use crate::model::CallEdge;

/// One decoded instruction. Payload pseudo-instructions are never yielded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Insn<'a> {
    pub offset: usize,
    pub opcode: u8,
    pub units: &'a [u16],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkError {
    UnknownOpcode { offset: usize, opcode: u8 },
    Truncated { offset: usize },
}

/// Linear walk over a code item. Stops after the first error.
pub struct Instructions<'a> {
    code: &'a [u16],
    pc: usize,
    done: bool,
}

impl<'a> Instructions<'a> {
    pub fn new(code: &'a [u16]) -> Self {
        Instructions { code, pc: 0, done: false }
    }

    fn payload_width(&self, ident: u16) -> Option<u64> {
        let at = |i: usize| self.code.get(self.pc + i).map(|&u| u64::from(u));
        match ident {
            PACKED_SWITCH_PAYLOAD => Some(4 + at(1)? * 2),
            SPARSE_SWITCH_PAYLOAD => Some(2 + at(1)? * 4),
            FILL_ARRAY_DATA_PAYLOAD => {
                let elem = at(1)?;
                let count = at(2)? | (at(3)? << 16);
                Some(4 + (count * elem + 1) / 2)
            }
            _ => None,
        }
    }
}

impl<'a> Iterator for Instructions<'a> {
    type Item = Result<Insn<'a>, WalkError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done || self.pc >= self.code.len() {
                return None;
            }
            let offset = self.pc;
            let unit = self.code[offset];
            let opcode = (unit & 0xff) as u8;
            if matches!(unit, PACKED_SWITCH_PAYLOAD | SPARSE_SWITCH_PAYLOAD | FILL_ARRAY_DATA_PAYLOAD) {
                let remaining = (self.code.len() - offset) as u64;
                match self.payload_width(unit) {
                    Some(w) if w <= remaining => {
                        self.pc += w as usize;
                        continue;
                    }
                    _ => {
                        self.done = true;
                        return Some(Err(WalkError::Truncated { offset }));
                    }
                }
            }
            let Some(width) = opcodes::width(opcode) else {
                self.done = true;
                return Some(Err(WalkError::UnknownOpcode { offset, opcode }));
            };
            if offset + width > self.code.len() {
                self.done = true;
                return Some(Err(WalkError::Truncated { offset }));
            }
            self.pc += width;
            return Some(Ok(Insn { offset, opcode, units: &self.code[offset..offset + width] }));
        }
    }
}

/// Call edges of one DEX file plus per-method decoding problems.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub edges: Vec<CallEdge>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Emits one edge per invoke instruction, ordered by class, then method,
/// then instruction offset. A method whose stream cannot be decoded is
/// abandoned at the failure point and flagged; other methods continue.
pub fn extract_call_edges(dex: &DexFile, app_id: &str) -> Extraction {
    let mut out = Extraction::default();
    for class in &dex.classes {
        for method in &class.methods {
            let Some(code) = &method.code else { continue };
            let location = |offset: usize| {
                let name = dex
                    .method_ref(method.method_idx)
                    .map(|m| format!("{}{}", m.method_name, m.descriptor()))
                    .unwrap_or_default();
                format!("{}->{} @ {:#x}", class.descriptor, name, offset)
            };
            let mut noted_unsupported = false;
            for insn in Instructions::new(code) {
                let insn = match insn {
                    Ok(i) => i,
                    Err(WalkError::UnknownOpcode { offset, opcode }) => {
                        out.diagnostics.push(Diagnostic {
                            kind: DiagnosticKind::UnknownOpcode,
                            location: location(offset),
                            detail: format!("opcode {opcode:#04x}"),
                        });
                        break;
                    }
                    Err(WalkError::Truncated { offset }) => {
                        out.diagnostics.push(Diagnostic {
                            kind: DiagnosticKind::TruncatedInstruction,
                            location: location(offset),
                            detail: "instruction runs past end of code item".into(),
                        });
                        break;
                    }
                };
                if let Some(kind) = opcodes::invoke_kind(insn.opcode) {
                    let idx = u32::from(insn.units[1]);
                    match dex.method_ref(idx) {
                        Some(callee) => out.edges.push(CallEdge {
                            app_id: app_id.to_owned(),
                            caller_class: class.descriptor.clone(),
                            callee,
                            invoke_kind: kind,
                        }),
                        None => {
                            out.diagnostics.push(Diagnostic {
                                kind: DiagnosticKind::BadMethodIndex,
                                location: location(insn.offset),
                                detail: format!("method index {idx} of {}", dex.method_refs.len()),
                            });
                            break;
                        }
                    }
                } else if opcodes::is_polymorphic_or_custom(insn.opcode) && !noted_unsupported {
                    noted_unsupported = true;
                    out.diagnostics.push(Diagnostic {
                        kind: DiagnosticKind::UnsupportedInvoke,
                        location: location(insn.offset),
                        detail: format!("opcode {:#04x} not attributed", insn.opcode),
                    });
                }
            }
        }
    }
    out
}

/// String constants loaded by `const-string` in one code item.
pub(crate) fn const_string_indices(code: &[u16]) -> impl Iterator<Item = u32> + '_ {
    Instructions::new(code).map_while(Result::ok).filter_map(|insn| match insn.opcode {
        opcodes::CONST_STRING => Some(u32::from(insn.units[1])),
        opcodes::CONST_STRING_JUMBO => Some(u32::from(insn.units[1]) | (u32::from(insn.units[2]) << 16)),
        _ => None,
    })
}
