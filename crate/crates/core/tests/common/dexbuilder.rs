//! Minimal DEX writer used as a test oracle. It knows nothing about the
//! crate's parser: it lays out the tables from the format description and
//! records the call edges it planted.

use std::collections::{BTreeMap, BTreeSet};

use adscope::{CallEdge, InvokeKind, MethodRef};

const NO_INDEX: u32 = 0xffff_ffff;

#[derive(Debug, Clone)]
pub enum Op {
    Invoke { kind: InvokeKind, range: bool, target: MethodRef },
    /// invoke-polymorphic or invoke-custom: decoded but never an edge.
    Polymorphic { target: MethodRef },
    Custom,
    ConstString(String),
    ConstStringJumbo(String),
    Nop,
    Move,
    ConstWide,
    Goto32,
    PackedSwitch(u16),
    SparseSwitch(u16),
    FillArray { width: u16, count: u32 },
    ReturnVoid,
    /// Raw code units, for hand-made corruption.
    Raw(Vec<u16>),
}

#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub name: String,
    pub params: Vec<String>,
    pub ret: String,
    pub is_virtual: bool,
    /// `None` for abstract/native methods.
    pub body: Option<Vec<Op>>,
}

impl MethodSpec {
    pub fn new(name: &str, desc: &str, body: Vec<Op>) -> Self {
        let (params, ret) = adscope::model::parse_method_descriptor(desc).expect("valid descriptor");
        MethodSpec { name: name.into(), params, ret, is_virtual: false, body: Some(body) }
    }

    pub fn abstract_(name: &str, desc: &str) -> Self {
        MethodSpec { body: None, is_virtual: true, ..Self::new(name, desc, vec![]) }
    }

    pub fn virtual_(mut self) -> Self {
        self.is_virtual = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ClassSpec {
    pub descriptor: String,
    pub methods: Vec<MethodSpec>,
}

#[derive(Debug, Clone, Default)]
pub struct DexBuilder {
    pub version: Option<[u8; 3]>,
    pub classes: Vec<ClassSpec>,
    /// Method references that exist in the table without being defined or
    /// called.
    pub extra_methods: Vec<MethodRef>,
}

fn uleb(out: &mut Vec<u8>, mut v: u32) {
    loop {
        let b = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn mutf8(s: &str) -> Vec<u8> {
    let mut out = Vec::new();
    for c in s.encode_utf16() {
        match c {
            0x0001..=0x007f => out.push(c as u8),
            0x0000 | 0x0080..=0x07ff => {
                out.push(0xc0 | (c >> 6) as u8);
                out.push(0x80 | (c & 0x3f) as u8);
            }
            _ => {
                out.push(0xe0 | (c >> 12) as u8);
                out.push(0x80 | ((c >> 6) & 0x3f) as u8);
                out.push(0x80 | (c & 0x3f) as u8);
            }
        }
    }
    out
}

fn shorty(t: &str) -> char {
    match t.as_bytes()[0] {
        b'L' | b'[' => 'L',
        b => b as char,
    }
}

fn put_u16(buf: &mut [u8], at: usize, v: u16) {
    buf[at..at + 2].copy_from_slice(&v.to_le_bytes());
}

fn put_u32(buf: &mut [u8], at: usize, v: u32) {
    buf[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

fn align4(v: &mut Vec<u8>) {
    while v.len() % 4 != 0 {
        v.push(0);
    }
}

type ProtoKey = (String, Vec<String>);

impl DexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn class(mut self, descriptor: &str, methods: Vec<MethodSpec>) -> Self {
        self.classes.push(ClassSpec { descriptor: descriptor.into(), methods });
        self
    }

    fn own_ref(class: &ClassSpec, m: &MethodSpec) -> MethodRef {
        MethodRef::new(class.descriptor.clone(), m.name.clone(), m.params.clone(), m.ret.clone())
    }

    /// Edges a correct extractor must return, in class, method, offset order.
    pub fn planted_edges(&self, app_id: &str) -> Vec<CallEdge> {
        let mut out = Vec::new();
        for c in &self.classes {
            // class_data lists direct methods then virtual ones, each sorted by
            // method index, which is (class, name, proto) order.
            let mut ordered: Vec<&MethodSpec> = c.methods.iter().collect();
            ordered.sort_by_key(|m| (m.is_virtual, self.method_sort_key(c, m)));
            for m in ordered {
                for op in m.body.iter().flatten() {
                    if let Op::Invoke { kind, target, .. } = op {
                        out.push(CallEdge {
                            app_id: app_id.into(),
                            caller_class: c.descriptor.clone(),
                            callee: target.clone(),
                            invoke_kind: *kind,
                        });
                    }
                }
            }
        }
        out
    }

    fn method_sort_key(&self, c: &ClassSpec, m: &MethodSpec) -> (String, String, String, Vec<String>) {
        // Sort keys mirror the index order used by build(); string order of
        // MUTF-8 bytes equals code-point order for the ASCII names used here.
        (c.descriptor.clone(), m.name.clone(), m.ret.clone(), m.params.clone())
    }

    fn all_refs(&self) -> BTreeSet<MethodRef> {
        let mut refs: BTreeSet<MethodRef> = self.extra_methods.iter().cloned().collect();
        for c in &self.classes {
            for m in &c.methods {
                refs.insert(Self::own_ref(c, m));
                for op in m.body.iter().flatten() {
                    match op {
                        Op::Invoke { target, .. } | Op::Polymorphic { target } => {
                            refs.insert(target.clone());
                        }
                        _ => {}
                    }
                }
            }
        }
        refs
    }

    pub fn build(&self) -> Vec<u8> {
        let refs = self.all_refs();

        // Strings: descriptors, names, shorties, constants.
        let mut strings: BTreeSet<String> = BTreeSet::new();
        let mut types: BTreeSet<String> = BTreeSet::new();
        let mut protos: BTreeSet<ProtoKey> = BTreeSet::new();
        for c in &self.classes {
            types.insert(c.descriptor.clone());
            for m in &c.methods {
                for op in m.body.iter().flatten() {
                    if let Op::ConstString(s) | Op::ConstStringJumbo(s) = op {
                        strings.insert(s.clone());
                    }
                }
            }
        }
        for r in &refs {
            types.insert(r.class_descriptor.clone());
            types.insert(r.return_descriptor.clone());
            types.extend(r.param_descriptors.iter().cloned());
            strings.insert(r.method_name.clone());
            protos.insert((r.return_descriptor.clone(), r.param_descriptors.clone()));
        }
        let shorty_of = |(ret, params): &ProtoKey| -> String {
            std::iter::once(shorty(ret)).chain(params.iter().map(|p| shorty(p))).collect()
        };
        for p in &protos {
            strings.insert(shorty_of(p));
        }
        strings.extend(types.iter().cloned());

        // Index tables. BTreeSet order on String is byte order, which the
        // format requires for string_ids and type_ids.
        let string_idx: BTreeMap<&str, u32> = strings.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        let type_list: Vec<&String> = types.iter().collect();
        let type_idx: BTreeMap<&str, u32> = type_list.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        let mut proto_list: Vec<&ProtoKey> = protos.iter().collect();
        proto_list.sort_by_key(|(ret, params)| {
            (type_idx[ret.as_str()], params.iter().map(|p| type_idx[p.as_str()]).collect::<Vec<_>>())
        });
        let proto_idx: BTreeMap<&ProtoKey, u32> = proto_list.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();
        let mut method_list: Vec<&MethodRef> = refs.iter().collect();
        method_list.sort_by_key(|r| {
            (
                type_idx[r.class_descriptor.as_str()],
                string_idx[r.method_name.as_str()],
                proto_idx[&(r.return_descriptor.clone(), r.param_descriptors.clone())],
            )
        });
        let method_idx: BTreeMap<&MethodRef, u32> =
            method_list.iter().enumerate().map(|(i, r)| (*r, i as u32)).collect();

        let n_str = strings.len();
        let n_type = type_list.len();
        let n_proto = proto_list.len();
        let n_meth = method_list.len();
        let n_class = self.classes.len();

        let string_ids_off = 0x70;
        let type_ids_off = string_ids_off + 4 * n_str;
        let proto_ids_off = type_ids_off + 4 * n_type;
        let method_ids_off = proto_ids_off + 12 * n_proto;
        let class_defs_off = method_ids_off + 8 * n_meth;
        let data_off = class_defs_off + 32 * n_class;

        let mut out = vec![0u8; data_off];

        // string_data
        for (i, s) in strings.iter().enumerate() {
            let at = out.len() as u32;
            put_u32(&mut out, string_ids_off + 4 * i, at);
            uleb(&mut out, s.encode_utf16().count() as u32);
            out.extend(mutf8(s));
            out.push(0);
        }
        for (i, t) in type_list.iter().enumerate() {
            put_u32(&mut out, type_ids_off + 4 * i, string_idx[t.as_str()]);
        }
        // type lists + proto_ids
        for (i, p) in proto_list.iter().enumerate() {
            let at = proto_ids_off + 12 * i;
            put_u32(&mut out, at, string_idx[shorty_of(p).as_str()]);
            put_u32(&mut out, at + 4, type_idx[p.0.as_str()]);
            if p.1.is_empty() {
                put_u32(&mut out, at + 8, 0);
            } else {
                align4(&mut out);
                let list_off = out.len() as u32;
                out.extend((p.1.len() as u32).to_le_bytes());
                for t in &p.1 {
                    out.extend((type_idx[t.as_str()] as u16).to_le_bytes());
                }
                put_u32(&mut out, at + 8, list_off);
            }
        }
        for (i, r) in method_list.iter().enumerate() {
            let at = method_ids_off + 8 * i;
            put_u16(&mut out, at, type_idx[r.class_descriptor.as_str()] as u16);
            put_u16(&mut out, at + 2, proto_idx[&(r.return_descriptor.clone(), r.param_descriptors.clone())] as u16);
            put_u32(&mut out, at + 4, string_idx[r.method_name.as_str()]);
        }

        // code items, then class_data
        let mut code_offs: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for (ci, c) in self.classes.iter().enumerate() {
            for (mi, m) in c.methods.iter().enumerate() {
                let Some(body) = &m.body else { continue };
                let insns = encode(body, &string_idx, &method_idx);
                align4(&mut out);
                code_offs.insert((ci, mi), out.len() as u32);
                out.extend(16u16.to_le_bytes()); // registers
                out.extend((m.params.len() as u16).to_le_bytes()); // ins
                out.extend(5u16.to_le_bytes()); // outs
                out.extend(0u16.to_le_bytes()); // tries
                out.extend(0u32.to_le_bytes()); // debug info
                out.extend((insns.len() as u32).to_le_bytes());
                for u in insns {
                    out.extend(u.to_le_bytes());
                }
            }
        }
        for (ci, c) in self.classes.iter().enumerate() {
            let at = class_defs_off + 32 * ci;
            put_u32(&mut out, at, type_idx[c.descriptor.as_str()]);
            put_u32(&mut out, at + 4, 0x1); // public
            put_u32(&mut out, at + 8, NO_INDEX);
            put_u32(&mut out, at + 12, 0);
            put_u32(&mut out, at + 16, NO_INDEX);
            put_u32(&mut out, at + 20, 0);
            put_u32(&mut out, at + 28, 0);
            if c.methods.is_empty() {
                put_u32(&mut out, at + 24, 0);
                continue;
            }
            let mut direct: Vec<(u32, usize)> = Vec::new();
            let mut virt: Vec<(u32, usize)> = Vec::new();
            for (mi, m) in c.methods.iter().enumerate() {
                let idx = method_idx[&Self::own_ref(c, m)];
                if m.is_virtual { virt.push((idx, mi)) } else { direct.push((idx, mi)) }
            }
            direct.sort();
            virt.sort();
            let class_data_off = out.len() as u32;
            put_u32(&mut out, at + 24, class_data_off);
            uleb(&mut out, 0);
            uleb(&mut out, 0);
            uleb(&mut out, direct.len() as u32);
            uleb(&mut out, virt.len() as u32);
            for list in [&direct, &virt] {
                let mut prev = 0;
                for (idx, mi) in list.iter() {
                    uleb(&mut out, idx - prev);
                    prev = *idx;
                    let code = code_offs.get(&(ci, *mi)).copied().unwrap_or(0);
                    uleb(&mut out, if code == 0 { 0x401 } else { 0x1 });
                    uleb(&mut out, code);
                }
            }
        }

        // header
        let version = self.version.unwrap_or(*b"035");
        out[..4].copy_from_slice(b"dex\n");
        out[4..7].copy_from_slice(&version);
        let file_size = out.len() as u32;
        put_u32(&mut out, 32, file_size);
        put_u32(&mut out, 36, 0x70);
        put_u32(&mut out, 40, 0x1234_5678);
        for (at, (n, off)) in [
            (56, (n_str, string_ids_off)),
            (64, (n_type, type_ids_off)),
            (72, (n_proto, proto_ids_off)),
            (80, (0, 0)),
            (88, (n_meth, method_ids_off)),
            (96, (n_class, class_defs_off)),
        ] {
            put_u32(&mut out, at, n as u32);
            put_u32(&mut out, at + 4, if n == 0 { 0 } else { off as u32 });
        }
        put_u32(&mut out, 104, file_size - data_off as u32);
        put_u32(&mut out, 108, data_off as u32);
        let checksum = adler32(&out[12..]);
        put_u32(&mut out, 8, checksum);
        out
    }
}

fn adler32(data: &[u8]) -> u32 {
    let (mut a, mut b) = (1u32, 0u32);
    for &d in data {
        a = (a + u32::from(d)) % 65521;
        b = (b + a) % 65521;
    }
    (b << 16) | a
}

fn invoke_opcode(kind: InvokeKind, range: bool) -> u16 {
    let base = match kind {
        InvokeKind::Virtual => 0x6e,
        InvokeKind::Super => 0x6f,
        InvokeKind::Direct => 0x70,
        InvokeKind::Static => 0x71,
        InvokeKind::Interface => 0x72,
    };
    if range { base + 6 } else { base }
}

/// Encodes a method body. Switch and array payloads go after the body,
/// each on a 4-byte boundary, and the referencing instruction points at it.
fn encode(body: &[Op], strings: &BTreeMap<&str, u32>, methods: &BTreeMap<&MethodRef, u32>) -> Vec<u16> {
    let mut code: Vec<u16> = Vec::new();
    let mut fixups: Vec<(usize, Vec<u16>)> = Vec::new();
    for op in body {
        match op {
            Op::Invoke { kind, range, target } => {
                let argc = (target.param_descriptors.len() + 1).min(5) as u16;
                let idx = methods[target] as u16;
                if *range {
                    code.extend([(argc << 8) | invoke_opcode(*kind, true), idx, 0]);
                } else {
                    code.extend([(argc << 12) | invoke_opcode(*kind, false), idx, 0x3210]);
                }
            }
            Op::Polymorphic { target } => code.extend([(2 << 12) | 0xfa, methods[target] as u16, 0x0010, 0]),
            Op::Custom => code.extend([(1 << 12) | 0xfc, 0, 0]),
            Op::ConstString(s) => code.extend([0x001a, strings[s.as_str()] as u16]),
            Op::ConstStringJumbo(s) => {
                let i = strings[s.as_str()];
                code.extend([0x001b, i as u16, (i >> 16) as u16]);
            }
            Op::Nop => code.push(0),
            Op::Move => code.push(0x0001),
            Op::ConstWide => code.extend([0x0018, 1, 2, 3, 4]),
            Op::Goto32 => code.extend([0x002a, 0, 0]),
            Op::PackedSwitch(n) => {
                let at = code.len();
                code.extend([0x002b, 0, 0]);
                let mut payload = vec![0x0100, *n, 0, 0];
                payload.extend(std::iter::repeat(0).take(*n as usize * 2));
                fixups.push((at, payload));
            }
            Op::SparseSwitch(n) => {
                let at = code.len();
                code.extend([0x002c, 0, 0]);
                let mut payload = vec![0x0200, *n];
                payload.extend((0..*n as usize * 4).map(|i| i as u16));
                fixups.push((at, payload));
            }
            Op::FillArray { width, count } => {
                let at = code.len();
                code.extend([0x0026, 0, 0]);
                let mut payload = vec![0x0300, *width, *count as u16, (*count >> 16) as u16];
                let units = (*count as usize * *width as usize).div_ceil(2);
                payload.extend((0..units).map(|i| (i as u16).wrapping_mul(0x0101)));
                fixups.push((at, payload));
            }
            Op::ReturnVoid => code.push(0x000e),
            Op::Raw(units) => code.extend(units),
        }
    }
    if !fixups.is_empty() && !matches!(body.last(), Some(Op::ReturnVoid)) {
        code.push(0x000e);
    }
    for (at, payload) in fixups {
        if code.len() % 2 == 1 {
            code.push(0);
        }
        let rel = (code.len() - at) as u32;
        code[at + 1] = rel as u16;
        code[at + 2] = (rel >> 16) as u16;
        code.extend(payload);
    }
    code
}
