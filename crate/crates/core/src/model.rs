//! Shared identities: method references, call edges and the type-descriptor
//! grammar used by both the DEX frontend and the call-log frontend.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Fully qualified callee identity.
///
/// Equality covers all four fields, so overloads that differ only in
/// parameter or return types are distinct methods.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodRef {
    pub class_descriptor: String,
    pub method_name: String,
    pub param_descriptors: Vec<String>,
    pub return_descriptor: String,
}

impl MethodRef {
    pub fn new(
        class_descriptor: impl Into<String>,
        method_name: impl Into<String>,
        param_descriptors: Vec<String>,
        return_descriptor: impl Into<String>,
    ) -> Self {
        MethodRef {
            class_descriptor: class_descriptor.into(),
            method_name: method_name.into(),
            param_descriptors,
            return_descriptor: return_descriptor.into(),
        }
    }

    /// Builds a reference from a `(params)ret` method descriptor.
    pub fn from_descriptor(
        class_descriptor: &str,
        method_name: &str,
        descriptor: &str,
    ) -> Result<Self, DescriptorError> {
        if !is_class_descriptor(class_descriptor) && !is_array_descriptor(class_descriptor) {
            return Err(DescriptorError::new(class_descriptor, "not a class descriptor"));
        }
        if method_name.is_empty() {
            return Err(DescriptorError::new(method_name, "empty method name"));
        }
        let (params, ret) = parse_method_descriptor(descriptor)?;
        Ok(MethodRef::new(class_descriptor, method_name, params, ret))
    }

    /// The `(params)ret` form, e.g. `(Ljava/lang/String;I)V`.
    pub fn descriptor(&self) -> String {
        let mut out = String::from("(");
        for p in &self.param_descriptors {
            out.push_str(p);
        }
        out.push(')');
        out.push_str(&self.return_descriptor);
        out
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}{}", self.class_descriptor, self.method_name, self.descriptor())
    }
}

/// Invoke flavour. Range variants collapse onto the same five kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvokeKind {
    Virtual,
    Super,
    Direct,
    Static,
    Interface,
}

impl InvokeKind {
    pub const ALL: [InvokeKind; 5] = [
        InvokeKind::Virtual,
        InvokeKind::Super,
        InvokeKind::Direct,
        InvokeKind::Static,
        InvokeKind::Interface,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InvokeKind::Virtual => "virtual",
            InvokeKind::Super => "super",
            InvokeKind::Direct => "direct",
            InvokeKind::Static => "static",
            InvokeKind::Interface => "interface",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        InvokeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for InvokeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One observed invocation inside an app.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallEdge {
    pub app_id: String,
    pub caller_class: String,
    pub callee: MethodRef,
    pub invoke_kind: InvokeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad descriptor {descriptor:?}: {reason}")]
pub struct DescriptorError {
    pub descriptor: String,
    pub reason: &'static str,
}

impl DescriptorError {
    fn new(descriptor: &str, reason: &'static str) -> Self {
        DescriptorError { descriptor: descriptor.to_owned(), reason }
    }
}

/// `L...;` with a non-empty body and no forbidden characters.
pub fn is_class_descriptor(s: &str) -> bool {
    let Some(body) = s.strip_prefix('L').and_then(|r| r.strip_suffix(';')) else {
        return false;
    };
    !body.is_empty()
        && !body.contains([';', '.', '[', '(', ')'])
        && body.split('/').all(|seg| !seg.is_empty())
}

fn is_array_descriptor(s: &str) -> bool {
    let elem = s.trim_start_matches('[');
    elem.len() < s.len() && s.len() - elem.len() <= 255 && is_field_type(elem)
}

fn is_primitive(s: &str) -> bool {
    matches!(s, "Z" | "B" | "S" | "C" | "I" | "J" | "F" | "D")
}

/// Any descriptor valid as a field or parameter type.
pub fn is_field_type(s: &str) -> bool {
    is_primitive(s) || is_class_descriptor(s) || is_array_descriptor(s)
}

/// Any descriptor valid in a DEX type table (field types plus `V`).
pub fn is_type_descriptor(s: &str) -> bool {
    s == "V" || is_field_type(s)
}

/// Splits a concatenated run of field-type descriptors.
pub fn split_type_list(mut s: &str) -> Result<Vec<String>, DescriptorError> {
    let orig = s;
    let mut out = Vec::new();
    while !s.is_empty() {
        let dims = s.len() - s.trim_start_matches('[').len();
        let rest = &s[dims..];
        let elem_len = match rest.as_bytes().first() {
            Some(b'L') => match rest.find(';') {
                Some(i) => i + 1,
                None => return Err(DescriptorError::new(orig, "unterminated class type")),
            },
            Some(c) if is_primitive(std::str::from_utf8(&[*c]).unwrap_or("")) => 1,
            _ => return Err(DescriptorError::new(orig, "unexpected character in type list")),
        };
        let ty = &s[..dims + elem_len];
        if !is_field_type(ty) {
            return Err(DescriptorError::new(orig, "invalid field type"));
        }
        out.push(ty.to_owned());
        s = &s[dims + elem_len..];
    }
    Ok(out)
}

/// Parses `(params)ret` into parameter and return descriptors.
pub fn parse_method_descriptor(s: &str) -> Result<(Vec<String>, String), DescriptorError> {
    let inner = s
        .strip_prefix('(')
        .ok_or_else(|| DescriptorError::new(s, "missing '('"))?;
    let close = inner.find(')').ok_or_else(|| DescriptorError::new(s, "missing ')'"))?;
    let params = split_type_list(&inner[..close])?;
    let ret = &inner[close + 1..];
    if !is_type_descriptor(ret) {
        return Err(DescriptorError::new(s, "invalid return type"));
    }
    Ok((params, ret.to_owned()))
}

/// `Lcom/example/Foo;` -> `com.example.Foo`.
pub fn descriptor_to_java(desc: &str) -> String {
    desc.strip_prefix('L')
        .and_then(|d| d.strip_suffix(';'))
        .unwrap_or(desc)
        .replace('/', ".")
}

/// Package of a class descriptor in slash form (`Lcom/a/B;` -> `com/a`);
/// empty for the default package.
pub fn package_of(desc: &str) -> &str {
    let body = desc.strip_prefix('L').and_then(|d| d.strip_suffix(';')).unwrap_or("");
    body.rfind('/').map(|i| &body[..i]).unwrap_or("")
}
