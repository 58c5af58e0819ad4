//! Dalvik instruction widths and the invoke opcode ranges.
//!
//! Widths are in 16-bit code units and follow the standard instruction
//! format table (10x = 1, 22c = 2, 35c/3rc = 3, 45cc/4rcc = 4, 51l = 5, ...).

use crate::model::InvokeKind;

pub const PACKED_SWITCH_PAYLOAD: u16 = 0x0100;
pub const SPARSE_SWITCH_PAYLOAD: u16 = 0x0200;
pub const FILL_ARRAY_DATA_PAYLOAD: u16 = 0x0300;

pub const CONST_STRING: u8 = 0x1a;
pub const CONST_STRING_JUMBO: u8 = 0x1b;

/// Width of the instruction starting with `op`, or `None` for opcodes that
/// are unused in DEX 035-039.
pub fn width(op: u8) -> Option<usize> {
    let w = match op {
        0x00 => 1,                      // nop
        0x01 => 1,                      // move
        0x02 => 2,                      // move/from16
        0x03 => 3,                      // move/16
        0x04 => 1,
        0x05 => 2,
        0x06 => 3,
        0x07 => 1,
        0x08 => 2,
        0x09 => 3,
        0x0a..=0x0e => 1,               // move-result*, move-exception, return-void
        0x0f..=0x11 => 1,               // return*
        0x12 => 1,                      // const/4
        0x13 => 2,                      // const/16
        0x14 => 3,                      // const
        0x15 => 2,                      // const/high16
        0x16 => 2,                      // const-wide/16
        0x17 => 3,                      // const-wide/32
        0x18 => 5,                      // const-wide
        0x19 => 2,                      // const-wide/high16
        0x1a => 2,                      // const-string
        0x1b => 3,                      // const-string/jumbo
        0x1c => 2,                      // const-class
        0x1d | 0x1e => 1,               // monitor-enter/exit
        0x1f | 0x20 => 2,               // check-cast, instance-of
        0x21 => 1,                      // array-length
        0x22 | 0x23 => 2,               // new-instance, new-array
        0x24 | 0x25 => 3,               // filled-new-array(/range)
        0x26 => 3,                      // fill-array-data
        0x27 | 0x28 => 1,               // throw, goto
        0x29 => 2,                      // goto/16
        0x2a => 3,                      // goto/32
        0x2b | 0x2c => 3,               // packed-switch, sparse-switch
        0x2d..=0x31 => 2,               // cmp*
        0x32..=0x3d => 2,               // if-*
        0x44..=0x6d => 2,               // aget/aput/iget/iput/sget/sput
        0x6e..=0x72 => 3,               // invoke-*
        0x74..=0x78 => 3,               // invoke-*/range
        0x7b..=0x8f => 1,               // unops
        0x90..=0xaf => 2,               // binops
        0xb0..=0xcf => 1,               // binop/2addr
        0xd0..=0xe2 => 2,               // binop/lit16, binop/lit8
        0xfa | 0xfb => 4,               // invoke-polymorphic(/range)
        0xfc | 0xfd => 3,               // invoke-custom(/range)
        0xfe | 0xff => 2,               // const-method-handle, const-method-type
        _ => return None,
    };
    Some(w)
}

/// Invoke kind for the method-referencing invoke opcodes.
pub fn invoke_kind(op: u8) -> Option<InvokeKind> {
    match op {
        0x6e | 0x74 => Some(InvokeKind::Virtual),
        0x6f | 0x75 => Some(InvokeKind::Super),
        0x70 | 0x76 => Some(InvokeKind::Direct),
        0x71 | 0x77 => Some(InvokeKind::Static),
        0x72 | 0x78 => Some(InvokeKind::Interface),
        _ => None,
    }
}

pub fn is_polymorphic_or_custom(op: u8) -> bool {
    (0xfa..=0xfd).contains(&op)
}
