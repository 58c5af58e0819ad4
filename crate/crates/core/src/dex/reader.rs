use super::DexError;

/// Bounds-checked little-endian cursor over a DEX image.
#[derive(Clone)]
pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    pub fn at(data: &'a [u8], pos: usize, section: &'static str) -> Result<Self, DexError> {
        if pos > data.len() {
            return Err(DexError::TruncatedSection {
                offset: pos as u64,
                section,
                needed: 0,
                file_len: data.len() as u64,
            });
        }
        Ok(Reader { data, pos, section })
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or(
            DexError::TruncatedSection {
                offset: self.pos as u64,
                section: self.section,
                needed: n as u64,
                file_len: self.data.len() as u64,
            },
        )?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DexError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DexError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32, DexError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn uleb128(&mut self) -> Result<u32, DexError> {
        let start = self.pos;
        let mut result: u32 = 0;
        for i in 0..5 {
            let byte = self.u8()?;
            result |= u32::from(byte & 0x7f) << (7 * i);
            if byte & 0x80 == 0 {
                return Ok(result);
            }
        }
        Err(DexError::MalformedData { offset: start as u64, reason: "uleb128 longer than 5 bytes" })
    }

    /// Reads bytes up to (not including) the next NUL and consumes the NUL.
    pub fn c_str(&mut self) -> Result<&'a [u8], DexError> {
        let rest = &self.data[self.pos..];
        match rest.iter().position(|&b| b == 0) {
            Some(n) => {
                let s = &rest[..n];
                self.pos += n + 1;
                Ok(s)
            }
            None => Err(DexError::TruncatedSection {
                offset: self.pos as u64,
                section: self.section,
                needed: rest.len() as u64 + 1,
                file_len: self.data.len() as u64,
            }),
        }
    }
}

/// Decodes modified UTF-8. Invalid sequences become U+FFFD; the flag reports
/// whether any replacement happened.
pub(crate) fn decode_mutf8(bytes: &[u8]) -> (String, bool) {
    let mut units: Vec<u16> = Vec::with_capacity(bytes.len());
    let mut lossy = false;
    let mut i = 0;
    while i < bytes.len() {
        let b0 = bytes[i];
        let cont = |j: usize| bytes.get(j).copied().filter(|b| b & 0xc0 == 0x80);
        if b0 < 0x80 {
            units.push(u16::from(b0));
            i += 1;
        } else if b0 & 0xe0 == 0xc0 {
            match cont(i + 1) {
                Some(b1) => {
                    units.push((u16::from(b0 & 0x1f) << 6) | u16::from(b1 & 0x3f));
                    i += 2;
                }
                None => {
                    units.push(0xfffd);
                    lossy = true;
                    i += 1;
                }
            }
        } else if b0 & 0xf0 == 0xe0 {
            match (cont(i + 1), cont(i + 2)) {
                (Some(b1), Some(b2)) => {
                    units.push(
                        (u16::from(b0 & 0x0f) << 12) | (u16::from(b1 & 0x3f) << 6) | u16::from(b2 & 0x3f),
                    );
                    i += 3;
                }
                _ => {
                    units.push(0xfffd);
                    lossy = true;
                    i += 1;
                }
            }
        } else {
            units.push(0xfffd);
            lossy = true;
            i += 1;
        }
    }
    // Unpaired surrogates are also lossy.
    let decoded: String = char::decode_utf16(units.iter().copied())
        .map(|r| {
            r.unwrap_or_else(|_| {
                lossy = true;
                char::REPLACEMENT_CHARACTER
            })
        })
        .collect();
    (decoded, lossy)
}
