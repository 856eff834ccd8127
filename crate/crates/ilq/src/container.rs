//! Shared framing for the binary files: 4-byte magic, `u32` version,
//! `u32` header length, JSON header, raw little-endian payload.

use crate::error::{IoError, Result};

pub(crate) fn frame(magic: &[u8; 4], version: u32, header: &[u8], payload_hint: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + header.len() + payload_hint);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out
}

/// Sequential reader that names the section it ran out in.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, len: usize, section: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).ok_or(IoError::Truncated { section })?;
        if end > self.bytes.len() {
            return Err(IoError::Truncated { section });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self, section: &'static str) -> Result<u32> {
        let b = self.take(4, section)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn finish(self) -> Result<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            count => Err(IoError::TrailingBytes { count }),
        }
    }
}

/// Validates magic and version, returns the header bytes and the cursor
/// positioned at the payload.
pub(crate) fn open<'a>(bytes: &'a [u8], magic: &'static str, version: u32) -> Result<(&'a [u8], Cursor<'a>)> {
    let mut cur = Cursor::new(bytes);
    let found =
        cur.take(4, "magic").map_err(|_| IoError::BadMagic { expected: magic, found: bytes.to_vec() })?;
    if found != magic.as_bytes() {
        return Err(IoError::BadMagic { expected: magic, found: found.to_vec() });
    }
    let v = cur.u32("version")?;
    if v != version {
        return Err(IoError::UnsupportedVersion { found: v, supported: version });
    }
    let len = cur.u32("header length")? as usize;
    let header = cur.take(len, "header")?;
    Ok((header, cur))
}

pub(crate) fn f32_section(cur: &mut Cursor<'_>, count: usize, section: &'static str) -> Result<Vec<f32>> {
    let len = count.checked_mul(4).ok_or(IoError::Truncated { section })?;
    let raw = cur.take(len, section)?;
    Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}
