//! Single-file binary container shared by trials, processed streams and
//! network checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 4    | magic (`RPCT`, `RPCP` or `RPCK`)          |
//! | 4      | 4    | format version, `u32`                     |
//! | 8      | 8    | JSON header length `h`, `u64`             |
//! | 16     | h    | UTF-8 JSON header                         |
//! | 16 + h | 8    | payload length `p`, `u64`                 |
//! | 24 + h | p    | payload, blocks described by the header   |
//!
//! Readers reject unknown magic, newer versions and any length that does
//! not match the file exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const TRIAL_MAGIC: [u8; 4] = *b"RPCT";
pub const PROCESSED_MAGIC: [u8; 4] = *b"RPCP";
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RPCK";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode<H: Serialize>(magic: [u8; 4], header: &H, payload: &[u8]) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(24 + header.len() + payload.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

fn read_u64(bytes: &[u8], at: usize) -> Result<u64> {
    bytes
        .get(at..at + 8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Corrupt(format!("file ends inside a length field at byte {at}")))
}

/// Splits a container into its parsed header and raw payload.
pub fn decode<H: DeserializeOwned>(magic: [u8; 4], bytes: &[u8]) -> Result<(H, &[u8])> {
    if bytes.len() < 16 {
        return Err(Error::Corrupt(format!("{} bytes is shorter than the fixed preamble", bytes.len())));
    }
    if bytes[..4] != magic {
        return Err(Error::Corrupt(format!(
            "magic {:?} does not match expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version > FORMAT_VERSION || version == 0 {
        return Err(Error::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    let header_len = read_u64(bytes, 8)? as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Corrupt("header extends past the end of the file".into()))?;
    let payload_len = read_u64(bytes, header_end)? as usize;
    let payload_start = header_end + 8;
    if bytes.len() - payload_start != payload_len {
        return Err(Error::Corrupt(format!(
            "payload declares {payload_len} bytes but {} are present",
            bytes.len() - payload_start
        )));
    }
    let header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::Corrupt(format!("unreadable header: {e}")))?;
    Ok((header, &bytes[payload_start..]))
}

/// Writes atomically: the data goes to a sibling temporary file that is
/// then renamed over `path`.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::file(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::file(path, e))
}

/// Little-endian block writer/reader helpers for payloads.
pub(crate) struct PayloadWriter {
    pub bytes: Vec<u8>,
}

impl PayloadWriter {
    pub fn new() -> Self {
        Self { bytes: Vec::new() }
    }

    pub fn f32s(&mut self, values: impl IntoIterator<Item = f32>) {
        for v in values {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn f64s(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn i16s(&mut self, values: impl IntoIterator<Item = i16>) {
        for v in values {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn u8s(&mut self, values: impl IntoIterator<Item = u8>) {
        self.bytes.extend(values);
    }
}

pub(crate) struct PayloadReader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, at: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Corrupt(format!("payload too short: need {n} bytes at offset {}", self.at))
        })?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self.take(n * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn i16s(&mut self, n: usize) -> Result<Vec<i16>> {
        Ok(self.take(n * 2)?.chunks_exact(2).map(|c| i16::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn u8s(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(Error::Corrupt(format!("{} trailing payload bytes", self.bytes.len() - self.at)));
        }
        Ok(())
    }
}
