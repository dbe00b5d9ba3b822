//! Token output file.
//!
//! Layout, all little-endian: `b"FAS3"`, version `u16`, `T: u32`, `d: u32`,
//! then feats (T×d) and centers (T×3) row-major, then the CRC-32 of those two
//! blocks. Version 1 stores `f64`, version 2 stores `f32`.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::TokenMatrix;

pub const MAGIC: &[u8; 4] = b"FAS3";
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64 = 1,
    F32 = 2,
}

impl Precision {
    fn bytes(self) -> usize {
        match self {
            Precision::F64 => 8,
            Precision::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenHeader {
    pub precision: Precision,
    pub tokens: u32,
    pub width: u32,
    pub checksum: u32,
}

pub fn encode_tokens(tokens: &TokenMatrix, precision: Precision) -> Vec<u8> {
    let (t, d) = tokens.feats.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + (t * (d + 3)) * precision.bytes() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(precision as u16).to_le_bytes());
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for &v in tokens.feats.iter().chain(tokens.centers.iter()) {
        match precision {
            Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
            Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    let crc = crc32fast::hash(&out[HEADER_LEN..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Parse and check the header against the total length; the checksum is read
/// but not verified.
pub fn decode_header(bytes: &[u8]) -> Result<TokenHeader> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::parse(format!("byte {}", bytes.len()), "file shorter than the header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::parse("byte 0", "bad magic"));
    }
    let precision = match u16::from_le_bytes([bytes[4], bytes[5]]) {
        1 => Precision::F64,
        2 => Precision::F32,
        v => return Err(Error::parse("byte 4", format!("unknown version {v}"))),
    };
    let tokens = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let width = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
    let payload = tokens as usize * (width as usize + 3) * precision.bytes();
    let expected = HEADER_LEN + payload + 4;
    if bytes.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: bytes.len(),
        });
    }
    let checksum = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
    Ok(TokenHeader {
        precision,
        tokens,
        width,
        checksum,
    })
}

pub fn decode_tokens(bytes: &[u8]) -> Result<TokenMatrix> {
    let h = decode_header(bytes)?;
    let payload = &bytes[HEADER_LEN..bytes.len() - 4];
    let computed = crc32fast::hash(payload);
    if computed != h.checksum {
        return Err(Error::ChecksumMismatch {
            stored: h.checksum,
            computed,
        });
    }
    let vals: Vec<f64> = match h.precision {
        Precision::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Precision::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    let (t, d) = (h.tokens as usize, h.width as usize);
    let feats = Array2::from_shape_vec((t, d), vals[..t * d].to_vec()).expect("length checked");
    let centers = Array2::from_shape_vec((t, 3), vals[t * d..].to_vec()).expect("length checked");
    TokenMatrix::new(feats, centers)
}

pub fn write_tokens(path: impl AsRef<Path>, tokens: &TokenMatrix, precision: Precision) -> Result<()> {
    fs::write(path, encode_tokens(tokens, precision))?;
    Ok(())
}

pub fn read_tokens(path: impl AsRef<Path>) -> Result<TokenMatrix> {
    decode_tokens(&fs::read(path)?)
}

pub fn inspect_tokens(path: impl AsRef<Path>) -> Result<TokenHeader> {
    decode_header(&fs::read(path)?)
}
