//! Superpoint label files: newline-delimited integers or raw little-endian i32.

use std::fs;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::types::SuperpointPartition;

fn looks_like_text(bytes: &[u8]) -> bool {
    !bytes.is_empty()
        && bytes
            .iter()
            .all(|&b| b.is_ascii_digit() || b.is_ascii_whitespace() || b == b'-' || b == b'+')
}

/// Decode raw labels, sniffing text vs. binary.
pub fn parse_labels(bytes: &[u8]) -> Result<Vec<i64>> {
    if looks_like_text(bytes) {
        let text = std::str::from_utf8(bytes).expect("checked ASCII");
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            out.push(
                t.parse::<i64>()
                    .map_err(|_| Error::parse(format!("line {}", i + 1), format!("bad label '{t}'")))?,
            );
        }
        return Ok(out);
    }
    if bytes.len() % 4 != 0 {
        return Err(Error::parse(
            format!("byte {}", bytes.len() - bytes.len() % 4),
            "binary label file length is not a multiple of 4",
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()) as i64)
        .collect())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    parse_labels(&fs::read(path)?)
}

/// Load labels for the `N` points in `positions` and compact them.
pub fn load_labels(path: impl AsRef<Path>, positions: ArrayView2<f64>) -> Result<SuperpointPartition> {
    let raw = read_labels(path)?;
    if raw.len() != positions.nrows() {
        return Err(Error::LengthMismatch {
            expected: positions.nrows(),
            got: raw.len(),
        });
    }
    SuperpointPartition::compact(&raw, positions)
}

pub fn save_labels_text(path: impl AsRef<Path>, labels: &[i64]) -> Result<()> {
    let mut s = String::with_capacity(labels.len() * 4);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn save_labels_binary(path: impl AsRef<Path>, labels: &[i32]) -> Result<()> {
    let bytes: Vec<u8> = labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}
