//! Named-tensor weights file.
//!
//! Layout, all little-endian: `b"FASW"`, version `u16` (1), tensor count `u32`,
//! then per tensor a `u16` name length, the UTF-8 name, `rows: u32`,
//! `cols: u32` and `rows*cols` `f64` values row-major. A CRC-32 of every byte
//! after the magic closes the file.
//!
//! Dense layers use `{prefix}.{l}.weight` (in×out) and `{prefix}.{l}.bias`
//! (1×out); see [`put_layers`] and [`take_layers`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::SeededWeights;

pub const MAGIC: &[u8; 4] = b"FASW";
const VERSION: u16 = 1;

pub type Tensors = BTreeMap<String, Array2<f64>>;

pub fn encode_weights(tensors: &Tensors) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[4..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(format!("byte {}", self.pos), "truncated weights file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<Tensors> {
    if bytes.len() < 14 || &bytes[..4] != MAGIC {
        return Err(Error::parse("byte 0", "not a weights file"));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(&body[4..]);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::parse("byte 4", format!("unknown version {version}")));
    }
    let count = r.u32()?;
    let mut out = Tensors::new();
    for _ in 0..count {
        let at = r.pos;
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::parse(format!("byte {at}"), "tensor name is not UTF-8"))?
            .to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let data = r.take(rows * cols * 8)?;
        let vals = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.insert(name, Array2::from_shape_vec((rows, cols), vals).expect("sized above"));
    }
    if r.pos != body.len() {
        return Err(Error::parse(format!("byte {}", r.pos), "trailing bytes after last tensor"));
    }
    Ok(out)
}

pub fn write_weights(path: impl AsRef<Path>, tensors: &Tensors) -> Result<()> {
    fs::write(path, encode_weights(tensors))?;
    Ok(())
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<Tensors> {
    decode_weights(&fs::read(path)?)
}

/// Store every layer of `w` under `prefix`.
pub fn put_layers(tensors: &mut Tensors, prefix: &str, w: &SeededWeights) {
    for l in 0..w.num_layers() {
        let (m, b) = w.layer(l);
        tensors.insert(format!("{prefix}.{l}.weight"), m.to_owned());
        tensors.insert(format!("{prefix}.{l}.bias"), b.to_owned().insert_axis(ndarray::Axis(0)));
    }
}

/// Rebuild layers stored by [`put_layers`], requiring the given shapes.
pub fn take_layers(tensors: &Tensors, prefix: &str, shapes: &[(usize, usize)]) -> Result<SeededWeights> {
    let mut values = Vec::new();
    for (l, &(i, o)) in shapes.iter().enumerate() {
        let get = |suffix: &str, want: (usize, usize)| -> Result<&Array2<f64>> {
            let name = format!("{prefix}.{l}.{suffix}");
            let t = tensors
                .get(&name)
                .ok_or_else(|| Error::ShapeMismatch(format!("weights file has no tensor '{name}'")))?;
            if t.dim() != want {
                return Err(Error::ShapeMismatch(format!("'{name}' is {:?}, expected {want:?}", t.dim())));
            }
            Ok(t)
        };
        values.extend(get("weight", (i, o))?.iter());
        values.extend(get("bias", (1, o))?.iter());
    }
    SeededWeights::from_values(shapes.to_vec(), values)
}
