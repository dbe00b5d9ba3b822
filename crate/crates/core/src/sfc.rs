//! Grid quantization and space-filling-curve serialization.
//!
//! Four traversals are supported: Z-order (Morton), Hilbert, and their
//! transposed variants, which swap the x and y axes before encoding.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::types::bounding_box;

/// Bit depth used when none is given.
pub const DEFAULT_BITS: u32 = 10;

/// A cell on a `2^bits` integer grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridCoord {
    pub x: u32,
    pub y: u32,
    pub z: u32,
    pub bits: u32,
}

impl GridCoord {
    pub fn new(x: u32, y: u32, z: u32, bits: u32) -> Self {
        debug_assert!((1..=16).contains(&bits));
        debug_assert!(x >> bits == 0 && y >> bits == 0 && z >> bits == 0);
        GridCoord { x, y, z, bits }
    }

    pub fn manhattan(&self, other: &GridCoord) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) + self.z.abs_diff(other.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveKind {
    ZOrder,
    ZOrderT,
    Hilbert,
    HilbertT,
}

impl CurveKind {
    /// The four traversals in fusion order.
    pub const ALL: [CurveKind; 4] = [
        CurveKind::ZOrder,
        CurveKind::ZOrderT,
        CurveKind::Hilbert,
        CurveKind::HilbertT,
    ];

    pub fn is_transposed(self) -> bool {
        matches!(self, CurveKind::ZOrderT | CurveKind::HilbertT)
    }

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::ZOrder => "z",
            CurveKind::ZOrderT => "z-trans",
            CurveKind::Hilbert => "hilbert",
            CurveKind::HilbertT => "hilbert-trans",
        }
    }
}

/// What to do when every input shares one coordinate on an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtentPolicy {
    /// Map the flat axis to grid coordinate 0.
    #[default]
    Collapse,
    /// Report [`Error::DegenerateExtent`].
    Strict,
}

/// Normalize to the bounding box of `centers` and quantize onto a `2^bits` grid:
/// `floor((2^bits - 1) * (c - c_min) / (c_max - c_min))` per axis.
pub fn quantize(centers: ArrayView2<f64>, bits: u32, policy: ExtentPolicy) -> Result<Vec<GridCoord>> {
    if !(1..=16).contains(&bits) {
        return Err(Error::InvalidBitDepth(bits));
    }
    if centers.ncols() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "centers must be K×3, got K×{}",
            centers.ncols()
        )));
    }
    if let Some(i) = centers
        .outer_iter()
        .position(|r| r.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFiniteCoordinate(i));
    }
    if centers.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (lo, hi) = bounding_box(centers);
    let top = ((1u32 << bits) - 1) as f64;
    let mut scale = [0.0; 3];
    for a in 0..3 {
        let extent = hi[a] - lo[a];
        if extent > 0.0 {
            scale[a] = top / extent;
        } else if policy == ExtentPolicy::Strict {
            return Err(Error::DegenerateExtent(a));
        }
    }
    let cell = |v: f64, a: usize| -> u32 { ((v - lo[a]) * scale[a]).floor().clamp(0.0, top) as u32 };
    Ok(centers
        .outer_iter()
        .map(|r| GridCoord::new(cell(r[0], 0), cell(r[1], 1), cell(r[2], 2), bits))
        .collect())
}

/// Spread the low 21 bits of `v` so that bit `j` lands at bit `3j`.
fn spread3(v: u32) -> u64 {
    let mut x = v as u64 & 0x1f_ffff;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

fn compact3(v: u64) -> u32 {
    let mut x = v & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x | (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x as u32
}

/// Bit-interleaved Morton key: x at bit `3j`, y at `3j+1`, z at `3j+2`.
pub fn morton_encode(g: GridCoord) -> u64 {
    spread3(g.x) | (spread3(g.y) << 1) | (spread3(g.z) << 2)
}

pub fn morton_decode(key: u64, bits: u32) -> GridCoord {
    GridCoord::new(compact3(key), compact3(key >> 1), compact3(key >> 2), bits)
}

/// 3D Hilbert index in `[0, 2^(3*bits))`.
///
/// Uses Skilling's transpose form: undo the per-level rotations/reflections,
/// Gray-encode across axes, then read the transposed bits out MSB first.
pub fn hilbert_encode(g: GridCoord) -> u64 {
    let bits = g.bits;
    let mut x = [g.x, g.y, g.z];
    let top = 1u32 << (bits - 1);

    let mut q = top;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }

    for i in 1..3 {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = top;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in &mut x {
        *v ^= t;
    }

    let mut key = 0u64;
    for j in (0..bits).rev() {
        for v in &x {
            key = (key << 1) | ((v >> j) & 1) as u64;
        }
    }
    key
}

/// Inverse of [`hilbert_encode`].
pub fn hilbert_decode(key: u64, bits: u32) -> GridCoord {
    let mut x = [0u32; 3];
    let mut shift = 3 * bits;
    for j in (0..bits).rev() {
        for v in &mut x {
            shift -= 1;
            *v |= (((key >> shift) & 1) as u32) << j;
        }
    }

    let n = 2u32 << (bits - 1);
    let t = x[2] >> 1;
    for i in (1..3).rev() {
        x[i] ^= x[i - 1];
    }
    x[0] ^= t;

    let mut q = 2;
    while q != n {
        let p = q - 1;
        for i in (0..3).rev() {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q <<= 1;
    }
    GridCoord::new(x[0], x[1], x[2], bits)
}

/// Swap x and y for transposed curve kinds; identity otherwise.
pub fn transpose_coords(g: GridCoord, kind: CurveKind) -> GridCoord {
    if kind.is_transposed() {
        GridCoord { x: g.y, y: g.x, ..g }
    } else {
        g
    }
}

/// Curve key of a grid cell for the given traversal.
pub fn encode(g: GridCoord, kind: CurveKind) -> u64 {
    let g = transpose_coords(g, kind);
    match kind {
        CurveKind::ZOrder | CurveKind::ZOrderT => morton_encode(g),
        CurveKind::Hilbert | CurveKind::HilbertT => hilbert_encode(g),
    }
}

/// Inverse of [`encode`].
pub fn decode(key: u64, bits: u32, kind: CurveKind) -> GridCoord {
    let g = match kind {
        CurveKind::ZOrder | CurveKind::ZOrderT => morton_decode(key, bits),
        CurveKind::Hilbert | CurveKind::HilbertT => hilbert_decode(key, bits),
    };
    transpose_coords(g, kind)
}

/// One traversal order over K items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveOrder {
    pub kind: CurveKind,
    pub keys: Vec<u64>,
    /// `perm[i]` is the item at sorted position `i`.
    pub perm: Vec<usize>,
    /// `inv_perm[item]` is the sorted position of `item`.
    pub inv_perm: Vec<usize>,
}

impl CurveOrder {
    /// Stable argsort of `keys` (ties keep original index order).
    pub fn from_keys(kind: CurveKind, keys: Vec<u64>) -> Self {
        let mut pairs: Vec<(u64, usize)> = keys.iter().copied().zip(0..).collect();
        pairs.sort_unstable();
        let perm: Vec<usize> = pairs.into_iter().map(|(_, i)| i).collect();
        let mut inv_perm = vec![0; perm.len()];
        for (pos, &item) in perm.iter().enumerate() {
            inv_perm[item] = pos;
        }
        CurveOrder {
            kind,
            keys,
            perm,
            inv_perm,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Rows of `x` in curve order.
    pub fn gather(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        for (pos, &item) in self.perm.iter().enumerate() {
            out.row_mut(pos).assign(&x.row(item));
        }
        out
    }

    /// Undo [`CurveOrder::gather`].
    pub fn scatter(&self, sorted: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(sorted.raw_dim());
        for (pos, &item) in self.perm.iter().enumerate() {
            out.row_mut(item).assign(&sorted.row(pos));
        }
        out
    }
}

fn order_from_grid(grid: &[GridCoord], kind: CurveKind) -> CurveOrder {
    CurveOrder::from_keys(kind, grid.iter().map(|&g| encode(g, kind)).collect())
}

/// Quantize, encode and argsort `centers` along one curve.
pub fn serialize(
    centers: ArrayView2<f64>,
    kind: CurveKind,
    bits: u32,
    policy: ExtentPolicy,
) -> Result<CurveOrder> {
    let grid = quantize(centers, bits, policy)?;
    Ok(order_from_grid(&grid, kind))
}

/// All four traversals of `centers`, sharing one quantization.
pub fn serialize_all(centers: ArrayView2<f64>, bits: u32, policy: ExtentPolicy) -> Result<Vec<CurveOrder>> {
    let grid = quantize(centers, bits, policy)?;
    Ok(CurveKind::ALL
        .iter()
        .map(|&kind| order_from_grid(&grid, kind))
        .collect())
}
