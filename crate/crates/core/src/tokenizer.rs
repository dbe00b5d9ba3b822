//! Point-level tokens and superpoint pooling.
//!
//! Each point gets `x = mlp(features) + fourier(position)`; superpoint tokens
//! are the per-superpoint means of those rows.

use std::collections::HashMap;
use std::f64::consts::TAU;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::types::{bounding_box, PointCloud, SeededWeights, SuperpointPartition, TokenMatrix, SENTINEL};

/// Parameter-free sinusoidal embedding of box-normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierEmbedConfig {
    /// Output width; even and at least 6.
    pub width: usize,
    /// Geometric frequency base; band `j` uses frequency `base^j`.
    pub base: f64,
}

impl FourierEmbedConfig {
    pub fn new(width: usize) -> Self {
        FourierEmbedConfig { width, base: 2.0 }
    }

    /// Frequency bands per axis, `width / 6`.
    pub fn num_freqs(&self) -> usize {
        self.width / 6
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.num_freqs()).map(|j| self.base.powi(j as i32)).collect()
    }

    fn check(&self) -> Result<()> {
        if self.width < 6 {
            return Err(Error::WidthTooSmall(self.width));
        }
        if self.width % 2 != 0 {
            return Err(Error::OddWidth(self.width));
        }
        if !(self.base > 1.0) || !self.base.is_finite() {
            return Err(Error::InvalidFrequencyBase(self.base));
        }
        Ok(())
    }
}

/// Axis-aligned box used to normalize coordinates into `[0,1]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl SceneBox {
    pub fn of(points: ArrayView2<f64>) -> Self {
        let (lo, hi) = bounding_box(points);
        SceneBox { lo, hi }
    }

    /// Box-relative coordinate; flat axes map to 0.
    pub fn normalize(&self, p: [f64; 3]) -> [f64; 3] {
        let mut u = [0.0; 3];
        for a in 0..3 {
            let extent = self.hi[a] - self.lo[a];
            if extent > 0.0 {
                u[a] = (p[a] - self.lo[a]) / extent;
            }
        }
        u
    }
}

/// Fourier embedding with the box taken from `positions` themselves.
pub fn fourier_embed(positions: ArrayView2<f64>, cfg: &FourierEmbedConfig) -> Result<Array2<f64>> {
    fourier_embed_in_box(positions, &SceneBox::of(positions), cfg)
}

/// Columns are `sin` for every (axis, band), then `cos` for every (axis, band),
/// then zero padding up to `cfg.width`.
pub fn fourier_embed_in_box(
    positions: ArrayView2<f64>,
    scene: &SceneBox,
    cfg: &FourierEmbedConfig,
) -> Result<Array2<f64>> {
    cfg.check()?;
    if positions.ncols() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "positions must be K×3, got K×{}",
            positions.ncols()
        )));
    }
    let freqs = cfg.frequencies();
    let nf = freqs.len();
    let mut out = Array2::zeros((positions.nrows(), cfg.width));
    for (mut row, p) in out.outer_iter_mut().zip(positions.outer_iter()) {
        let u = scene.normalize([p[0], p[1], p[2]]);
        for a in 0..3 {
            for (j, &f) in freqs.iter().enumerate() {
                let (s, c) = (TAU * f * u[a]).sin_cos();
                row[a * nf + j] = s;
                row[3 * nf + a * nf + j] = c;
            }
        }
    }
    Ok(out)
}

/// Per-point feature projection through a shallow MLP (ReLU between layers).
pub fn mlp_project(features: ArrayView2<f64>, weights: &SeededWeights) -> Result<Array2<f64>> {
    weights.forward(features)
}

/// `mlp_project(features) + fourier_embed(positions)` per point.
pub fn point_tokens(
    cloud: &PointCloud,
    weights: &SeededWeights,
    cfg: &FourierEmbedConfig,
) -> Result<Array2<f64>> {
    let out_width = weights.shapes.last().map(|&(_, o)| o).unwrap_or(0);
    if out_width != cfg.width {
        return Err(Error::ShapeMismatch(format!(
            "MLP output width {out_width} differs from embedding width {}",
            cfg.width
        )));
    }
    let mut x = mlp_project(cloud.features.view(), weights)?;
    x += &fourier_embed(cloud.positions.view(), cfg)?;
    Ok(x)
}

/// Average point tokens per superpoint; sentinel points are skipped.
pub fn superpoint_pool(x0: ArrayView2<f64>, part: &SuperpointPartition) -> Result<TokenMatrix> {
    if x0.nrows() != part.labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} token rows vs {} labels",
            x0.nrows(),
            part.labels.len()
        )));
    }
    let m = part.num_superpoints();
    let mut sums = Array2::<f64>::zeros((m, x0.ncols()));
    let mut counts = vec![0usize; m];
    for (i, &label) in part.labels.iter().enumerate() {
        if label == SENTINEL {
            continue;
        }
        if label < 0 || label as usize >= m {
            return Err(Error::LabelOutOfRange {
                index: i,
                label: label as i64,
                count: m,
            });
        }
        let l = label as usize;
        counts[l] += 1;
        let mut row = sums.row_mut(l);
        row += &x0.row(i);
    }
    for (l, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::EmptySuperpoint(l));
        }
        sums.row_mut(l).mapv_inplace(|v| v / c as f64);
    }
    TokenMatrix::new(sums, part.centers.clone())
}

/// One coordinate token per query: the Fourier embedding of the query averaged
/// with the embeddings of its `k` nearest cloud points. Everything is
/// normalized to the cloud's bounding box.
pub fn coordinate_prompt(
    queries: ArrayView2<f64>,
    cloud: &PointCloud,
    k: usize,
    cfg: &FourierEmbedConfig,
) -> Result<Array2<f64>> {
    if k > cloud.len() {
        return Err(Error::KTooLarge { k, n: cloud.len() });
    }
    let scene = SceneBox::of(cloud.positions.view());
    let mut out = fourier_embed_in_box(queries, &scene, cfg)?;
    if k == 0 {
        return Ok(out);
    }
    let point_embed = fourier_embed_in_box(cloud.positions.view(), &scene, cfg)?;
    let tree = KdTree::new(cloud.positions.view());
    let scale = 1.0 / (k + 1) as f64;
    for (mut row, q) in out.outer_iter_mut().zip(queries.outer_iter()) {
        for (j, _) in tree.nearest([q[0], q[1], q[2]], k) {
            row += &point_embed.row(j);
        }
        row.mapv_inplace(|v| v * scale);
    }
    Ok(out)
}

/// Indices of the `k` nearest cloud points for each query (nearest first).
pub fn prompt_neighbors(queries: ArrayView2<f64>, cloud: &PointCloud, k: usize) -> Result<Vec<Vec<usize>>> {
    if k > cloud.len() {
        return Err(Error::KTooLarge { k, n: cloud.len() });
    }
    let tree = KdTree::new(cloud.positions.view());
    Ok(queries
        .outer_iter()
        .map(|q| tree.nearest([q[0], q[1], q[2]], k).into_iter().map(|(i, _)| i).collect())
        .collect())
}

/// Fallback segmentation: one superpoint per occupied voxel of edge `cell`.
/// Labels are assigned in order of first occurrence.
pub fn voxel_superpoints(cloud: &PointCloud, cell: f64) -> Result<SuperpointPartition> {
    if !(cell > 0.0) || !cell.is_finite() {
        return Err(Error::InvalidConfig(format!("voxel cell must be positive, got {cell}")));
    }
    let mut ids: HashMap<[i64; 3], i32> = HashMap::new();
    let labels: Vec<i32> = cloud
        .positions
        .outer_iter()
        .map(|p| {
            let key = [
                (p[0] / cell).floor() as i64,
                (p[1] / cell).floor() as i64,
                (p[2] / cell).floor() as i64,
            ];
            let next = ids.len() as i32;
            *ids.entry(key).or_insert(next)
        })
        .collect();
    SuperpointPartition::from_labels(labels, cloud.positions.view())
}
