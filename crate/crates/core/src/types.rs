//! Shared domain types: point clouds, superpoint partitions, token matrices and
//! seed-initialized weights.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Label for points that belong to no superpoint.
pub const SENTINEL: i32 = -1;

/// N points with 3D positions and per-point feature channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    /// N×3 coordinates in meters.
    pub positions: Array2<f64>,
    /// N×C_in feature channels (RGB in [0,1], optionally normals).
    pub features: Array2<f64>,
}

impl PointCloud {
    /// Build a cloud and validate it.
    pub fn new(positions: Array2<f64>, features: Array2<f64>) -> Result<Self> {
        let cloud = PointCloud {
            positions,
            features,
        };
        validate_cloud(&cloud)?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.positions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.nrows() == 0
    }

    pub fn channels(&self) -> usize {
        self.features.ncols()
    }

    /// Rows selected by `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: self.positions.select(Axis(0), indices),
            features: self.features.select(Axis(0), indices),
        }
    }
}

/// Check every [`PointCloud`] invariant, reporting the first violation.
pub fn validate_cloud(cloud: &PointCloud) -> Result<()> {
    let n = cloud.positions.nrows();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if cloud.positions.ncols() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "positions must be N×3, got N×{}",
            cloud.positions.ncols()
        )));
    }
    if cloud.features.nrows() != n {
        return Err(Error::FeatureRowMismatch {
            positions: n,
            features: cloud.features.nrows(),
        });
    }
    if cloud.features.ncols() == 0 {
        return Err(Error::NoFeatureChannels);
    }
    if let Some(i) = cloud
        .positions
        .outer_iter()
        .position(|row| row.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFiniteCoordinate(i));
    }
    Ok(())
}

/// Assignment of points to M superpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointPartition {
    /// Per-point label in `0..M` or [`SENTINEL`].
    pub labels: Vec<i32>,
    /// M×3 arithmetic means of member positions.
    pub centers: Array2<f64>,
    /// Member count per superpoint, all >= 1.
    pub counts: Vec<usize>,
}

impl SuperpointPartition {
    /// Build from dense labels (`0..M` or [`SENTINEL`]), where M is one past the
    /// largest label. Every superpoint must own at least one point.
    pub fn from_labels(labels: Vec<i32>, positions: ArrayView2<f64>) -> Result<Self> {
        if labels.len() != positions.nrows() {
            return Err(Error::LengthMismatch {
                expected: positions.nrows(),
                got: labels.len(),
            });
        }
        let m = labels.iter().copied().max().unwrap_or(SENTINEL);
        if m < 0 {
            return Err(Error::NoValidSuperpoints);
        }
        let m = m as usize + 1;
        let mut counts = vec![0usize; m];
        let mut centers = Array2::<f64>::zeros((m, 3));
        for (i, &label) in labels.iter().enumerate() {
            if label == SENTINEL {
                continue;
            }
            if label < 0 {
                return Err(Error::LabelOutOfRange {
                    index: i,
                    label: label as i64,
                    count: m,
                });
            }
            let l = label as usize;
            counts[l] += 1;
            let mut c = centers.row_mut(l);
            c += &positions.row(i);
        }
        for (l, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(Error::EmptySuperpoint(l));
            }
            centers.row_mut(l).mapv_inplace(|v| v / count as f64);
        }
        Ok(SuperpointPartition {
            labels,
            centers,
            counts,
        })
    }

    /// Compact arbitrary non-negative labels to `0..M` in ascending order of the
    /// original value; `-1` stays the sentinel.
    pub fn compact(raw: &[i64], positions: ArrayView2<f64>) -> Result<Self> {
        let mut distinct: Vec<i64> = Vec::new();
        for (i, &l) in raw.iter().enumerate() {
            if l < -1 || l > i32::MAX as i64 {
                return Err(Error::LabelOutOfRange {
                    index: i,
                    label: l,
                    count: 0,
                });
            }
            if l >= 0 {
                distinct.push(l);
            }
        }
        if distinct.is_empty() {
            return Err(Error::NoValidSuperpoints);
        }
        distinct.sort_unstable();
        distinct.dedup();
        let dense = raw
            .iter()
            .map(|&l| {
                if l < 0 {
                    SENTINEL
                } else {
                    distinct.binary_search(&l).expect("label collected above") as i32
                }
            })
            .collect();
        Self::from_labels(dense, positions)
    }

    pub fn num_superpoints(&self) -> usize {
        self.counts.len()
    }
}

/// A K×d feature matrix paired with K 3D centers.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    pub feats: Array2<f64>,
    pub centers: Array2<f64>,
}

impl TokenMatrix {
    pub fn new(feats: Array2<f64>, centers: Array2<f64>) -> Result<Self> {
        if feats.nrows() != centers.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows vs {} centers",
                feats.nrows(),
                centers.nrows()
            )));
        }
        if centers.ncols() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "centers must be K×3, got K×{}",
                centers.ncols()
            )));
        }
        if feats.iter().chain(centers.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("token entries must be finite".into()));
        }
        Ok(TokenMatrix { feats, centers })
    }

    pub fn len(&self) -> usize {
        self.feats.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.feats.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.feats.ncols()
    }
}

/// Forward-only dense layer weights.
///
/// Layer `l` with shape `(in, out)` occupies `in*out` row-major weights
/// (`y = x W + b`) followed by `out` biases in [`SeededWeights::values`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeededWeights {
    /// Seed the values were drawn from; `None` for weights loaded from disk.
    pub seed: Option<u64>,
    pub shapes: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

fn check_shapes(shapes: &[(usize, usize)]) -> Result<usize> {
    let mut total = 0;
    for &(i, o) in shapes {
        if i == 0 || o == 0 {
            return Err(Error::InvalidShape(i, o));
        }
        total += i * o + o;
    }
    Ok(total)
}

/// Uniform in [0, 1) from the top 53 bits of a u64.
pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draw every weight and bias of layer `(in, out)` uniformly from `[-a, a]`
/// with `a = sqrt(6 / (in + out))`, using a ChaCha8 stream seeded by `seed`.
/// The result is a pure function of `(seed, shapes)`.
pub fn seeded_init(seed: u64, shapes: &[(usize, usize)]) -> Result<SeededWeights> {
    let total = check_shapes(shapes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(total);
    for &(i, o) in shapes {
        let bound = (6.0 / (i + o) as f64).sqrt();
        for _ in 0..(i * o + o) {
            values.push(bound * (2.0 * unit_f64(rng.next_u64()) - 1.0));
        }
    }
    Ok(SeededWeights {
        seed: Some(seed),
        shapes: shapes.to_vec(),
        values,
    })
}

impl SeededWeights {
    /// Wrap externally supplied values.
    pub fn from_values(shapes: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Self> {
        let total = check_shapes(&shapes)?;
        if values.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "expected {total} weight values, got {}",
                values.len()
            )));
        }
        Ok(SeededWeights {
            seed: None,
            shapes,
            values,
        })
    }

    /// All-zero weights and biases.
    pub fn zeros(shapes: &[(usize, usize)]) -> Result<Self> {
        let total = check_shapes(shapes)?;
        Ok(SeededWeights {
            seed: None,
            shapes: shapes.to_vec(),
            values: vec![0.0; total],
        })
    }

    pub fn num_layers(&self) -> usize {
        self.shapes.len()
    }

    fn offset(&self, layer: usize) -> usize {
        self.shapes[..layer].iter().map(|&(i, o)| i * o + o).sum()
    }

    /// Weight matrix (in×out) and bias (out) of one layer.
    pub fn layer(&self, layer: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (i, o) = self.shapes[layer];
        let start = self.offset(layer);
        let w = ArrayView2::from_shape((i, o), &self.values[start..start + i * o])
            .expect("layout checked at construction");
        let b = ArrayView1::from(&self.values[start + i * o..start + i * o + o]);
        (w, b)
    }

    /// Mutable access for tests and loaders that patch individual layers.
    pub fn layer_values_mut(&mut self, layer: usize) -> &mut [f64] {
        let (i, o) = self.shapes[layer];
        let start = self.offset(layer);
        &mut self.values[start..start + i * o + o]
    }

    /// Require the given layer shapes exactly.
    pub fn expect_shapes(&self, expected: &[(usize, usize)]) -> Result<()> {
        if self.shapes != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected layers {expected:?}, got {:?}",
                self.shapes
            )));
        }
        Ok(())
    }

    /// Run the layers as an MLP with ReLU between layers (none after the last).
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let Some(&(first_in, _)) = self.shapes.first() else {
            return Err(Error::ShapeMismatch("no layers".into()));
        };
        if x.ncols() != first_in {
            return Err(Error::ShapeMismatch(format!(
                "input width {} does not match first layer input {first_in}",
                x.ncols()
            )));
        }
        let mut h: Array2<f64> = x.to_owned();
        for l in 0..self.shapes.len() {
            if l > 0 {
                h.mapv_inplace(|v| v.max(0.0));
            }
            let (w, b) = self.layer(l);
            h = h.dot(&w) + &b;
        }
        Ok(h)
    }
}

/// Row-wise mean of selected rows of `x`; helper shared by pooling code.
pub(crate) fn column_means(x: ArrayView2<f64>) -> Array1<f64> {
    if x.nrows() == 0 {
        return Array1::zeros(x.ncols());
    }
    let mut mean = x.mean_axis(Axis(0)).expect("non-empty");
    // A constant column must center to exact zeros; the summed mean can be off by an ulp.
    for (j, col) in x.columns().into_iter().enumerate() {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            mean[j] = first;
        }
    }
    mean
}

/// Per-axis (min, max) of an N×3 coordinate block.
pub(crate) fn bounding_box(points: ArrayView2<f64>) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for row in points.outer_iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(row[a]);
            hi[a] = hi[a].max(row[a]);
        }
    }
    (lo, hi)
}
