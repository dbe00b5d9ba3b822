//! Graph smoothing and truncated SVD embedding of superpoint tokens.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::types::{column_means, TokenMatrix};

/// `Â (S - mean(S))`: column-centered features smoothed over the graph.
pub fn smooth_features(adjacency: &CsrMatrix, tokens: &TokenMatrix) -> Result<Array2<f64>> {
    if adjacency.size != tokens.len() {
        return Err(Error::DimensionMismatch(format!(
            "adjacency is {0}×{0}, tokens have {1} rows",
            adjacency.size,
            tokens.len()
        )));
    }
    let centered = &tokens.feats - &column_means(tokens.feats.view());
    adjacency.mul_dense(centered.view())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdOptions {
    /// Inputs with at most this many rows use a dense SVD.
    pub dense_max_rows: usize,
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            dense_max_rows: 512,
            oversample: 8,
            power_iters: 2,
            seed: 0,
        }
    }
}

/// Rank-r spectral embedding `Z = U_r Σ_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// M×r embedding.
    pub embedding: Array2<f64>,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// M×r left singular vectors.
    pub left: Array2<f64>,
    /// d×r right singular vectors.
    pub right: Array2<f64>,
}

impl SpectralEmbedding {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U_r Σ_r V_rᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.embedding.dot(&self.right.t())
    }
}

fn to_na(x: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

/// Thin SVD sorted by descending singular value.
fn sorted_svd(a: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = a.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vt");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    (u, s, v)
}

fn orthonormal_columns(a: DMatrix<f64>) -> DMatrix<f64> {
    a.qr().q()
}

/// Truncated SVD of `y` with default options.
pub fn spectral_embed(y: ArrayView2<f64>, rank: usize) -> Result<SpectralEmbedding> {
    spectral_embed_with(y, rank, &SvdOptions::default())
}

/// Truncated SVD: dense for small inputs, randomized subspace iteration
/// otherwise. Each left singular vector is signed so its largest-magnitude
/// entry (first on ties) is positive.
pub fn spectral_embed_with(y: ArrayView2<f64>, rank: usize, opts: &SvdOptions) -> Result<SpectralEmbedding> {
    let (m, d) = y.dim();
    if rank == 0 || rank > m.min(d) {
        return Err(Error::RankTooLarge { rank, rows: m, cols: d });
    }
    if y.iter().all(|&v| v == 0.0) {
        return Ok(SpectralEmbedding {
            embedding: Array2::zeros((m, rank)),
            singular_values: vec![0.0; rank],
            left: Array2::from_shape_fn((m, rank), |(i, j)| if i == j { 1.0 } else { 0.0 }),
            right: Array2::from_shape_fn((d, rank), |(i, j)| if i == j { 1.0 } else { 0.0 }),
        });
    }

    let a = to_na(y);
    let (u, s, v) = if m <= opts.dense_max_rows {
        sorted_svd(a)
    } else {
        let width = (rank + opts.oversample).min(m.min(d));
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let omega = DMatrix::from_fn(d, width, |_, _| StandardNormal.sample(&mut rng));
        let mut q = orthonormal_columns(&a * omega);
        for _ in 0..opts.power_iters {
            let z = orthonormal_columns(a.transpose() * &q);
            q = orthonormal_columns(&a * z);
        }
        let b = q.transpose() * &a;
        let (ub, s, v) = sorted_svd(b);
        (q * ub, s, v)
    };

    let mut left = Array2::zeros((m, rank));
    let mut right = Array2::zeros((d, rank));
    for c in 0..rank {
        let mut pivot = 0;
        for r in 0..m {
            if u[(r, c)].abs() > u[(pivot, c)].abs() {
                pivot = r;
            }
        }
        let sign = if u[(pivot, c)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..m {
            left[[r, c]] = sign * u[(r, c)];
        }
        for r in 0..d {
            right[[r, c]] = sign * v[(r, c)];
        }
    }
    let singular_values: Vec<f64> = s[..rank].to_vec();
    let mut embedding = left.clone();
    for (c, &sv) in singular_values.iter().enumerate() {
        embedding.column_mut(c).mapv_inplace(|x| x * sv);
    }
    Ok(SpectralEmbedding {
        embedding,
        singular_values,
        left,
        right,
    })
}

#[cfg(test)]
fn dense_singular_values(y: ArrayView2<f64>) -> Vec<f64> {
    sorted_svd(to_na(y)).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, rerank_topk, Vote, VoteBatch};
    use rand::Rng;

    fn random(m: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, d), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn constant_tokens_smooth_to_zero() {
        let centers = random(4, 3, 1);
        let tokens = TokenMatrix::new(Array2::from_elem((4, 5), 2.0), centers.clone()).unwrap();
        let batch = VoteBatch {
            edges: vec![Vote { src: 0, dst: 1, votes: 1 }, Vote { src: 2, dst: 3, votes: 1 }],
            coalesced: true,
            candidates: 0,
        };
        let a = normalized_adjacency(&rerank_topk(&batch, centers.view(), 2).unwrap());
        let y = smooth_features(&a, &tokens).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-15));
        let y = smooth_features(&CsrMatrix::zeros(4), &TokenMatrix::new(random(4, 5, 2), centers).unwrap()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        assert!(smooth_features(&CsrMatrix::zeros(3), &tokens).is_err());
    }

    #[test]
    fn zero_input_embeds_to_zero() {
        let e = spectral_embed(Array2::zeros((10, 4)).view(), 3).unwrap();
        assert!(e.embedding.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_one_is_recovered() {
        let u = random(20, 1, 3);
        let v = random(1, 6, 4);
        let y = u.dot(&v);
        let e = spectral_embed(y.view(), 1).unwrap();
        let err = (&y - &e.reconstruct()).iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * norm);
    }

    #[test]
    fn rank_bound_enforced() {
        assert!(matches!(
            spectral_embed(random(5, 3, 5).view(), 4),
            Err(Error::RankTooLarge { rank: 4, rows: 5, cols: 3 })
        ));
    }

    #[test]
    fn randomized_path_tracks_dense_on_low_rank() {
        // Exactly rank-6 input: subspace iteration captures it fully.
        let y = random(900, 6, 6).dot(&random(6, 40, 7));
        let opts = SvdOptions::default();
        let fast = spectral_embed_with(y.view(), 4, &opts).unwrap();
        let exact = dense_singular_values(y.view());
        for (a, b) in fast.singular_values.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
        }
        let gram = fast.left.t().dot(&fast.left);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn signs_are_fixed() {
        let y = random(30, 8, 8);
        let e = spectral_embed(y.view(), 3).unwrap();
        for c in 0..3 {
            let col = e.left.column(c);
            let pivot = col.iter().fold(0.0f64, |m, &v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
        // Negating Y flips V only once U's sign is pinned, so Z is unchanged.
        let e2 = spectral_embed(y.mapv(|v| -v).view(), 3).unwrap();
        assert!((&e.embedding - &e2.embedding).iter().all(|v| v.abs() < 1e-10));
    }
}
