//! Lloyd's k-means with seeded k-means++ seeding, used for instance proposals.

use ndarray::{Array2, ArrayView2};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::unit_f64;

pub const MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Sum of squared distances after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centroids(points: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = points.nrows();
    let first = (unit_f64(rng.next_u64()) * m as f64) as usize;
    let mut chosen = vec![first.min(m - 1)];
    let mut best: Vec<f64> = (0..m).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let target = unit_f64(rng.next_u64()) * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in best.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| best.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // Every remaining point coincides with a chosen one.
            (0..m).find(|i| !chosen.contains(i)).expect("k <= m")
        };
        chosen.push(next);
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    chosen
}

/// Cluster the rows of `points` into `k` groups.
pub fn kmeans_proposals(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeans> {
    let m = points.nrows();
    if k > m {
        return Err(Error::KTooLarge { k, n: m });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("cluster count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = seed_centroids(points, k, &mut rng);
    let mut centroids = points.select(ndarray::Axis(0), &seeds);
    let mut labels = vec![usize::MAX; m];
    let mut objective = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_ITERS {
        let mut changed = false;
        let mut total = 0.0;
        for i in 0..m {
            let (best, dist) = (0..k)
                .map(|c| (c, sq_dist(points.row(i), centroids.row(c))))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            total += dist;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        objective.push(total);
        iterations += 1;
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let mut row = sums.row_mut(l);
            row += &points.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = sums.row(c).mapv(|v| v / counts[c] as f64);
                centroids.row_mut(c).assign(&mean);
            }
        }
    }
    Ok(KMeans {
        labels,
        centroids,
        objective,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn k_equals_m_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = Array2::from_shape_fn((12, 4), |_| rng.random::<f64>());
        let km = kmeans_proposals(pts.view(), 12, 7).unwrap();
        assert_eq!(*km.objective.last().unwrap(), 0.0);
        let mut seen = km.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 12);
    }

    #[test]
    fn recovers_separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.1).unwrap();
        // Centers 10 apart with sigma 0.1: separation of 100 sigma.
        let pts = Array2::from_shape_fn((60, 3), |(i, _)| {
            (if i < 30 { 0.0 } else { 10.0 }) + noise.sample(&mut rng)
        });
        for seed in 0..5 {
            let km = kmeans_proposals(pts.view(), 2, seed).unwrap();
            let a = km.labels[0];
            assert!(km.labels[..30].iter().all(|&l| l == a));
            assert!(km.labels[30..].iter().all(|&l| l != a));
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..10 {
            let pts = Array2::from_shape_fn((200, 5), |_| rng.random::<f64>());
            let km = kmeans_proposals(pts.view(), 8, seed).unwrap();
            for w in km.objective.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", km.objective);
            }
        }
    }

    #[test]
    fn duplicates_and_bounds() {
        let pts = Array2::zeros((5, 2));
        let km = kmeans_proposals(pts.view(), 3, 0).unwrap();
        assert_eq!(km.labels.len(), 5);
        assert!(matches!(kmeans_proposals(pts.view(), 6, 0), Err(Error::KTooLarge { k: 6, n: 5 })));
    }
}
