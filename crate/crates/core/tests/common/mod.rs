//! Reference implementations used only by tests. Each one is written
//! independently of the library routine it checks.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfctok::graph::{Neighbor, Vote};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| lo + (hi - lo) * r.random::<f64>())
}

/// Full complex DFT of a real signal, O(n²).
pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re, im)
        })
        .collect()
}

/// `Re(IDFT(DFT(x) ⊙ g))` where the half-spectrum gain `g` is mirrored.
pub fn naive_filter(x: &[f64], half_gain: &[f64]) -> Vec<f64> {
    let n = x.len();
    let spec = naive_dft(x);
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            for (k, &(re, im)) in spec.iter().enumerate() {
                let g = half_gain[k.min(n - k)];
                let a = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                acc += g * (re * a.cos() - im * a.sin());
            }
            acc / n as f64
        })
        .collect()
}

/// Singular values of `a` by one-sided (Hestenes) Jacobi rotations, sorted
/// descending. Also returns the left singular vectors for the nonzero values.
pub fn jacobi_svd(a: ArrayView2<f64>) -> (Vec<f64>, Array2<f64>) {
    let (m, n) = a.dim();
    let mut u = a.to_owned();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += u[[i, p]] * u[[i, p]];
                    beta += u[[i, q]] * u[[i, q]];
                    gamma += u[[i, p]] * u[[i, q]];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    u[[i, p]] = c * up - s * uq;
                    u[[i, q]] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<(f64, usize)> = (0..n)
        .map(|j| ((0..m).map(|i| u[[i, j]] * u[[i, j]]).sum::<f64>().sqrt(), j))
        .collect();
    sv.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut left = Array2::zeros((m, n));
    for (c, &(s, j)) in sv.iter().enumerate() {
        if s > 0.0 {
            for i in 0..m {
                left[[i, c]] = u[[i, j]] / s;
            }
        }
    }
    (sv.into_iter().map(|(s, _)| s).collect(), left)
}

/// Plain-domain Sinkhorn with compensated sums, run to convergence.
pub fn dense_sinkhorn(logits: ArrayView2<f64>, mu: &[f64], nu: &[f64], tau: f64) -> Array2<f64> {
    let (m, t) = logits.dim();
    // Row-wise max shift keeps the kernel in range; it is absorbed by u.
    let k = Array2::from_shape_fn((m, t), |(i, j)| {
        let row_max = (0..t).map(|jj| logits[[i, jj]]).fold(f64::NEG_INFINITY, f64::max);
        ((logits[[i, j]] - row_max) / tau).exp()
    });
    let kahan = |xs: &mut dyn Iterator<Item = f64>| -> f64 {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for x in xs {
            let y = x - c;
            let tt = s + y;
            c = (tt - s) - y;
            s = tt;
        }
        s
    };
    let mut u = vec![1.0; m];
    let mut v = vec![1.0; t];
    for _ in 0..200_000 {
        for j in 0..t {
            let s = kahan(&mut (0..m).map(|i| k[[i, j]] * u[i]));
            v[j] = nu[j] / s;
        }
        for i in 0..m {
            let s = kahan(&mut (0..t).map(|j| k[[i, j]] * v[j]));
            u[i] = if mu[i] == 0.0 { 0.0 } else { mu[i] / s };
        }
        let err = (0..t)
            .map(|j| (kahan(&mut (0..m).map(|i| u[i] * k[[i, j]] * v[j])) - nu[j]).abs())
            .fold(0.0, f64::max);
        if err < 1e-15 {
            break;
        }
    }
    Array2::from_shape_fn((m, t), |(i, j)| u[i] * k[[i, j]] * v[j])
}

/// Sum votes per directed pair with a hash map.
pub fn coalesce_oracle(edges: &[Vote]) -> HashMap<(u32, u32), u32> {
    let mut map = HashMap::new();
    for e in edges {
        *map.entry((e.src, e.dst)).or_insert(0) += e.votes;
    }
    map
}

/// Per-source top-k by full sort on `(dist², -votes, dst)`.
pub fn topk_oracle(
    pairs: &HashMap<(u32, u32), u32>,
    centers: ArrayView2<f64>,
    k: usize,
) -> Vec<Vec<(usize, u32)>> {
    let m = centers.nrows();
    let mut per_src: Vec<Vec<(f64, i64, usize, u32)>> = vec![Vec::new(); m];
    for (&(s, t), &v) in pairs {
        if s == t {
            continue;
        }
        let (s, t) = (s as usize, t as usize);
        let d: f64 = (0..3).map(|a| (centers[[s, a]] - centers[[t, a]]).powi(2)).sum();
        per_src[s].push((d, -(v as i64), t, v));
    }
    per_src
        .into_iter()
        .map(|mut list| {
            list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            list.truncate(k);
            list.into_iter().map(|(_, _, t, v)| (t, v)).collect()
        })
        .collect()
}

pub fn neighbor_ids(list: &[Neighbor]) -> Vec<(usize, u32)> {
    list.iter().map(|n| (n.dst, n.votes)).collect()
}

/// Least-squares slope of log y on log x.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

pub fn max_abs_diff(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
