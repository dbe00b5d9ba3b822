//! Global filter module: per-token channel-spectrum gains with an averaged
//! residual, `z_out = (z + irfft(rfft(z) ⊙ M)) / 2`, applied per head.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::spectrum::{rfft_bins, RealSpectrum};

#[derive(Debug, Clone, PartialEq)]
pub struct GfmConfig {
    pub width: usize,
    pub heads: usize,
    /// One real gain vector per head, `head_width/2 + 1` bins each.
    pub filters: Vec<Vec<f64>>,
}

impl GfmConfig {
    pub fn new(width: usize, heads: usize, filters: Vec<Vec<f64>>) -> Result<Self> {
        let cfg = GfmConfig { width, heads, filters };
        cfg.validate()?;
        Ok(cfg)
    }

    /// All-ones filters: `gfm_apply` returns its input unchanged.
    pub fn identity(width: usize, heads: usize) -> Result<Self> {
        Self::constant(width, heads, 1.0)
    }

    pub fn constant(width: usize, heads: usize, gain: f64) -> Result<Self> {
        if heads == 0 || width % heads != 0 {
            return Err(Error::WidthMismatch(format!("width {width} is not divisible into {heads} heads")));
        }
        let bins = rfft_bins(width / heads);
        Self::new(width, heads, vec![vec![gain; bins]; heads])
    }

    pub fn head_width(&self) -> usize {
        self.width / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.width == 0 || self.width % self.heads != 0 {
            return Err(Error::WidthMismatch(format!(
                "width {} is not divisible into {} heads",
                self.width, self.heads
            )));
        }
        if self.filters.len() != self.heads {
            return Err(Error::WidthMismatch(format!(
                "{} filters for {} heads",
                self.filters.len(),
                self.heads
            )));
        }
        let bins = rfft_bins(self.head_width());
        for (h, f) in self.filters.iter().enumerate() {
            if f.len() != bins {
                return Err(Error::WidthMismatch(format!(
                    "filter {h} has {} gains, head width {} needs {bins}",
                    f.len(),
                    self.head_width()
                )));
            }
            if f.iter().any(|g| !g.is_finite()) {
                return Err(Error::WidthMismatch(format!("filter {h} has a non-finite gain")));
            }
        }
        Ok(())
    }
}

/// Apply the filter to every row of `z` (K×D).
pub fn gfm_apply(z: ArrayView2<f64>, cfg: &GfmConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    if z.ncols() != cfg.width {
        return Err(Error::WidthMismatch(format!(
            "tokens have {} channels, filter expects {}",
            z.ncols(),
            cfg.width
        )));
    }
    let hw = cfg.head_width();
    let mut out = z.to_owned();
    let mut plan = RealSpectrum::new(hw);
    let mut seg = vec![0.0; hw];
    for (h, filter) in cfg.filters.iter().enumerate() {
        // Exact shortcuts: unit gains reproduce z, zero gains give z/2.
        if filter.iter().all(|&g| g == 1.0) {
            continue;
        }
        let zero = filter.iter().all(|&g| g == 0.0);
        let cols = h * hw..(h + 1) * hw;
        for mut row in out.rows_mut() {
            let mut part = row.slice_mut(ndarray::s![cols.clone()]);
            if zero {
                part.mapv_inplace(|v| v * 0.5);
                continue;
            }
            for (s, &v) in seg.iter_mut().zip(part.iter()) {
                *s = v;
            }
            plan.filter_in_place(&mut seg, filter);
            for (o, &m) in part.iter_mut().zip(&seg) {
                *o = 0.5 * (*o + m);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(k: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((k, d), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    // O(D²) DFT with the half-spectrum gain mirrored onto negative frequencies.
    fn naive_filter(x: &[f64], gain: &[f64]) -> Vec<f64> {
        let n = x.len();
        let full_gain = |k: usize| gain[k.min(n - k)];
        let spec: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                (re * full_gain(k), im * full_gain(k))
            })
            .collect();
        (0..n)
            .map(|t| {
                spec.iter()
                    .enumerate()
                    .map(|(k, &(re, im))| {
                        let a = 2.0 * PI * (k * t) as f64 / n as f64;
                        re * a.cos() - im * a.sin()
                    })
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn unit_filter_is_identity() {
        let z = random(7, 24, 1);
        assert_eq!(gfm_apply(z.view(), &GfmConfig::identity(24, 3).unwrap()).unwrap(), z);
    }

    #[test]
    fn zero_filter_halves() {
        let z = random(5, 16, 2);
        let out = gfm_apply(z.view(), &GfmConfig::constant(16, 2, 0.0).unwrap()).unwrap();
        assert_eq!(out, z.mapv(|v| v / 2.0));
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &d in &[8usize, 15, 32, 33] {
            let z = random(4, d, d as u64);
            let gain: Vec<f64> = (0..rfft_bins(d)).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect();
            let cfg = GfmConfig::new(d, 1, vec![gain.clone()]).unwrap();
            let out = gfm_apply(z.view(), &cfg).unwrap();
            for (i, row) in z.rows().into_iter().enumerate() {
                let mixed = naive_filter(row.as_slice().unwrap(), &gain);
                for j in 0..d {
                    let want = 0.5 * (row[j] + mixed[j]);
                    assert!((out[[i, j]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn heads_are_contiguous_blocks() {
        let z = random(3, 12, 4);
        let mut filters = vec![vec![1.0; 4]; 2];
        filters[1] = vec![0.0; 4];
        let out = gfm_apply(z.view(), &GfmConfig::new(12, 2, filters).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..6 {
                assert_eq!(out[[i, j]], z[[i, j]]);
                assert_eq!(out[[i, j + 6]], z[[i, j + 6]] / 2.0);
            }
        }
    }

    #[test]
    fn width_checks() {
        assert!(matches!(GfmConfig::identity(10, 3), Err(Error::WidthMismatch(_))));
        assert!(GfmConfig::new(8, 1, vec![vec![1.0; 4]]).is_err());
        let cfg = GfmConfig::identity(8, 2).unwrap();
        assert!(matches!(gfm_apply(random(2, 9, 0).view(), &cfg), Err(Error::WidthMismatch(_))));
    }
}
