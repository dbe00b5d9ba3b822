//! Windowed spectral mixing along curve orderings.
//!
//! Each ordering is cut into overlapping windows; every window is low-passed
//! per channel in the rFFT domain and the results are overlap-added with
//! squared-Hann weights. The curve results are un-permuted, averaged, and
//! added back to the input as a residual.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::sfc::CurveOrder;
use crate::spectrum::{rfft_bins, RealSpectrum};
use crate::types::TokenMatrix;

/// Accumulated weights below this are treated as zero.
const MIN_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancerConfig {
    /// Window length in tokens.
    pub window: usize,
    /// Hop between window starts.
    pub stride: usize,
    /// Non-negative gain per rFFT bin, `window/2 + 1` entries.
    pub gate: Vec<f64>,
    /// Subtract each window's per-channel mean before filtering and add it back after.
    pub center: bool,
}

impl Default for EnhancerConfig {
    fn default() -> Self {
        EnhancerConfig::low_pass(64, 16, 128)
    }
}

impl EnhancerConfig {
    /// Binary gate passing the first `keep_bins` bins (capped at the bin count).
    pub fn low_pass(window: usize, stride: usize, keep_bins: usize) -> Self {
        let bins = rfft_bins(window.max(1));
        let gate = (0..bins).map(|k| if k < keep_bins { 1.0 } else { 0.0 }).collect();
        EnhancerConfig {
            window,
            stride,
            gate,
            center: false,
        }
    }

    pub fn with_gate(window: usize, stride: usize, gate: Vec<f64>) -> Self {
        EnhancerConfig {
            window,
            stride,
            gate,
            center: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidEnhancerConfig("window must be >= 1".into()));
        }
        if self.stride == 0 || self.stride > self.window {
            return Err(Error::InvalidEnhancerConfig(format!(
                "stride {} must lie in 1..={}",
                self.stride, self.window
            )));
        }
        if self.gate.len() != rfft_bins(self.window) {
            return Err(Error::InvalidEnhancerConfig(format!(
                "gate has {} bins, window {} needs {}",
                self.gate.len(),
                self.window,
                rfft_bins(self.window)
            )));
        }
        if self.gate.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidEnhancerConfig("gate entries must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// `hann(n)^2` with `hann(n) = 0.5 (1 - cos(2πn / (L-1)))`; a length-1 window has weight 1.
pub fn squared_hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| {
            let h = 0.5 * (1.0 - (std::f64::consts::TAU * n as f64 / denom).cos());
            h * h
        })
        .collect()
}

/// Window start offsets `0, R, 2R, ...` up to the first window reaching the end.
pub fn window_starts(len: usize, window: usize, stride: usize) -> Vec<usize> {
    let mut starts = Vec::with_capacity(len / stride.max(1) + 1);
    let mut s = 0;
    loop {
        starts.push(s);
        if s + window >= len {
            break;
        }
        s += stride;
    }
    starts
}

/// Low-pass every window of `seq` (K×d, already in curve order) and overlap-add.
///
/// The last window is zero-padded to the full length; only its in-range part
/// contributes. Positions whose accumulated squared-Hann weight is zero (the
/// window endpoints when nothing else overlaps them) take the unweighted
/// mean of the window outputs covering them.
pub fn windowed_mix(seq: ArrayView2<f64>, cfg: &EnhancerConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let (k, d) = seq.dim();
    let l = cfg.window;
    let weights = squared_hann(l);
    let mut spectrum = RealSpectrum::new(l);
    let mut weighted = Array2::<f64>::zeros((k, d));
    let mut plain = Array2::<f64>::zeros((k, d));
    let mut weight_sum = vec![0.0; k];
    let mut cover = vec![0usize; k];
    let mut buf = vec![0.0; l];

    for start in window_starts(k, l, cfg.stride) {
        let valid = l.min(k - start);
        for n in 0..valid {
            weight_sum[start + n] += weights[n];
            cover[start + n] += 1;
        }
        for c in 0..d {
            buf.fill(0.0);
            for n in 0..valid {
                buf[n] = seq[[start + n, c]];
            }
            let mean = if cfg.center {
                buf[..valid].iter().sum::<f64>() / valid as f64
            } else {
                0.0
            };
            if cfg.center {
                for v in &mut buf[..valid] {
                    *v -= mean;
                }
            }
            spectrum.filter_in_place(&mut buf, &cfg.gate);
            for n in 0..valid {
                let y = buf[n] + mean;
                weighted[[start + n, c]] += weights[n] * y;
                plain[[start + n, c]] += y;
            }
        }
    }

    let mut out = Array2::<f64>::zeros((k, d));
    for i in 0..k {
        let mut row = out.row_mut(i);
        if weight_sum[i] >= MIN_WEIGHT {
            row.assign(&weighted.row(i));
            row.mapv_inplace(|v| v / weight_sum[i]);
        } else if cover[i] > 0 {
            row.assign(&plain.row(i));
            row.mapv_inplace(|v| v / cover[i] as f64);
        } else {
            row.assign(&seq.row(i));
        }
    }
    Ok(out)
}

/// The fused context term: the mean over curves of the un-permuted windowed mix.
pub fn context(tokens: &TokenMatrix, cfg: &EnhancerConfig, curves: &[CurveOrder]) -> Result<Array2<f64>> {
    if curves.is_empty() {
        return Err(Error::InvalidEnhancerConfig("at least one curve order is required".into()));
    }
    let k = tokens.len();
    let mut fused = Array2::<f64>::zeros(tokens.feats.raw_dim());
    for curve in curves {
        if curve.len() != k {
            return Err(Error::CurveLengthMismatch {
                expected: k,
                got: curve.len(),
            });
        }
        let sorted = curve.gather(tokens.feats.view());
        let mixed = windowed_mix(sorted.view(), cfg)?;
        fused += &curve.scatter(mixed.view());
    }
    fused.mapv_inplace(|v| v / curves.len() as f64);
    Ok(fused)
}

/// `S + mean_curves(mix(S))`, centers unchanged.
pub fn enhance(tokens: &TokenMatrix, cfg: &EnhancerConfig, curves: &[CurveOrder]) -> Result<TokenMatrix> {
    let ctx = context(tokens, cfg, curves)?;
    Ok(TokenMatrix {
        feats: &tokens.feats + &ctx,
        centers: tokens.centers.clone(),
    })
}
