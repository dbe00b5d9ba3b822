//! Real-input FFT helpers built on `realfft`.
//!
//! Forward transforms are unnormalized; inverse transforms divide by the
//! length, so `inverse(forward(x)) == x`.

use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

/// Number of non-redundant bins of a length-`len` real signal.
pub fn rfft_bins(len: usize) -> usize {
    len / 2 + 1
}

/// Reusable forward/inverse plans plus scratch for one transform length.
pub struct RealSpectrum {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    time: Vec<f64>,
    freq: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
}

impl RealSpectrum {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "transform length must be >= 1");
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_fwd = forward.make_scratch_vec();
        let scratch_inv = inverse.make_scratch_vec();
        RealSpectrum {
            len,
            time: forward.make_input_vec(),
            freq: forward.make_output_vec(),
            forward,
            inverse,
            scratch_fwd,
            scratch_inv,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bins(&self) -> usize {
        self.freq.len()
    }

    pub fn forward_into(&mut self, x: &[f64], out: &mut [Complex64]) {
        self.time.copy_from_slice(x);
        self.forward
            .process_with_scratch(&mut self.time, out, &mut self.scratch_fwd)
            .expect("buffer sizes fixed by the plan");
    }

    /// Inverse transform including the `1/len` normalization. The imaginary
    /// parts of the DC (and, for even lengths, Nyquist) bins are ignored.
    pub fn inverse_into(&mut self, bins: &[Complex64], out: &mut [f64]) {
        self.freq.copy_from_slice(bins);
        self.freq[0].im = 0.0;
        if self.len % 2 == 0 {
            let last = self.freq.len() - 1;
            self.freq[last].im = 0.0;
        }
        self.inverse
            .process_with_scratch(&mut self.freq, out, &mut self.scratch_inv)
            .expect("buffer sizes fixed by the plan");
        let scale = 1.0 / self.len as f64;
        for v in out.iter_mut() {
            *v *= scale;
        }
    }

    /// Transform `x` in place through the spectrum: `x <- irfft(rfft(x) ⊙ gain)`.
    pub fn filter_in_place(&mut self, x: &mut [f64], gain: &[f64]) {
        debug_assert_eq!(gain.len(), self.bins());
        self.time.copy_from_slice(x);
        self.forward
            .process_with_scratch(&mut self.time, &mut self.freq, &mut self.scratch_fwd)
            .expect("buffer sizes fixed by the plan");
        for (b, &g) in self.freq.iter_mut().zip(gain) {
            *b *= g;
        }
        self.freq[0].im = 0.0;
        if self.len % 2 == 0 {
            let last = self.freq.len() - 1;
            self.freq[last].im = 0.0;
        }
        self.inverse
            .process_with_scratch(&mut self.freq, x, &mut self.scratch_inv)
            .expect("buffer sizes fixed by the plan");
        let scale = 1.0 / self.len as f64;
        for v in x.iter_mut() {
            *v *= scale;
        }
    }
}

/// Unnormalized forward real FFT: `len/2 + 1` bins.
pub fn rfft_forward(x: &[f64]) -> Vec<Complex64> {
    let mut plan = RealSpectrum::new(x.len());
    let mut out = vec![Complex64::new(0.0, 0.0); plan.bins()];
    plan.forward_into(x, &mut out);
    out
}

/// Inverse of [`rfft_forward`] for a length-`len` signal.
pub fn rfft_inverse(bins: &[Complex64], len: usize) -> Vec<f64> {
    assert_eq!(bins.len(), rfft_bins(len), "bin count does not match length");
    let mut plan = RealSpectrum::new(len);
    let mut out = vec![0.0; len];
    plan.inverse_into(bins, &mut out);
    out
}

/// `(1/len) Σ_k |X_k|^2` over the full spectrum, reconstructed from the half
/// spectrum: interior bins count twice, DC and Nyquist once.
pub fn spectral_energy(bins: &[Complex64], len: usize) -> f64 {
    let mut total = 0.0;
    for (k, b) in bins.iter().enumerate() {
        let mirrored = k != 0 && !(len % 2 == 0 && k == len / 2);
        total += if mirrored { 2.0 } else { 1.0 } * b.norm_sqr();
    }
    total / len as f64
}
