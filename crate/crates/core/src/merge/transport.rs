//! Importance marginals, cluster logits, log-domain Sinkhorn and soft pooling.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::types::{SeededWeights, TokenMatrix};

/// Softmax of a per-token MLP score: positive weights summing to one.
pub fn importance_scores(tokens: &TokenMatrix, weights: &SeededWeights) -> Result<Vec<f64>> {
    let d = tokens.width();
    weights.expect_shapes(&[(d, (d / 2).max(1)), ((d / 2).max(1), 1)])?;
    let raw = weights.forward(tokens.feats.view())?;
    Ok(softmax(raw.column(0).iter().copied()))
}

fn softmax(xs: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `Z_emb · W_proj` with `W_proj` the single `(r, T)` layer of `weights`.
/// The layer's bias slot is not used.
pub fn project_logits(embedding: ArrayView2<f64>, weights: &SeededWeights) -> Result<Array2<f64>> {
    let r = embedding.ncols();
    if weights.num_layers() != 1 || weights.shapes[0].0 != r {
        return Err(Error::ShapeMismatch(format!(
            "projection must be one ({r}, T) layer, got {:?}",
            weights.shapes
        )));
    }
    let (w, _) = weights.layer(0);
    Ok(embedding.dot(&w))
}

/// Uniform cluster masses `1/T`.
pub fn uniform_marginal(len: usize) -> Vec<f64> {
    vec![1.0 / len as f64; len]
}

/// Soft assignment of M tokens to T clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// M×T, non-negative.
    pub plan: Array2<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub iterations: usize,
    /// `max(|P 1 - mu|_inf, |P^T 1 - nu|_inf)` of the returned plan.
    pub residual: f64,
    /// Residual after each iteration.
    pub history: Vec<f64>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.plan.columns().into_iter().map(|c| c.sum()).collect()
    }
}

fn check_marginal(name: &str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::InvalidMarginals(format!("{name} has {} entries, expected {len}", v.len())));
    }
    if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidMarginals(format!("{name} must be finite and non-negative")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidMarginals(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Entropic OT with kernel `exp(logits / tau)`: higher logits attract more mass.
///
/// Works on dual potentials in the log domain. Each iteration fits the column
/// marginals and then the row marginals, so the returned plan always has
/// rows matching `mu` up to rounding. Stops once the residual is at most
/// `tol` or after `max_iters` iterations.
pub fn sinkhorn(
    logits: ArrayView2<f64>,
    mu: &[f64],
    nu: &[f64],
    tau: f64,
    max_iters: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let (m, t) = logits.dim();
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTemperature(tau));
    }
    check_marginal("mu", mu, m)?;
    check_marginal("nu", nu, t)?;
    let kernel = logits.mapv(|v| v / tau);
    if kernel.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteKernel);
    }
    let log_mu: Vec<f64> = mu.iter().map(|v| v.ln()).collect();
    let log_nu: Vec<f64> = nu.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; t];

    let build = |f: &[f64], g: &[f64]| -> Array2<f64> {
        Array2::from_shape_fn((m, t), |(i, j)| {
            let v = kernel[[i, j]] + f[i] + g[j];
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                v.exp()
            }
        })
    };
    let residual_of = |p: &Array2<f64>| -> f64 {
        let rows = p
            .rows()
            .into_iter()
            .zip(mu)
            .fold(0.0f64, |acc, (r, &target)| acc.max((r.sum() - target).abs()));
        p.columns()
            .into_iter()
            .zip(nu)
            .fold(rows, |acc, (c, &target)| acc.max((c.sum() - target).abs()))
    };

    let mut plan = build(&f, &g);
    let mut residual = residual_of(&plan);
    let mut history = Vec::with_capacity(max_iters);
    let mut iterations = 0;
    while iterations < max_iters && residual > tol {
        for j in 0..t {
            g[j] = log_nu[j] - log_sum_exp((0..m).map(|i| kernel[[i, j]] + f[i]));
        }
        for i in 0..m {
            f[i] = log_mu[i] - log_sum_exp((0..t).map(|j| kernel[[i, j]] + g[j]));
        }
        plan = build(&f, &g);
        if plan.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteKernel);
        }
        residual = residual_of(&plan);
        history.push(residual);
        iterations += 1;
    }
    Ok(TransportPlan {
        plan,
        mu: mu.to_vec(),
        nu: nu.to_vec(),
        iterations,
        residual,
        history,
    })
}

/// `Z' = Pᵀ S`, `C' = Pᵀ C`. With `normalize`, cluster `k` is divided by
/// `nu[k]` so each output row is a weighted mean (clusters with zero mass stay zero).
pub fn soft_pool(plan: &TransportPlan, tokens: &TokenMatrix, normalize: bool) -> Result<TokenMatrix> {
    if plan.plan.nrows() != tokens.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan has {} rows, tokens {}",
            plan.plan.nrows(),
            tokens.len()
        )));
    }
    let pt = plan.plan.t();
    let mut feats = pt.dot(&tokens.feats);
    let mut centers = pt.dot(&tokens.centers);
    if normalize {
        for (k, &mass) in plan.nu.iter().enumerate() {
            let scale = if mass > 0.0 { 1.0 / mass } else { 0.0 };
            feats.row_mut(k).mapv_inplace(|v| v * scale);
            centers.row_mut(k).mapv_inplace(|v| v * scale);
        }
    }
    Ok(TokenMatrix { feats, centers })
}
