//! Pipeline configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Environment variable that replaces the master seed.
pub const SEED_ENV: &str = "SFCTOK_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Points kept by uniform subsampling.
    pub sample_n: usize,
    /// Output token budget T.
    pub tokens: usize,
    /// Enhancer window L, stride R and retained bins K_L.
    pub window: usize,
    pub stride: usize,
    pub keep_bins: usize,
    /// Grid bits per axis for curve keys.
    pub bits: u32,
    pub vote_stride: usize,
    pub vote_radius: usize,
    pub graph_k: usize,
    pub tau: f64,
    pub sinkhorn_iters: usize,
    pub sinkhorn_tol: f64,
    pub svd_rank: usize,
    /// Token width d.
    pub width: usize,
    pub seed: u64,
    /// Voxel edge length for the fallback segmentation.
    pub voxel_cell: f64,
    /// Divide merged tokens by the cluster mass.
    pub normalize_pool: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sample_n: 50_000,
            tokens: 256,
            window: 64,
            stride: 16,
            keep_bins: 128,
            bits: 10,
            vote_stride: 16,
            vote_radius: 32,
            graph_k: 8,
            tau: 0.05,
            sinkhorn_iters: 5,
            sinkhorn_tol: 1e-6,
            svd_rank: 32,
            width: 256,
            seed: 0,
            voxel_cell: 0.05,
            normalize_pool: false,
        }
    }
}

/// Independent random streams drawn from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Subsample = 1,
    PointMlp = 2,
    Scorer = 3,
    Projection = 4,
    Svd = 5,
}

/// SplitMix64 finalizer over `(master, stream)`.
pub fn derive_seed(master: u64, stream: SeedStream) -> u64 {
    let mut z = master.wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for '{key}'")))
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 17] = [
        "sample_n",
        "tokens",
        "window",
        "stride",
        "keep_bins",
        "bits",
        "vote_stride",
        "vote_radius",
        "graph_k",
        "tau",
        "sinkhorn_iters",
        "sinkhorn_tol",
        "svd_rank",
        "width",
        "seed",
        "voxel_cell",
        "normalize_pool",
    ];

    /// Set one field by name. Dashes in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "sample_n" => self.sample_n = parse_value(k, value)?,
            "tokens" => self.tokens = parse_value(k, value)?,
            "window" => self.window = parse_value(k, value)?,
            "stride" => self.stride = parse_value(k, value)?,
            "keep_bins" => self.keep_bins = parse_value(k, value)?,
            "bits" => self.bits = parse_value(k, value)?,
            "vote_stride" => self.vote_stride = parse_value(k, value)?,
            "vote_radius" => self.vote_radius = parse_value(k, value)?,
            "graph_k" => self.graph_k = parse_value(k, value)?,
            "tau" => self.tau = parse_value(k, value)?,
            "sinkhorn_iters" => self.sinkhorn_iters = parse_value(k, value)?,
            "sinkhorn_tol" => self.sinkhorn_tol = parse_value(k, value)?,
            "svd_rank" => self.svd_rank = parse_value(k, value)?,
            "width" => self.width = parse_value(k, value)?,
            "seed" => self.seed = parse_value(k, value)?,
            "voxel_cell" => self.voxel_cell = parse_value(k, value)?,
            "normalize_pool" => self.normalize_pool = parse_value(k, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of the current values. `#` starts a
    /// comment; blank lines are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(format!("line {}", i + 1), "expected key = value"));
            };
            self.set(k, v).map_err(|e| match e {
                Error::InvalidConfig(m) => Error::parse(format!("line {}", i + 1), m),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Replace the master seed with `SFCTOK_SEED` when it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse_value(SEED_ENV, &v)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in Self::KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("listed key"));
        }
        s
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "sample_n" => self.sample_n.to_string(),
            "tokens" => self.tokens.to_string(),
            "window" => self.window.to_string(),
            "stride" => self.stride.to_string(),
            "keep_bins" => self.keep_bins.to_string(),
            "bits" => self.bits.to_string(),
            "vote_stride" => self.vote_stride.to_string(),
            "vote_radius" => self.vote_radius.to_string(),
            "graph_k" => self.graph_k.to_string(),
            "tau" => format!("{:?}", self.tau),
            "sinkhorn_iters" => self.sinkhorn_iters.to_string(),
            "sinkhorn_tol" => format!("{:?}", self.sinkhorn_tol),
            "svd_rank" => self.svd_rank.to_string(),
            "width" => self.width.to_string(),
            "seed" => self.seed.to_string(),
            "voxel_cell" => format!("{:?}", self.voxel_cell),
            "normalize_pool" => self.normalize_pool.to_string(),
            _ => return None,
        })
    }

    pub fn seed_for(&self, stream: SeedStream) -> u64 {
        derive_seed(self.seed, stream)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("sample_n", self.sample_n),
            ("tokens", self.tokens),
            ("window", self.window),
            ("stride", self.stride),
            ("keep_bins", self.keep_bins),
            ("vote_stride", self.vote_stride),
            ("vote_radius", self.vote_radius),
            ("graph_k", self.graph_k),
            ("sinkhorn_iters", self.sinkhorn_iters),
            ("svd_rank", self.svd_rank),
            ("width", self.width),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(1..=16).contains(&self.bits) {
            return Err(Error::InvalidBitDepth(self.bits));
        }
        for (name, v) in [("tau", self.tau), ("sinkhorn_tol", self.sinkhorn_tol), ("voxel_cell", self.voxel_cell)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }
}
