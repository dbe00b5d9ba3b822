//! End-to-end tokenization: subsample, pool, serialize, enhance, build the
//! voting graph, embed and merge to a fixed token budget.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{PipelineConfig, SeedStream};
use crate::enhancer::{enhance, EnhancerConfig};
use crate::error::{Error, Result, StageExt};
use crate::graph::{build_graph, normalized_adjacency, GraphConfig, SparseVoteGraph, VoteBatch};
use crate::io::weights::{put_layers, take_layers, Tensors};
use crate::merge::{
    importance_scores, project_logits, sinkhorn, smooth_features, soft_pool, spectral_embed_with, uniform_marginal,
    SvdOptions,
};
use crate::sfc::{serialize_all, CurveKind, ExtentPolicy};
use crate::tokenizer::{point_tokens, superpoint_pool, voxel_superpoints, FourierEmbedConfig};
use crate::types::{seeded_init, PointCloud, SeededWeights, SuperpointPartition, TokenMatrix};

/// The three learned pieces of the tokenizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    /// Point feature MLP, `[(C_in, d), (d, d)]`.
    pub mlp: SeededWeights,
    /// Importance scorer, `[(d, d/2), (d/2, 1)]`.
    pub scorer: SeededWeights,
    /// Cluster projection, one `(svd_rank, T)` layer. Only the first `r` rows
    /// are used when the effective rank `r` is smaller.
    pub projection: SeededWeights,
}

impl ModelWeights {
    pub fn shapes(cfg: &PipelineConfig, in_channels: usize) -> [Vec<(usize, usize)>; 3] {
        let d = cfg.width;
        let half = (d / 2).max(1);
        [
            vec![(in_channels, d), (d, d)],
            vec![(d, half), (half, 1)],
            vec![(cfg.svd_rank, cfg.tokens)],
        ]
    }

    pub fn seeded(cfg: &PipelineConfig, in_channels: usize) -> Result<Self> {
        let [mlp, scorer, projection] = Self::shapes(cfg, in_channels);
        Ok(ModelWeights {
            mlp: seeded_init(cfg.seed_for(SeedStream::PointMlp), &mlp)?,
            scorer: seeded_init(cfg.seed_for(SeedStream::Scorer), &scorer)?,
            projection: seeded_init(cfg.seed_for(SeedStream::Projection), &projection)?,
        })
    }

    pub fn from_tensors(tensors: &Tensors, cfg: &PipelineConfig, in_channels: usize) -> Result<Self> {
        let [mlp, scorer, projection] = Self::shapes(cfg, in_channels);
        Ok(ModelWeights {
            mlp: take_layers(tensors, "mlp", &mlp)?,
            scorer: take_layers(tensors, "scorer", &scorer)?,
            projection: take_layers(tensors, "proj", &projection)?,
        })
    }

    pub fn to_tensors(&self) -> Tensors {
        let mut t = Tensors::new();
        put_layers(&mut t, "mlp", &self.mlp);
        put_layers(&mut t, "scorer", &self.scorer);
        put_layers(&mut t, "proj", &self.projection);
        t
    }

    /// The projection restricted to its first `rank` rows.
    fn projection_rows(&self, rank: usize) -> Result<SeededWeights> {
        let (w, b) = self.projection.layer(0);
        if rank > w.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "projection has {} rows, rank {rank} requested",
                w.nrows()
            )));
        }
        let mut values: Vec<f64> = w.slice(ndarray::s![..rank, ..]).iter().copied().collect();
        values.extend(b.iter());
        SeededWeights::from_values(vec![(rank, w.ncols())], values)
    }
}

/// Counters and per-stage wall-clock of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizeReport {
    pub input_points: usize,
    pub sampled_points: usize,
    pub superpoints: usize,
    pub tokens: usize,
    pub width: usize,
    pub candidates: usize,
    pub votes: u64,
    pub graph_edges: usize,
    pub svd_rank: usize,
    pub sinkhorn_iterations: usize,
    pub sinkhorn_residual: f64,
    pub stage_ms: Vec<(&'static str, f64)>,
}

impl TokenizeReport {
    /// One `key=value` record per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "points={}", self.input_points);
        let _ = writeln!(s, "sampled={}", self.sampled_points);
        let _ = writeln!(s, "M={}", self.superpoints);
        let _ = writeln!(s, "T={}", self.tokens);
        let _ = writeln!(s, "d={}", self.width);
        let _ = writeln!(s, "candidates={}", self.candidates);
        let _ = writeln!(s, "votes={}", self.votes);
        let _ = writeln!(s, "edges={}", self.graph_edges);
        let _ = writeln!(s, "rank={}", self.svd_rank);
        let _ = writeln!(s, "sinkhorn_iters={}", self.sinkhorn_iterations);
        let _ = writeln!(s, "sinkhorn_residual={:e}", self.sinkhorn_residual);
        for (stage, ms) in &self.stage_ms {
            let _ = writeln!(s, "ms_{stage}={ms:.3}");
        }
        let total: f64 = self.stage_ms.iter().map(|(_, ms)| ms).sum();
        let _ = writeln!(s, "ms_total={total:.3}");
        s
    }
}

/// Seeded uniform sample of `k` of `n` indices without replacement, ascending.
pub fn subsample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Subsampled cloud with its superpoint partition.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub input_points: usize,
    pub cloud: PointCloud,
    pub partition: SuperpointPartition,
}

/// Subsample and segment. `labels` are raw per-point ids for the full cloud
/// (`-1` for unassigned); without them voxels of `voxel_cell` are used.
pub fn prepare(cloud: &PointCloud, labels: Option<&[i64]>, cfg: &PipelineConfig) -> Result<PreparedScene> {
    cfg.validate().stage("config")?;
    if let Some(l) = labels {
        if l.len() != cloud.len() {
            return Err(Error::LengthMismatch {
                expected: cloud.len(),
                got: l.len(),
            })
            .stage("labels");
        }
    }
    let idx = subsample_indices(cloud.len(), cfg.sample_n, cfg.seed_for(SeedStream::Subsample));
    let sampled = if idx.len() == cloud.len() {
        cloud.clone()
    } else {
        cloud.select(&idx)
    };
    let partition = match labels {
        Some(l) => {
            let kept: Vec<i64> = idx.iter().map(|&i| l[i]).collect();
            SuperpointPartition::compact(&kept, sampled.positions.view()).stage("labels")?
        }
        None => voxel_superpoints(&sampled, cfg.voxel_cell).stage("labels")?,
    };
    Ok(PreparedScene {
        input_points: cloud.len(),
        cloud: sampled,
        partition,
    })
}

fn graph_config(cfg: &PipelineConfig) -> GraphConfig {
    GraphConfig {
        stride: cfg.vote_stride,
        radius: cfg.vote_radius,
        k: cfg.graph_k,
        bits: cfg.bits,
        curves: CurveKind::ALL.to_vec(),
    }
}

/// Voting graph of a prepared scene.
pub fn scene_graph(scene: &PreparedScene, cfg: &PipelineConfig) -> Result<(VoteBatch, SparseVoteGraph)> {
    build_graph(
        scene.cloud.positions.view(),
        &scene.partition.labels,
        scene.partition.centers.view(),
        &graph_config(cfg),
    )
    .stage("graph")
}

/// Run the full pipeline. Without `weights`, weights are drawn from the
/// configured seed.
pub fn tokenize(
    cloud: &PointCloud,
    labels: Option<&[i64]>,
    cfg: &PipelineConfig,
    weights: Option<&ModelWeights>,
) -> Result<(TokenMatrix, TokenizeReport)> {
    let mut stage_ms = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, stage_ms: &mut Vec<(&'static str, f64)>| {
        stage_ms.push((name, clock.elapsed().as_secs_f64() * 1e3));
        clock = Instant::now();
    };

    let scene = prepare(cloud, labels, cfg)?;
    let m = scene.partition.num_superpoints();
    if cfg.tokens > m {
        return Err(Error::SuggestLowerT {
            tokens: cfg.tokens,
            superpoints: m,
        })
        .stage("merge");
    }
    lap("prepare", &mut stage_ms);

    let seeded;
    let weights = match weights {
        Some(w) => w,
        None => {
            seeded = ModelWeights::seeded(cfg, scene.cloud.channels()).stage("tokenizer")?;
            &seeded
        }
    };
    let embed = FourierEmbedConfig::new(cfg.width);
    let x0 = point_tokens(&scene.cloud, &weights.mlp, &embed).stage("tokenizer")?;
    let s0 = superpoint_pool(x0.view(), &scene.partition).stage("tokenizer")?;
    lap("tokenizer", &mut stage_ms);

    let curves = serialize_all(s0.centers.view(), cfg.bits, ExtentPolicy::Collapse).stage("serialize")?;
    lap("serialize", &mut stage_ms);

    let enh = EnhancerConfig::low_pass(cfg.window, cfg.stride, cfg.keep_bins);
    let s = enhance(&s0, &enh, &curves).stage("enhancer")?;
    lap("enhancer", &mut stage_ms);

    let (batch, graph) = scene_graph(&scene, cfg)?;
    let adjacency = normalized_adjacency(&graph);
    lap("graph", &mut stage_ms);

    let rank = cfg.svd_rank.min(m).min(cfg.width);
    let y = smooth_features(&adjacency, &s).stage("spectral")?;
    let svd = SvdOptions {
        seed: cfg.seed_for(SeedStream::Svd),
        ..SvdOptions::default()
    };
    let emb = spectral_embed_with(y.view(), rank, &svd).stage("spectral")?;
    lap("spectral", &mut stage_ms);

    let mu = importance_scores(&s, &weights.scorer).stage("merge")?;
    let proj = weights.projection_rows(rank).stage("merge")?;
    let logits = project_logits(emb.embedding.view(), &proj).stage("merge")?;
    let nu = uniform_marginal(cfg.tokens);
    let plan = sinkhorn(logits.view(), &mu, &nu, cfg.tau, cfg.sinkhorn_iters, cfg.sinkhorn_tol).stage("merge")?;
    let merged = soft_pool(&plan, &s, cfg.normalize_pool).stage("merge")?;
    lap("merge", &mut stage_ms);

    let report = TokenizeReport {
        input_points: scene.input_points,
        sampled_points: scene.cloud.len(),
        superpoints: m,
        tokens: merged.len(),
        width: merged.width(),
        candidates: batch.candidates,
        votes: batch.total_votes(),
        graph_edges: graph.num_edges(),
        svd_rank: rank,
        sinkhorn_iterations: plan.iterations,
        sinkhorn_residual: plan.residual,
        stage_ms,
    };
    Ok((merged, report))
}
