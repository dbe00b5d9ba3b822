//! Sparse superpoint graph built by window voting along point-level curves.
//!
//! Points are serialized along several space-filling curves. Anchors sampled
//! every `stride` positions vote for every other superpoint seen within
//! `radius` positions of them. Votes are coalesced, each source keeps its `k`
//! best candidates by (squared center distance, -votes, dst), and the result
//! is symmetrized by edge union.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::sfc::{serialize_all, CurveKind, CurveOrder, ExtentPolicy};
use crate::types::SENTINEL;

/// A directed vote count between two superpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vote {
    pub src: u32,
    pub dst: u32,
    pub votes: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VoteBatch {
    pub edges: Vec<Vote>,
    pub coalesced: bool,
    /// Window slots scanned (anchor included), summed over curves and anchors.
    pub candidates: usize,
}

impl VoteBatch {
    pub fn total_votes(&self) -> u64 {
        self.edges.iter().map(|e| e.votes as u64).sum()
    }
}

/// Cast votes along each curve.
///
/// For anchors at sorted positions `0, stride, 2*stride, ...`, every other
/// position within `radius` (clipped at the sequence ends) contributes one vote
/// `(label[anchor], label[other])` when both labels are valid and differ.
pub fn window_vote(labels: &[i32], curves: &[CurveOrder], stride: usize, radius: usize) -> VoteBatch {
    assert!(stride >= 1 && radius >= 1, "stride and radius must be >= 1");
    let n = labels.len();
    let mut edges = Vec::new();
    let mut candidates = 0;
    for curve in curves {
        assert_eq!(curve.len(), n, "curve order must cover every point");
        let sorted: Vec<i32> = curve.perm.iter().map(|&i| labels[i]).collect();
        for p in (0..n).step_by(stride) {
            let lo = p.saturating_sub(radius);
            let hi = (p + radius).min(n - 1);
            candidates += hi - lo + 1;
            let si = sorted[p];
            if si == SENTINEL {
                continue;
            }
            for (q, &sj) in sorted.iter().enumerate().take(hi + 1).skip(lo) {
                if q != p && sj != SENTINEL && sj != si {
                    edges.push(Vote {
                        src: si as u32,
                        dst: sj as u32,
                        votes: 1,
                    });
                }
            }
        }
    }
    VoteBatch {
        edges,
        coalesced: false,
        candidates,
    }
}

/// Sum duplicate `(src, dst)` votes; output sorted by `(src, dst)`.
pub fn coalesce(batch: VoteBatch) -> VoteBatch {
    let VoteBatch {
        mut edges,
        candidates,
        ..
    } = batch;
    edges.sort_unstable_by_key(|e| (e.src, e.dst));
    let mut out: Vec<Vote> = Vec::with_capacity(edges.len() / 4 + 1);
    for e in edges {
        match out.last_mut() {
            Some(last) if last.src == e.src && last.dst == e.dst => last.votes += e.votes,
            _ => out.push(e),
        }
    }
    VoteBatch {
        edges: out,
        coalesced: true,
        candidates,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dst: usize,
    pub dist2: f64,
    pub votes: u32,
}

/// Composite ranking key: nearer first, then more votes, then lower index.
pub fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.dist2
        .total_cmp(&b.dist2)
        .then(b.votes.cmp(&a.votes))
        .then(a.dst.cmp(&b.dst))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseVoteGraph {
    pub num_nodes: usize,
    /// Per-source top-k selection before symmetrization.
    pub selected: Vec<Vec<Neighbor>>,
    /// Symmetrized neighbor lists, sorted by [`rank_order`].
    pub neighbors: Vec<Vec<Neighbor>>,
    pub degree: Vec<usize>,
}

impl SparseVoteGraph {
    pub fn num_edges(&self) -> usize {
        self.degree.iter().sum::<usize>() / 2
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.neighbors[s].iter().any(|n| n.dst == t)
    }

    /// Undirected edges `(s, t)` with `s < t`, sorted.
    pub fn edge_list(&self) -> Vec<(usize, usize, f64, u32)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (s, list) in self.neighbors.iter().enumerate() {
            for n in list {
                if s < n.dst {
                    out.push((s, n.dst, n.dist2, n.votes));
                }
            }
        }
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }
}

fn dist2(centers: &ArrayView2<f64>, s: usize, t: usize) -> f64 {
    (0..3).map(|a| (centers[[s, a]] - centers[[t, a]]).powi(2)).sum()
}

/// Keep each source's `k` best candidates, then symmetrize by union.
pub fn rerank_topk(batch: &VoteBatch, centers: ArrayView2<f64>, k: usize) -> Result<SparseVoteGraph> {
    let m = centers.nrows();
    let owned;
    let batch = if batch.coalesced {
        batch
    } else {
        owned = coalesce(batch.clone());
        &owned
    };
    if let Some(e) = batch.edges.iter().find(|e| e.src as usize >= m || e.dst as usize >= m) {
        return Err(Error::DimensionMismatch(format!(
            "edge ({}, {}) references a node outside 0..{m}",
            e.src, e.dst
        )));
    }

    let mut selected: Vec<Vec<Neighbor>> = vec![Vec::new(); m];
    let mut start = 0;
    while start < batch.edges.len() {
        let src = batch.edges[start].src as usize;
        let mut end = start;
        while end < batch.edges.len() && batch.edges[end].src as usize == src {
            end += 1;
        }
        let mut cands: Vec<Neighbor> = batch.edges[start..end]
            .iter()
            .filter(|e| e.dst as usize != src)
            .map(|e| Neighbor {
                dst: e.dst as usize,
                dist2: dist2(&centers, src, e.dst as usize),
                votes: e.votes,
            })
            .collect();
        if cands.len() > k {
            cands.select_nth_unstable_by(k, rank_order);
            cands.truncate(k);
        }
        cands.sort_by(rank_order);
        selected[src] = cands;
        start = end;
    }

    let lookup = |s: usize, t: usize| -> Option<u32> {
        batch
            .edges
            .binary_search_by_key(&(s as u32, t as u32), |e| (e.src, e.dst))
            .ok()
            .map(|i| batch.edges[i].votes)
    };

    let mut neighbors: Vec<Vec<Neighbor>> = selected.clone();
    for (s, list) in selected.iter().enumerate() {
        for n in list {
            let t = n.dst;
            if !neighbors[t].iter().any(|x| x.dst == s) {
                neighbors[t].push(Neighbor {
                    dst: s,
                    dist2: n.dist2,
                    votes: lookup(t, s).unwrap_or(n.votes),
                });
            }
        }
    }
    for list in &mut neighbors {
        list.sort_by(rank_order);
    }
    let degree = neighbors.iter().map(Vec::len).collect();
    Ok(SparseVoteGraph {
        num_nodes: m,
        selected,
        neighbors,
        degree,
    })
}

/// Compressed sparse rows of a square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub size: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(size: usize) -> Self {
        CsrMatrix {
            size,
            indptr: vec![0; size + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.size, self.size));
        for i in 0..self.size {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// `self · x` for a dense `size × d` right-hand side.
    pub fn mul_dense(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.size {
            return Err(Error::DimensionMismatch(format!(
                "sparse matrix is {0}×{0}, right-hand side has {1} rows",
                self.size,
                x.nrows()
            )));
        }
        let mut out = Array2::zeros((self.size, x.ncols()));
        for i in 0..self.size {
            let mut row = out.row_mut(i);
            for (j, v) in self.row(i) {
                row.scaled_add(v, &x.row(j));
            }
        }
        Ok(out)
    }
}

/// `D^{-1/2} A D^{-1/2}` with binary `A`; isolated nodes give empty rows.
pub fn normalized_adjacency(graph: &SparseVoteGraph) -> CsrMatrix {
    let mut out = CsrMatrix::zeros(graph.num_nodes);
    out.indptr.clear();
    out.indptr.push(0);
    for (s, list) in graph.neighbors.iter().enumerate() {
        let mut cols: Vec<usize> = list.iter().map(|n| n.dst).collect();
        cols.sort_unstable();
        for t in cols {
            out.indices.push(t);
            out.values
                .push(1.0 / ((graph.degree[s] * graph.degree[t]) as f64).sqrt());
        }
        out.indptr.push(out.indices.len());
    }
    out
}

/// Parameters of the point-level voting graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub stride: usize,
    pub radius: usize,
    pub k: usize,
    pub bits: u32,
    pub curves: Vec<CurveKind>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            stride: 16,
            radius: 32,
            k: 8,
            bits: crate::sfc::DEFAULT_BITS,
            curves: CurveKind::ALL.to_vec(),
        }
    }
}

/// Serialize points, vote, coalesce and rerank in one call.
pub fn build_graph(
    positions: ArrayView2<f64>,
    labels: &[i32],
    centers: ArrayView2<f64>,
    cfg: &GraphConfig,
) -> Result<(VoteBatch, SparseVoteGraph)> {
    if cfg.stride == 0 || cfg.radius == 0 {
        return Err(Error::InvalidConfig("graph stride and radius must be >= 1".into()));
    }
    if labels.len() != positions.nrows() {
        return Err(Error::LengthMismatch {
            expected: positions.nrows(),
            got: labels.len(),
        });
    }
    let orders: Vec<CurveOrder> = serialize_all(positions, cfg.bits, ExtentPolicy::Collapse)?
        .into_iter()
        .filter(|o| cfg.curves.contains(&o.kind))
        .collect();
    let batch = coalesce(window_vote(labels, &orders, cfg.stride, cfg.radius));
    let graph = rerank_topk(&batch, centers, cfg.k)?;
    Ok((batch, graph))
}

/// Brute-force reference: for every pair of distinct superpoints, the minimum
/// point-to-point squared distance; each superpoint keeps its `k` nearest
/// superpoints (ties by index). Quadratic in the number of points.
pub fn boundary_knn_oracle(positions: ArrayView2<f64>, labels: &[i32], num_nodes: usize, k: usize) -> Vec<Vec<usize>> {
    let m = num_nodes;
    let mut best = vec![f64::INFINITY; m * m];
    let pts: Vec<[f64; 3]> = positions.outer_iter().map(|r| [r[0], r[1], r[2]]).collect();
    for i in 0..pts.len() {
        let si = labels[i];
        if si == SENTINEL {
            continue;
        }
        let si = si as usize;
        let pi = pts[i];
        for j in (i + 1)..pts.len() {
            let sj = labels[j];
            if sj == SENTINEL || sj as usize == si {
                continue;
            }
            let pj = pts[j];
            let d = (pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2) + (pi[2] - pj[2]).powi(2);
            let slot = &mut best[si * m + sj as usize];
            if d < *slot {
                *slot = d;
                best[sj as usize * m + si] = d;
            }
        }
    }
    (0..m)
        .map(|s| {
            let mut cands: Vec<(f64, usize)> = (0..m)
                .filter(|&t| t != s && best[s * m + t].is_finite())
                .map(|t| (best[s * m + t], t))
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cands.truncate(k);
            cands.into_iter().map(|(_, t)| t).collect()
        })
        .collect()
}

/// Fraction of oracle edges `(s, t)` present in the graph.
pub fn edge_recall(graph: &SparseVoteGraph, oracle: &[Vec<usize>]) -> f64 {
    let total: usize = oracle.iter().map(Vec::len).sum();
    if total == 0 {
        return 1.0;
    }
    let hit: usize = oracle
        .iter()
        .enumerate()
        .map(|(s, list)| list.iter().filter(|&&t| graph.has_edge(s, t)).count())
        .sum();
    hit as f64 / total as f64
}
