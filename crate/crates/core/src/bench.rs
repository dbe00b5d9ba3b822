//! Scaling benchmark for the voting graph against the brute-force oracle.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::Result;
use crate::graph::{boundary_knn_oracle, build_graph, edge_recall, GraphConfig};
use crate::sfc::CurveKind;
use crate::synth::cube_scene;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Point counts, ascending.
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Largest N for which the quadratic oracle runs.
    pub oracle_cap: usize,
    pub seed: u64,
    pub graph: GraphConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![10_000, 20_000, 40_000, 80_000, 160_000],
            trials: 3,
            oracle_cap: 16_000,
            seed: 0,
            graph: GraphConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub superpoints: usize,
    pub build_ms_median: f64,
    pub build_ms_min: f64,
    pub candidates: usize,
    /// `C · (N / r) · (2W + 1)` for C curves.
    pub closed_form: f64,
    pub oracle_ms: Option<f64>,
    pub recall: Option<f64>,
    pub recall_single_curve: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub build_slope: Option<f64>,
    pub oracle_slope: Option<f64>,
}

/// Least-squares slope of `ln y` on `ln x`; `None` with fewer than two points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Expected candidate count with no boundary clipping.
pub fn closed_form_candidates(n: usize, curves: usize, stride: usize, radius: usize) -> f64 {
    curves as f64 * (n as f64 / stride as f64) * (2 * radius + 1) as f64
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let trials = cfg.trials.max(1);
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for (si, &n) in cfg.sizes.iter().enumerate() {
        let (cloud, part) = cube_scene(n, cfg.seed.wrapping_add(si as u64));
        let pos = cloud.positions.view();
        let centers = part.centers.view();
        let mut times = Vec::with_capacity(trials);
        let mut last = None;
        for _ in 0..trials {
            let t0 = Instant::now();
            let out = build_graph(pos, &part.labels, centers, &cfg.graph)?;
            times.push(t0.elapsed().as_secs_f64() * 1e3);
            last = Some(out);
        }
        let (batch, graph) = last.expect("at least one trial");

        let (oracle_ms, recall, recall_single_curve) = if n <= cfg.oracle_cap {
            let mut otimes = Vec::with_capacity(trials);
            let mut oracle = Vec::new();
            for _ in 0..trials {
                let t0 = Instant::now();
                oracle = boundary_knn_oracle(pos, &part.labels, part.num_superpoints(), cfg.graph.k);
                otimes.push(t0.elapsed().as_secs_f64() * 1e3);
            }
            let single = GraphConfig {
                curves: vec![CurveKind::Hilbert],
                ..cfg.graph.clone()
            };
            let (_, g1) = build_graph(pos, &part.labels, centers, &single)?;
            (
                Some(median(otimes)),
                Some(edge_recall(&graph, &oracle)),
                Some(edge_recall(&g1, &oracle)),
            )
        } else {
            (None, None, None)
        };

        rows.push(BenchRow {
            n,
            superpoints: part.num_superpoints(),
            build_ms_min: times.iter().copied().fold(f64::INFINITY, f64::min),
            build_ms_median: median(times),
            candidates: batch.candidates,
            closed_form: closed_form_candidates(n, cfg.graph.curves.len(), cfg.graph.stride, cfg.graph.radius),
            oracle_ms,
            recall,
            recall_single_curve,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let build: Vec<f64> = rows.iter().map(|r| r.build_ms_median).collect();
    let (on, ot): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.oracle_ms.map(|t| (r.n as f64, t)))
        .unzip();
    Ok(BenchReport {
        build_slope: loglog_slope(&ns, &build),
        oracle_slope: loglog_slope(&on, &ot),
        rows,
    })
}

impl BenchReport {
    /// CSV table followed by `# key=value` comment lines for the fitted slopes.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut s = String::from(
            "n,superpoints,build_ms_median,build_ms_min,candidates,closed_form,oracle_ms,recall,recall_single_curve\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.3},{:.3},{},{:.1},{},{},{}",
                r.n,
                r.superpoints,
                r.build_ms_median,
                r.build_ms_min,
                r.candidates,
                r.closed_form,
                opt(r.oracle_ms),
                opt(r.recall),
                opt(r.recall_single_curve)
            );
        }
        let _ = writeln!(s, "# build_slope={}", opt(self.build_slope));
        let _ = writeln!(s, "# oracle_slope={}", opt(self.oracle_slope));
        s
    }
}
