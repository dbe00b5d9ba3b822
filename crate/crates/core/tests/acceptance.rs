//! Acceptance suite. Runs every criterion in sequence (timings are not
//! disturbed by parallel tests), prints one PASS/FAIL line each, and exits
//! non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use common::*;
use sfctok::enhancer::{enhance, EnhancerConfig};
use sfctok::gfm::{gfm_apply, GfmConfig};
use sfctok::graph::{boundary_knn_oracle, build_graph, coalesce, edge_recall, rerank_topk, window_vote, GraphConfig};
use sfctok::io::tokenfile::{encode_tokens, Precision};
use sfctok::merge::{sinkhorn, smooth_features, soft_pool, spectral_embed, uniform_marginal};
use sfctok::sfc::{encode, serialize, serialize_all, CurveKind, ExtentPolicy, GridCoord};
use sfctok::spectrum::{rfft_forward, rfft_inverse, spectral_energy};
use sfctok::synth::{cube_scene, room_scene};
use sfctok::{tokenize, PipelineConfig, TokenMatrix};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn sfc_correctness() -> Outcome {
    let t0 = Instant::now();
    for bits in 1..=4u32 {
        let side = 1u32 << bits;
        let total = 1usize << (3 * bits);
        for kind in CurveKind::ALL {
            let mut cell_of: Vec<Option<GridCoord>> = vec![None; total];
            for x in 0..side {
                for y in 0..side {
                    for z in 0..side {
                        let g = GridCoord { x, y, z, bits };
                        let key = encode(g, kind) as usize;
                        check(key < total, format!("{} b={bits}: key {key} out of range", kind.name()))?;
                        check(cell_of[key].is_none(), format!("{} b={bits}: key {key} hit twice", kind.name()))?;
                        cell_of[key] = Some(g);
                    }
                }
            }
            check(cell_of.iter().all(Option::is_some), format!("{} b={bits}: not onto", kind.name()))?;
            if matches!(kind, CurveKind::Hilbert | CurveKind::HilbertT) {
                for w in cell_of.windows(2) {
                    let (a, b) = (w[0].unwrap(), w[1].unwrap());
                    let d = a.x.abs_diff(b.x) + a.y.abs_diff(b.y) + a.z.abs_diff(b.z);
                    check(d == 1, format!("{} b={bits}: consecutive cells {a:?} {b:?} at distance {d}", kind.name()))?;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(secs < 10.0, format!("runtime {secs:.2}s"))?;
    Ok(format!("4 curves x b=1..4 bijective, Hilbert adjacency holds, {secs:.2}s"))
}

fn enhancer_identity() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(2);
    let cfg = EnhancerConfig::with_gate(64, 16, vec![1.0; 33]);
    let mut worst = 0.0f64;
    for inst in 0..100 {
        let k = r.random_range(1..=512);
        let d = r.random_range(1..=64);
        let feats = uniform(k, d, -1.0, 1.0, 1000 + inst);
        let centers = uniform(k, 3, 0.0, 4.0, 2000 + inst);
        let tokens = TokenMatrix::new(feats.clone(), centers.clone()).unwrap();
        let curve = serialize(centers.view(), CurveKind::Hilbert, 10, ExtentPolicy::Collapse).unwrap();
        let out = enhance(&tokens, &cfg, &[curve]).unwrap();
        let doubled = feats.mapv(|v| 2.0 * v);
        let scale = doubled.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        worst = worst.max(max_abs_diff(out.feats.view(), doubled.view()) / scale);
    }
    check(worst <= 1e-8, format!("enhance vs 2S max-rel error {worst:e}"))?;

    let mut round_trip = 0.0f64;
    let mut parseval = 0.0f64;
    let mut vs_dft = 0.0f64;
    for len in (1..=300).chain([511, 512, 1000, 1024]) {
        let x: Vec<f64> = (0..len).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let bins = rfft_forward(&x);
        let back = rfft_inverse(&bins, len);
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        round_trip = round_trip.max(x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / xmax);
        let energy: f64 = x.iter().map(|v| v * v).sum();
        parseval = parseval.max((spectral_energy(&bins, len) - energy).abs() / energy);
        if len <= 300 {
            let dft = naive_dft(&x);
            for (b, &(re, im)) in bins.iter().zip(&dft) {
                vs_dft = vs_dft.max(((b.re - re).powi(2) + (b.im - im).powi(2)).sqrt() / (len as f64 * xmax));
            }
        }
    }
    check(round_trip < 1e-10, format!("rFFT round trip error {round_trip:e}"))?;
    check(parseval < 1e-10, format!("Parseval relative error {parseval:e}"))?;
    check(vs_dft < 1e-10, format!("rFFT vs direct DFT error {vs_dft:e}"))?;
    let secs = t0.elapsed().as_secs_f64();
    check(secs < 30.0, format!("runtime {secs:.2}s"))?;
    Ok(format!(
        "2S max-rel {worst:.1e}, round trip {round_trip:.1e}, Parseval {parseval:.1e}, {secs:.2}s"
    ))
}

fn graph_oracles() -> Outcome {
    let cfg = GraphConfig::default();
    let (mut recall4, mut recall1) = (0.0, 0.0);
    let mut ms = Vec::new();
    for seed in 0..20u64 {
        let (cloud, part) = cube_scene(2000, 500 + seed);
        let m = part.num_superpoints();
        ms.push(m);
        let orders = serialize_all(cloud.positions.view(), cfg.bits, ExtentPolicy::Collapse).unwrap();
        let raw = window_vote(&part.labels, &orders, cfg.stride, cfg.radius);
        let expected = coalesce_oracle(&raw.edges);
        let merged = coalesce(raw.clone());
        check(merged.edges.len() == expected.len(), format!("scene {seed}: coalesced edge count differs"))?;
        for e in &merged.edges {
            check(
                expected.get(&(e.src, e.dst)) == Some(&e.votes),
                format!("scene {seed}: edge ({}, {}) votes differ", e.src, e.dst),
            )?;
        }
        check(
            merged.edges.windows(2).all(|w| (w[0].src, w[0].dst) < (w[1].src, w[1].dst)),
            format!("scene {seed}: coalesced edges not sorted"),
        )?;

        let graph = rerank_topk(&merged, part.centers.view(), cfg.k).unwrap();
        let want = topk_oracle(&expected, part.centers.view(), cfg.k);
        for s in 0..m {
            check(
                neighbor_ids(&graph.selected[s]) == want[s],
                format!("scene {seed}: top-k of node {s} differs from full sort"),
            )?;
        }
        // Symmetrization is the union of the selections.
        for s in 0..m {
            for t in 0..m {
                let union = want[s].iter().any(|&(x, _)| x == t) || want[t].iter().any(|&(x, _)| x == s);
                check(graph.has_edge(s, t) == union, format!("scene {seed}: symmetrized edge ({s}, {t})"))?;
            }
        }

        let oracle = boundary_knn_oracle(cloud.positions.view(), &part.labels, m, cfg.k);
        recall4 += edge_recall(&graph, &oracle);
        let single = GraphConfig {
            curves: vec![CurveKind::Hilbert],
            ..cfg.clone()
        };
        let (_, g1) = build_graph(cloud.positions.view(), &part.labels, part.centers.view(), &single).unwrap();
        recall1 += edge_recall(&g1, &oracle);
    }
    recall4 /= 20.0;
    recall1 /= 20.0;
    check(recall4 >= recall1, format!("recall 4 curves {recall4:.4} < 1 curve {recall1:.4}"))?;
    let mean_m = ms.iter().sum::<usize>() as f64 / ms.len() as f64;
    Ok(format!(
        "20 scenes (mean M {mean_m:.1}) exact vs oracles; recall 4 curves {recall4:.4}, 1 curve {recall1:.4}"
    ))
}

fn median_ms(trials: usize, mut f: impl FnMut()) -> f64 {
    let mut t: Vec<f64> = (0..trials)
        .map(|_| {
            let t0 = Instant::now();
            f();
            t0.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    t.sort_by(f64::total_cmp);
    t[t.len() / 2]
}

fn complexity_scaling() -> Outcome {
    let t0 = Instant::now();
    let cfg = GraphConfig::default();
    let sizes = [10_000usize, 20_000, 40_000, 80_000, 160_000];
    let mut build = Vec::new();
    let mut worst_gap = 0.0f64;
    for (i, &n) in sizes.iter().enumerate() {
        let (cloud, part) = cube_scene(n, 40 + i as u64);
        let mut cands = 0;
        build.push(median_ms(3, || {
            let (b, _) = build_graph(cloud.positions.view(), &part.labels, part.centers.view(), &cfg).unwrap();
            cands = b.candidates;
        }));
        let closed = 4.0 * (n as f64 / cfg.stride as f64) * (2 * cfg.radius + 1) as f64;
        worst_gap = worst_gap.max((cands as f64 - closed).abs() / closed);
    }
    let small = [2_000usize, 4_000, 8_000, 16_000];
    let mut brute = Vec::new();
    for (i, &n) in small.iter().enumerate() {
        let (cloud, part) = cube_scene(n, 80 + i as u64);
        brute.push(median_ms(3, || {
            boundary_knn_oracle(cloud.positions.view(), &part.labels, part.num_superpoints(), cfg.k);
        }));
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let bs: Vec<f64> = small.iter().map(|&n| n as f64).collect();
    let build_slope = fit_slope(&xs, &build);
    let brute_slope = fit_slope(&bs, &brute);
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!(
        "build slope {build_slope:.3} ({build:.1?} ms), brute slope {brute_slope:.3} ({brute:.1?} ms), \
         candidate gap {:.3}%, {secs:.1}s",
        worst_gap * 100.0
    );
    check(build_slope <= 1.3, detail.clone())?;
    check(brute_slope >= 1.8, detail.clone())?;
    check(worst_gap <= 0.02, detail.clone())?;
    check(secs < 300.0, detail.clone())?;
    Ok(detail)
}

fn softmax_marginal(m: usize, r: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| StandardNormal.sample(r)).collect();
    let mx = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = raw.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn sinkhorn_correctness() -> Outcome {
    let t0 = Instant::now();
    let (m, t, tau) = (128, 16, 0.05);
    let mut r = rng(5);
    let nu = uniform_marginal(t);
    let (mut resid, mut agree, mut shift, mut flat) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for inst in 0..50u64 {
        let logits = uniform(m, t, -1.0, 1.0, 7000 + inst);
        let mu = softmax_marginal(m, &mut r);
        let p = sinkhorn(logits.view(), &mu, &nu, tau, 500, 1e-9).unwrap();
        resid = resid.max(p.residual);
        let reference = dense_sinkhorn(logits.view(), &mu, &nu, tau);
        agree = agree.max(max_abs_diff(p.plan.view(), reference.view()));

        let a: Vec<f64> = (0..m).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        let b: Vec<f64> = (0..t).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        let c = r.random::<f64>() * 10.0 - 5.0;
        let shifted = Array2::from_shape_fn((m, t), |(i, j)| logits[[i, j]] + c + a[i] + b[j]);
        // Invariance holds at the fixed point, so both solves run to a tight tolerance.
        let p0 = sinkhorn(logits.view(), &mu, &nu, tau, 20_000, 1e-14).unwrap();
        let ps = sinkhorn(shifted.view(), &mu, &nu, tau, 20_000, 1e-14).unwrap();
        shift = shift.max(max_abs_diff(p0.plan.view(), ps.plan.view()));

        let hot = sinkhorn(logits.view(), &mu, &nu, 1e6, 500, 1e-9).unwrap();
        let outer = Array2::from_shape_fn((m, t), |(i, j)| mu[i] * nu[j]);
        flat = flat.max(max_abs_diff(hot.plan.view(), outer.view()));
    }
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!(
        "residual {resid:.1e}, vs reference {agree:.1e}, shift {shift:.1e}, tau=1e6 vs mu nu^T {flat:.1e}, {secs:.2}s"
    );
    check(resid <= 1e-8, detail.clone())?;
    check(agree <= 1e-7, detail.clone())?;
    check(shift <= 1e-10, detail.clone())?;
    check(flat <= 1e-4, detail.clone())?;
    check(secs < 60.0, detail.clone())?;
    Ok(detail)
}

fn mass_conservation() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    let mut count = 0;
    for inst in 0..50u64 {
        let m = r.random_range(16..=300);
        let t = r.random_range(1..=m.min(64));
        let d = r.random_range(1..=48);
        let logits = uniform(m, t, -1.0, 1.0, 9000 + inst);
        let mu = softmax_marginal(m, &mut r);
        let nu = uniform_marginal(t);
        let tokens = TokenMatrix::new(uniform(m, d, -3.0, 3.0, 9100 + inst), uniform(m, 3, 0.0, 5.0, 9200 + inst)).unwrap();
        for iters in [1, 5, 50] {
            let plan = sinkhorn(logits.view(), &mu, &nu, 0.05, iters, 1e-6).unwrap();
            let merged = soft_pool(&plan, &tokens, false).unwrap();
            for (col_merged, col_src) in [(&merged.feats, &tokens.feats), (&merged.centers, &tokens.centers)] {
                for j in 0..col_src.ncols() {
                    let lhs: f64 = col_merged.column(j).sum();
                    let rhs: f64 = (0..m).map(|i| mu[i] * col_src[[i, j]]).sum();
                    let scale: f64 = (0..m).map(|i| (mu[i] * col_src[[i, j]]).abs()).sum::<f64>().max(1e-300);
                    worst = worst.max((lhs - rhs).abs() / scale);
                }
            }
            count += 1;
        }
    }
    check(worst <= 1e-9, format!("max relative error {worst:e}"))?;
    Ok(format!("{count} merges, max relative error {worst:.1e}"))
}

fn spectral_stage() -> Outcome {
    let mut worst_sv = 0.0f64;
    let mut worst_orth = 0.0f64;
    let mut worst_span = 0.0f64;
    for (inst, &(m, d, rank)) in [(16, 8, 8), (40, 64, 32), (128, 64, 32), (300, 96, 32), (512, 64, 32), (512, 256, 32)]
        .iter()
        .enumerate()
    {
        let y = uniform(m, d, -1.0, 1.0, 300 + inst as u64);
        let e = spectral_embed(y.view(), rank).unwrap();
        let (want, left) = jacobi_svd(y.view());
        for i in 0..rank {
            worst_sv = worst_sv.max((e.singular_values[i] - want[i]).abs() / want[i]);
        }
        let gram = e.left.t().dot(&e.left);
        for i in 0..rank {
            for j in 0..rank {
                let target = if i == j { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((gram[[i, j]] - target).abs());
            }
        }
        // Same singular vectors up to sign: |<u_i, u_i'>| = 1.
        for i in 0..rank {
            let dot: f64 = (0..m).map(|r| e.left[[r, i]] * left[[r, i]]).sum();
            worst_span = worst_span.max((dot.abs() - 1.0).abs());
        }
    }
    check(worst_sv <= 1e-8, format!("singular values rel error {worst_sv:e}"))?;
    check(worst_orth <= 1e-8, format!("U^T U - I error {worst_orth:e}"))?;
    check(worst_span <= 1e-6, format!("singular vector mismatch {worst_span:e}"))?;

    let (cloud, part) = cube_scene(2000, 11);
    let m = part.num_superpoints();
    let constant = TokenMatrix::new(Array2::from_elem((m, 16), 0.7), part.centers.clone()).unwrap();
    let cfg = GraphConfig::default();
    let (_, graph) = build_graph(cloud.positions.view(), &part.labels, part.centers.view(), &cfg).unwrap();
    let adj = sfctok::graph::normalized_adjacency(&graph);
    let y = smooth_features(&adj, &constant).unwrap();
    let z = spectral_embed(y.view(), 8).unwrap();
    check(z.embedding.iter().all(|&v| v == 0.0), "constant features give nonzero embedding".into())?;
    Ok(format!(
        "sv rel {worst_sv:.1e}, orthonormality {worst_orth:.1e}, vectors {worst_span:.1e}, constant -> 0"
    ))
}

fn global_filter() -> Outcome {
    let z = uniform(64, 96, -2.0, 2.0, 12);
    for heads in [1, 2, 3, 4, 8] {
        let out = gfm_apply(z.view(), &GfmConfig::identity(96, heads).unwrap()).unwrap();
        check(out == z, format!("all-ones filter with {heads} heads is not the identity"))?;
    }
    let mut r = rng(13);
    let mut worst = 0.0f64;
    for &d in &[7usize, 16, 31, 64, 100] {
        let z = uniform(8, d, -1.0, 1.0, d as u64);
        let gain: Vec<f64> = (0..d / 2 + 1).map(|_| r.random::<f64>() * 3.0 - 1.0).collect();
        let out = gfm_apply(z.view(), &GfmConfig::new(d, 1, vec![gain.clone()]).unwrap()).unwrap();
        for i in 0..8 {
            let row: Vec<f64> = z.row(i).to_vec();
            let mixed = naive_filter(&row, &gain);
            for j in 0..d {
                worst = worst.max((out[[i, j]] - 0.5 * (row[j] + mixed[j])).abs());
            }
        }
    }
    check(worst <= 1e-9, format!("naive DFT disagreement {worst:e}"))?;

    let widths = [256usize, 512, 1024, 2048, 4096, 8192];
    let heads = 4;
    let mut times = Vec::new();
    for &d in &widths {
        let z = uniform(256, d, -1.0, 1.0, 20 + d as u64);
        let bins = (d / heads) / 2 + 1;
        let filters: Vec<Vec<f64>> = (0..heads).map(|h| (0..bins).map(|k| 1.0 / (1.0 + (k + h) as f64)).collect()).collect();
        let cfg = GfmConfig::new(d, heads, filters).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let t0 = Instant::now();
            std::hint::black_box(gfm_apply(z.view(), &cfg).unwrap());
            best = best.min(t0.elapsed().as_secs_f64());
        }
        times.push(best);
    }
    let xs: Vec<f64> = widths.iter().map(|&d| d as f64).collect();
    let slope = fit_slope(&xs, &times);
    check(slope < 1.3, format!("width timing slope {slope:.3}"))?;
    Ok(format!("identity exact, DFT agreement {worst:.1e}, width slope {slope:.3}"))
}

fn end_to_end() -> Outcome {
    let scene = room_scene(60_000, 2024);
    let cfg = PipelineConfig::default();
    let t0 = Instant::now();
    let (a, report) = tokenize(&scene.cloud, Some(&scene.labels), &cfg, None).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let (b, _) = tokenize(&scene.cloud, Some(&scene.labels), &cfg, None).map_err(|e| e.to_string())?;
    let bytes_a = encode_tokens(&a, Precision::F64);
    let bytes_b = encode_tokens(&b, Precision::F64);
    check(a.len() == 256 && a.width() == 256, format!("shape {}x{}", a.len(), a.width()))?;
    check(bytes_a == bytes_b, "two runs differ".into())?;
    check(secs < 30.0, format!("runtime {secs:.2}s"))?;
    Ok(format!(
        "{} -> {} points, M={}, tokens {}x{}, byte-identical, {secs:.2}s",
        report.input_points,
        report.sampled_points,
        report.superpoints,
        a.len(),
        a.width()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 sfc-correctness", sfc_correctness),
        ("2 enhancer-identity", enhancer_identity),
        ("3 graph-oracle-equivalence", graph_oracles),
        ("4 complexity-scaling", complexity_scaling),
        ("5 sinkhorn-correctness", sinkhorn_correctness),
        ("6 mass-conservation", mass_conservation),
        ("7 spectral-stage", spectral_stage),
        ("8 global-filter", global_filter),
        ("9 end-to-end", end_to_end),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
