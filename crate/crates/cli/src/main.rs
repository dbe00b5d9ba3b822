use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use sfctok::bench::{run_bench, BenchConfig};
use sfctok::graph::GraphConfig;
use sfctok::io::tokenfile::{decode_header, decode_tokens};
use sfctok::io::labels::save_labels_text;
use sfctok::io::{load_ply, read_labels, read_weights, save_ply, write_tokens, PlyFormat, Precision};
use sfctok::pipeline::{prepare, scene_graph};
use sfctok::sfc::CurveKind;
use sfctok::synth::room_scene;
use sfctok::{tokenize, Error, ModelWeights, PipelineConfig};

#[derive(Parser)]
#[command(name = "sfctok", version, about = "Encoder-free 3D scene tokenizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize one or more point clouds.
    Tokenize(TokenizeArgs),
    /// Time graph construction against the brute-force oracle.
    Bench(BenchArgs),
    /// Write the voting graph of a cloud as CSV.
    GraphDump(GraphDumpArgs),
    /// Print the header of a token file.
    Inspect {
        path: PathBuf,
    },
    /// Write a seeded synthetic room as PLY with superpoint labels.
    Synth {
        #[arg(long, default_value_t = 50_000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Label file (one integer per line).
        #[arg(long)]
        labels_out: Option<PathBuf>,
        #[arg(long)]
        ascii: bool,
    },
}

/// Per-key config overrides.
#[derive(Args, Default)]
struct Overrides {
    /// Points kept after subsampling
    #[arg(long)]
    sample_n: Option<String>,
    /// Output token count T
    #[arg(long)]
    tokens: Option<String>,
    /// Enhancer window length
    #[arg(long)]
    window: Option<String>,
    /// Enhancer window stride
    #[arg(long)]
    stride: Option<String>,
    /// Low-pass bins kept per window
    #[arg(long)]
    keep_bins: Option<String>,
    /// Grid bits per axis for curve keys
    #[arg(long)]
    bits: Option<String>,
    /// Anchor stride along each curve
    #[arg(long)]
    vote_stride: Option<String>,
    /// Voting window half-width
    #[arg(long)]
    vote_radius: Option<String>,
    /// Neighbors kept per superpoint
    #[arg(long)]
    graph_k: Option<String>,
    /// Sinkhorn temperature
    #[arg(long)]
    tau: Option<String>,
    /// Maximum Sinkhorn iterations
    #[arg(long)]
    sinkhorn_iters: Option<String>,
    /// Sinkhorn marginal tolerance
    #[arg(long)]
    sinkhorn_tol: Option<String>,
    /// Spectral embedding rank
    #[arg(long)]
    svd_rank: Option<String>,
    /// Token width d
    #[arg(long)]
    width: Option<String>,
    /// Master seed
    #[arg(long)]
    seed: Option<String>,
    /// Voxel edge in meters for --voxel-fallback
    #[arg(long)]
    voxel_cell: Option<String>,
    /// Divide merged tokens by their mass (true/false)
    #[arg(long)]
    normalize_pool: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &String)> {
        let all = [
            ("sample_n", &self.sample_n),
            ("tokens", &self.tokens),
            ("window", &self.window),
            ("stride", &self.stride),
            ("keep_bins", &self.keep_bins),
            ("bits", &self.bits),
            ("vote_stride", &self.vote_stride),
            ("vote_radius", &self.vote_radius),
            ("graph_k", &self.graph_k),
            ("tau", &self.tau),
            ("sinkhorn_iters", &self.sinkhorn_iters),
            ("sinkhorn_tol", &self.sinkhorn_tol),
            ("svd_rank", &self.svd_rank),
            ("width", &self.width),
            ("seed", &self.seed),
            ("voxel_cell", &self.voxel_cell),
            ("normalize_pool", &self.normalize_pool),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

#[derive(Args)]
struct SceneArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Superpoint labels, one file per cloud.
    #[arg(long, conflicts_with = "voxel_fallback")]
    labels: Vec<PathBuf>,
    /// Segment into voxels of `voxel_cell` instead of reading labels.
    #[arg(long)]
    voxel_fallback: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct TokenizeArgs {
    /// Input PLY; repeat for several scenes.
    #[arg(long, required = true)]
    cloud: Vec<PathBuf>,
    /// Weights file; seeded weights are used when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Output file, or a directory when several clouds are given.
    #[arg(long)]
    out: PathBuf,
    /// Write 32-bit floats.
    #[arg(long)]
    f32: bool,
    /// Scenes processed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    scene: SceneArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated point counts.
    #[arg(long, value_delimiter = ',', default_values_t = [10_000usize, 20_000, 40_000, 80_000, 160_000])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Skip the brute-force oracle above this many points.
    #[arg(long, default_value_t = 16_000)]
    oracle_cap: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct GraphDumpArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scene: SceneArgs,
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<PipelineConfig, Error> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::from_file(p).map_err(|e| e.in_stage("config"))?,
        None => PipelineConfig::default(),
    };
    for (k, v) in overrides.pairs() {
        cfg.set(k, v).map_err(|e| e.in_stage("config"))?;
    }
    cfg.apply_env().map_err(|e| e.in_stage("config"))?;
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    Ok(cfg)
}

fn load_scene_labels(scene: &SceneArgs, index: usize, clouds: usize) -> Result<Option<Vec<i64>>, Error> {
    if scene.voxel_fallback {
        return Ok(None);
    }
    if scene.labels.len() != clouds {
        return Err(Error::InvalidConfig(format!(
            "{} label files for {clouds} clouds; pass one --labels per --cloud or --voxel-fallback",
            scene.labels.len()
        ))
        .in_stage("labels"));
    }
    read_labels(&scene.labels[index]).map(Some).map_err(|e| e.in_stage("labels"))
}

fn tokenize_one(
    args: &TokenizeArgs,
    cfg: &PipelineConfig,
    weights: Option<&sfctok::io::Tensors>,
    index: usize,
    out: &Path,
) -> Result<String, Error> {
    let path = &args.cloud[index];
    let cloud = load_ply(path).map_err(|e| e.in_stage("load"))?;
    let labels = load_scene_labels(&args.scene, index, args.cloud.len())?;
    let model = match weights {
        Some(t) => Some(ModelWeights::from_tensors(t, cfg, cloud.channels()).map_err(|e| e.in_stage("weights"))?),
        None => None,
    };
    let (tokens, report) = tokenize(&cloud, labels.as_deref(), cfg, model.as_ref())?;
    let precision = if args.f32 { Precision::F32 } else { Precision::F64 };
    write_tokens(out, &tokens, precision).map_err(|e| e.in_stage("write"))?;
    let mut s = format!("scene={}\nout={}\n", path.display(), out.display());
    s.push_str(&report.to_kv());
    Ok(s)
}

fn run_tokenize(args: &TokenizeArgs) -> Result<(), Error> {
    let cfg = load_config(args.scene.config.as_deref(), &args.scene.overrides)?;
    let weights = match &args.weights {
        Some(p) => Some(read_weights(p).map_err(|e| e.in_stage("weights"))?),
        None => None,
    };
    let outs: Vec<PathBuf> = if args.cloud.len() == 1 {
        vec![args.out.clone()]
    } else {
        std::fs::create_dir_all(&args.out).map_err(|e| Error::from(e).in_stage("write"))?;
        args.cloud
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let stem = c.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                args.out.join(format!("{i:04}_{stem}.fas3"))
            })
            .collect()
    };

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<String, Error>>>> = Mutex::new((0..args.cloud.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..args.jobs.clamp(1, args.cloud.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= args.cloud.len() {
                    break;
                }
                let r = tokenize_one(args, &cfg, weights.as_ref(), i, &outs[i]);
                results.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });

    let mut first_err = None;
    for r in results.into_inner().expect("worker panicked").into_iter().flatten() {
        match r {
            Ok(summary) => print!("{summary}"),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(e) => eprintln!("error: {e}"),
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn run_bench_cmd(args: &BenchArgs) -> Result<(), Error> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let bench = BenchConfig {
        sizes: args.sizes.clone(),
        trials: args.trials,
        oracle_cap: args.oracle_cap,
        seed: cfg.seed,
        graph: GraphConfig {
            stride: cfg.vote_stride,
            radius: cfg.vote_radius,
            k: cfg.graph_k,
            bits: cfg.bits,
            curves: CurveKind::ALL.to_vec(),
        },
    };
    let csv = run_bench(&bench).map_err(|e| e.in_stage("bench"))?.to_csv();
    match &args.out {
        Some(p) => std::fs::write(p, csv).map_err(|e| Error::from(e).in_stage("write"))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_graph_dump(args: &GraphDumpArgs) -> Result<(), Error> {
    let cfg = load_config(args.scene.config.as_deref(), &args.scene.overrides)?;
    let cloud = load_ply(&args.cloud).map_err(|e| e.in_stage("load"))?;
    let labels = load_scene_labels(&args.scene, 0, 1)?;
    let scene = prepare(&cloud, labels.as_deref(), &cfg)?;
    let (batch, graph) = scene_graph(&scene, &cfg)?;
    let mut csv = String::from("src,dst,dist2,votes\n");
    for (s, t, d2, v) in graph.edge_list() {
        csv.push_str(&format!("{s},{t},{d2:?},{v}\n"));
    }
    std::fs::write(&args.out, csv).map_err(|e| Error::from(e).in_stage("write"))?;
    println!("M={}", scene.partition.num_superpoints());
    println!("candidates={}", batch.candidates);
    println!("votes={}", batch.total_votes());
    println!("edges={}", graph.num_edges());
    Ok(())
}

fn run_inspect(path: &Path) -> Result<(), Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).in_stage("inspect"))?;
    let h = decode_header(&bytes).map_err(|e| e.in_stage("inspect"))?;
    println!("magic=FAS3");
    println!("version={}", h.precision as u16);
    println!("T={}", h.tokens);
    println!("d={}", h.width);
    println!("checksum={:#010x}", h.checksum);
    println!("checksum_ok={}", decode_tokens(&bytes).is_ok());
    Ok(())
}

fn run_synth(points: usize, seed: u64, out: &Path, labels_out: Option<&Path>, ascii: bool) -> Result<(), Error> {
    let scene = room_scene(points, seed);
    let format = if ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    save_ply(out, &scene.cloud, format).map_err(|e| e.in_stage("write"))?;
    if let Some(p) = labels_out {
        save_labels_text(p, &scene.labels).map_err(|e| e.in_stage("write"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Tokenize(a) => run_tokenize(a),
        Command::Bench(a) => run_bench_cmd(a),
        Command::GraphDump(a) => run_graph_dump(a),
        Command::Inspect { path } => run_inspect(path),
        Command::Synth {
            points,
            seed,
            out,
            labels_out,
            ascii,
        } => run_synth(*points, *seed, out, labels_out.as_deref(), *ascii),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
