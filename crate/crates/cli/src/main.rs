//! `qsr`: dictionary training, super-resolution, PSNR benchmarking and the
//! synthetic sparse-recovery sweeps from one binary.
//!
//! Exit status is 0 on success, 2 on a usage error and 1 when a run fails.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use qsr_core::dictionary::{load_dictionary, sample_training_patches, save_dictionary, train_dictionary_pair, DictionaryPair};
use qsr_core::imagecore::{downscale, load_image, modcrop, psnr_y, save_image, upscale, Image};
use qsr_core::solvers::{AnnealConfig, BetaRange, SamplerHandle};
use qsr_core::sr::{save_entropy_csv, save_entropy_png, super_resolve, Method, SrConfig, Timings};
use qsr_core::synthbench::{linspace, logspace, run_sweep, sweep_csv, sweep_svg, SynthSolver};

use config::FileConfig;
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "qsr", version, about = "Super-resolution by patch-wise binary sparse coding")]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores). Results do not depend on it.
    #[arg(long, global = true, env = "QSR_THREADS")]
    threads: Option<usize>,
    /// TOML file with `[train]`, `[sr]` and `[synth]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a coupled dictionary pair from a directory of images.
    TrainDict(TrainArgs),
    /// Super-resolve one low-resolution image.
    Sr(SrArgs),
    /// Downscale every image in a directory, reconstruct it and report Y-PSNR.
    Bench(BenchArgs),
    /// Sparsity sweeps on synthetic planted-code datasets.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    atoms: Option<usize>,
    #[arg(long)]
    patches: Option<usize>,
    /// Passes over the sampled patches.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Lasso,
    Anneal,
    Ensemble,
}

impl MethodArg {
    fn method(self) -> Method {
        match self {
            MethodArg::Lasso => Method::Lasso,
            MethodArg::Anneal => Method::ClassicalAnneal,
            MethodArg::Ensemble => Method::EnsembleAnneal,
        }
    }

    fn name(self) -> &'static str {
        match self {
            MethodArg::Lasso => "lasso",
            MethodArg::Anneal => "anneal",
            MethodArg::Ensemble => "ensemble",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    /// Simulated annealing.
    Sa,
    Tabu,
    /// Exhaustive enumeration; only for tiny problems.
    Brute,
}

/// Knobs shared by `sr` and `bench`.
#[derive(Debug, Args)]
struct SrKnobs {
    #[arg(long)]
    dict: PathBuf,
    /// Sparsity weight for the selected method(s).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    backproject_iters: Option<usize>,
    #[arg(long)]
    scale: Option<usize>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    /// Answer sampler calls from a file written with `--record`.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Append every sampler call and its result to this file.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SrArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "lasso")]
    method: MethodArg,
    /// Per-pixel patch entropy as PNG (ensemble only).
    #[arg(long)]
    entropy_map: Option<PathBuf>,
    /// Per-patch entropy as CSV (ensemble only).
    #[arg(long)]
    entropy_csv: Option<PathBuf>,
    #[command(flatten)]
    knobs: SrKnobs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Directory of high-resolution ground-truth images.
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lasso,anneal,ensemble")]
    methods: Vec<MethodArg>,
    /// Also write every reconstruction here.
    #[arg(long)]
    save_dir: Option<PathBuf>,
    #[command(flatten)]
    knobs: SrKnobs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Lasso,
    #[value(alias = "anneal")]
    ClassicalAnneal,
    #[value(alias = "ensemble")]
    EnsembleAnneal,
}

impl SolverArg {
    fn solver(self) -> SynthSolver {
        match self {
            SolverArg::Lasso => SynthSolver::Lasso,
            SolverArg::ClassicalAnneal => SynthSolver::ClassicalAnneal,
            SolverArg::EnsembleAnneal => SynthSolver::EnsembleAnneal,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lasso,classical-anneal,ensemble-anneal")]
    solvers: Vec<SolverArg>,
    /// `v1,v2,...`, `lin:lo:hi:n` or `log:lo:hi:n` (base-10 exponents);
    /// default is a per-solver grid.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    datasets: Option<usize>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct Ctx {
    cfg: FileConfig,
    seed: u64,
    threads: usize,
    manifest: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) if !p.is_file() => return usage(format!("config file {} not found", p.display())),
        Some(p) => FileConfig::load(p).map_err(|e| CliError::Usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    cfg.apply_seed(cli.seed);
    let threads = match cli.threads.or(cfg.threads) {
        Some(0) => return usage("--threads must be at least 1"),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot start worker threads")?;
    let seed = cfg.seed.unwrap_or(0);
    let ctx = Ctx { cfg, seed, threads, manifest: cli.manifest };
    match cli.command {
        Command::TrainDict(a) => cmd_train_dict(ctx, a),
        Command::Sr(a) => cmd_sr(ctx, a),
        Command::Bench(a) => cmd_bench(ctx, a),
        Command::Synth(a) => cmd_synth(ctx, a),
    }
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "pgm" | "ppm" | "pnm")
    )
}

/// Image files directly inside `dir`, sorted by name.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return usage(format!("{} is not a directory", dir.display()));
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    out.sort();
    Ok(out)
}

fn require_file(p: &Path, what: &str) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        usage(format!("{what} {} not found", p.display()))
    }
}

fn finish_manifest(ctx: &Ctx, m: &RunManifest, primary: &Path) -> Result<(), CliError> {
    let path = ctx.manifest.clone().unwrap_or_else(|| manifest::default_path(primary));
    m.write(&path)?;
    Ok(())
}

fn cmd_train_dict(ctx: Ctx, a: TrainArgs) -> Result<(), CliError> {
    let paths = list_images(&a.corpus)?;
    let mut tc = ctx.cfg.train.clone();
    if let Some(n) = a.atoms {
        tc.n_atoms = n;
    }
    if let Some(n) = a.patches {
        tc.n_patches = n;
    }
    if let Some(n) = a.epochs {
        tc.iterations = n;
    }
    tc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut m = RunManifest::new("train-dict", ctx.seed, ctx.threads, &tc)?;

    let t = Instant::now();
    let mut corpus = Vec::with_capacity(paths.len());
    for p in &paths {
        corpus.push(load_image::<f64>(p).with_context(|| format!("loading {}", p.display()))?);
        m.input(p)?;
    }
    let (xl, xh) = sample_training_patches(&corpus, &tc).context("sampling training patches")?;
    let sampling = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let dict = train_dictionary_pair(&xl, &xh, &tc).context("training dictionary")?;
    let training = t.elapsed().as_secs_f64();
    save_dictionary(&dict, &a.out).context("writing dictionary")?;
    m.output(&a.out);
    m.timings = serde_json::json!({ "sampling": sampling, "training": training });
    finish_manifest(&ctx, &m, &a.out)?;
    eprintln!("wrote {} ({} atoms, {} patches)", a.out.display(), dict.n_atoms, xl.cols());
    Ok(())
}

/// Merges the `sr`/`bench` flags into the file config for the given methods.
fn sr_config(base: &SrConfig, k: &SrKnobs, methods: &[MethodArg]) -> Result<SrConfig, CliError> {
    let mut c = base.clone();
    if let Some(l) = k.lambda {
        for m in methods {
            match m {
                MethodArg::Lasso => c.lambda_lasso = l,
                _ => c.lambda_anneal = l,
            }
        }
    }
    if let Some(v) = k.mu {
        c.mu = v;
    }
    if let Some(v) = k.reads {
        c.n_reads = v;
    }
    if let Some(v) = k.stride {
        c.stride = v;
    }
    if let Some(v) = k.backproject_iters {
        c.backproject_iters = v;
    }
    if let Some(v) = k.scale {
        c.scale = v;
    }
    match k.sampler {
        Some(SamplerArg::Sa) => {
            c.sampler = SamplerHandle::SimulatedAnneal(AnnealConfig { beta_range: BetaRange::Auto, ..AnnealConfig::default() })
        }
        Some(SamplerArg::Tabu) => c.sampler = SamplerHandle::Tabu(c.tabu),
        Some(SamplerArg::Brute) => c.sampler = SamplerHandle::BruteForce,
        None => {}
    }
    if let Some(p) = &k.replay {
        require_file(p, "replay file")?;
        c.sampler = SamplerHandle::Replay { path: p.clone() };
    }
    if let Some(p) = &k.record {
        c.sampler = SamplerHandle::Record { inner: Box::new(c.sampler.clone()), path: p.clone() };
    }
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn load_dict(m: &mut RunManifest, p: &Path) -> Result<DictionaryPair<f64>, CliError> {
    require_file(p, "dictionary")?;
    m.input(p)?;
    Ok(load_dictionary(p).with_context(|| format!("loading dictionary {}", p.display()))?)
}

fn timings_json(t: &Timings) -> serde_json::Value {
    let mut v = serde_json::to_value(t).unwrap_or_default();
    if let Some(o) = v.as_object_mut() {
        o.insert("total".into(), t.total().into());
    }
    v
}

fn cmd_sr(ctx: Ctx, a: SrArgs) -> Result<(), CliError> {
    require_file(&a.input, "input image")?;
    if (a.entropy_map.is_some() || a.entropy_csv.is_some()) && a.method != MethodArg::Ensemble {
        return usage("entropy outputs need --method ensemble");
    }
    let cfg = sr_config(&ctx.cfg.sr, &a.knobs, &[a.method])?;
    let mut m = RunManifest::new("sr", ctx.seed, ctx.threads, &serde_json::json!({ "method": a.method.name(), "sr": cfg }))?;
    let dict = load_dict(&mut m, &a.knobs.dict)?;
    m.input(&a.input)?;
    let lr = load_image::<f64>(&a.input).with_context(|| format!("loading {}", a.input.display()))?;

    let out = super_resolve(&lr, &dict, &cfg, a.method.method()).context("super-resolution failed")?;
    save_image(&out.image, &a.out).context("writing output image")?;
    m.output(&a.out);
    if let Some(p) = &a.entropy_map {
        let map = out.entropy_map.as_ref().context("pipeline produced no entropy map")?;
        save_entropy_png(map, p).context("writing entropy map")?;
        m.output(p);
    }
    if let Some(p) = &a.entropy_csv {
        let e = out.patch_entropy.as_ref().context("pipeline produced no patch entropies")?;
        save_entropy_csv(e, p).context("writing entropy csv")?;
        m.output(p);
    }
    if let Some(p) = &a.knobs.record {
        m.output(p);
    }
    m.timings = timings_json(&out.timings);
    finish_manifest(&ctx, &m, &a.out)?;
    Ok(())
}

/// Ground truth luma cropped to a multiple of `scale`, and its reduction.
fn bench_pair(hr: &Image<f64>, scale: usize) -> anyhow::Result<(Image<f64>, Image<f64>)> {
    let y = modcrop(&hr.luma()?, scale)?;
    let lr = downscale(&y, scale)?;
    Ok((y, lr))
}

fn cmd_bench(ctx: Ctx, a: BenchArgs) -> Result<(), CliError> {
    let paths = list_images(&a.images)?;
    if paths.is_empty() {
        return Err(CliError::Run(anyhow::anyhow!("no images in {}", a.images.display())));
    }
    let mut methods = a.methods.clone();
    methods.dedup();
    let cfg = sr_config(&ctx.cfg.sr, &a.knobs, &methods)?;
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    let mut m = RunManifest::new("bench", ctx.seed, ctx.threads, &serde_json::json!({ "methods": names, "sr": cfg }))?;
    let dict = load_dict(&mut m, &a.knobs.dict)?;
    if let Some(d) = &a.save_dir {
        std::fs::create_dir_all(d).with_context(|| format!("cannot create {}", d.display()))?;
    }

    let mut csv = String::from("image,bicubic");
    for n in &names {
        csv.push(',');
        csv.push_str(n);
    }
    csv.push('\n');
    let mut sums = vec![0.0; methods.len() + 1];
    let mut timings: BTreeMap<&str, Timings> = BTreeMap::new();
    for p in &paths {
        m.input(p)?;
        let hr = load_image::<f64>(p).with_context(|| format!("loading {}", p.display()))?;
        let (gt, lr) = bench_pair(&hr, cfg.scale)?;
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
        let bicubic = upscale(&lr, cfg.scale).context("bicubic upscale")?;
        let mut row = vec![psnr_y(&bicubic, &gt).context("bicubic psnr")?];
        for &method in &methods {
            let out = super_resolve(&lr, &dict, &cfg, method.method())
                .with_context(|| format!("{} on {}", method.name(), p.display()))?;
            row.push(psnr_y(&out.image, &gt).context("psnr")?);
            timings.entry(method.name()).or_default().add(&out.timings);
            if let Some(d) = &a.save_dir {
                let op = d.join(format!("{stem}_{}.png", method.name()));
                save_image(&out.image, &op).with_context(|| format!("cannot write {}", op.display()))?;
                m.output(&op);
            }
        }
        let _ = write!(csv, "{stem}");
        for (s, v) in sums.iter_mut().zip(&row) {
            *s += v;
            let _ = write!(csv, ",{v:.4}");
        }
        csv.push('\n');
        eprintln!("{stem}: {}", row.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" "));
    }
    csv.push_str("mean");
    for s in &sums {
        let _ = write!(csv, ",{:.4}", s / paths.len() as f64);
    }
    csv.push('\n');
    std::fs::write(&a.out, &csv).with_context(|| format!("cannot write {}", a.out.display()))?;
    m.output(&a.out);
    m.timings = serde_json::to_value(timings.iter().map(|(k, t)| (*k, timings_json(t))).collect::<BTreeMap<_, _>>())
        .map_err(anyhow::Error::from)?;
    finish_manifest(&ctx, &m, &a.out)?;
    Ok(())
}

/// Parses a grid spec; see [`SynthArgs::grid`].
fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number {s:?} in grid"));
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [kind @ ("lin" | "log"), lo, hi, n] => {
            let n: usize = n.trim().parse().map_err(|_| format!("bad point count {n:?} in grid"))?;
            if n == 0 {
                return Err("grid needs at least one point".into());
            }
            let (lo, hi) = (num(lo)?, num(hi)?);
            if *kind == "lin" {
                linspace(lo, hi, n)
            } else {
                logspace(lo, hi, n)
            }
        }
        [list] => list.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(format!("unrecognised grid {spec:?}")),
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err("grid values must be finite".into());
    }
    Ok(grid)
}

fn cmd_synth(ctx: Ctx, a: SynthArgs) -> Result<(), CliError> {
    let grid = match &a.grid {
        Some(s) => Some(parse_grid(s).map_err(CliError::Usage)?),
        None => None,
    };
    let mut cfg = ctx.cfg.synth.clone();
    if let Some(n) = a.datasets {
        cfg.n_datasets = n;
    }
    if let Some(n) = a.reads {
        cfg.n_reads = n;
    }
    if let Some(v) = a.mu {
        cfg.mu = v;
    }
    if cfg.n_datasets == 0 || cfg.n_reads == 0 {
        return usage("datasets and reads must be at least 1");
    }
    let mut solvers = a.solvers.clone();
    solvers.dedup();
    let mut m = RunManifest::new("synth", ctx.seed, ctx.threads, &serde_json::json!({ "grid": grid, "synth": cfg }))?;
    let mut results = Vec::new();
    let mut timings = BTreeMap::new();
    for s in solvers.iter().map(|s| s.solver()) {
        let g = grid.clone().unwrap_or_else(|| s.default_grid());
        let t = Instant::now();
        let r = run_sweep(s, &g, &cfg).map_err(|e| match e {
            qsr_core::synthbench::SynthError::Grid(m) => CliError::Usage(m),
            e => CliError::Run(e.into()),
        })?;
        timings.insert(s.name(), t.elapsed().as_secs_f64());
        if let Some(v) = r.val_err_at_sparsity(10.0) {
            eprintln!("{}: validation error at sparsity 10 = {:.3} ± {:.3}", s.name(), v.mean, v.std);
        }
        results.push(r);
    }
    std::fs::write(&a.out, sweep_csv(&results)).with_context(|| format!("cannot write {}", a.out.display()))?;
    m.output(&a.out);
    if let Some(p) = &a.svg {
        std::fs::write(p, sweep_svg(&results)).with_context(|| format!("cannot write {}", p.display()))?;
        m.output(p);
    }
    m.timings = serde_json::to_value(timings).map_err(anyhow::Error::from)?;
    finish_manifest(&ctx, &m, &a.out)?;
    Ok(())
}
