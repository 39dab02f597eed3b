mod config;

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use ideq_core::bench::{
    init_thread_pool, label_instances, run_ablation, run_benchmark, BenchInstance, Method,
    VarianceReport,
};
use ideq_core::denoiser::{
    load_checkpoint, save_checkpoint, train, Checkpoint, Denoiser, Redraw, TargetMode,
    TrainingConfig,
};
use ideq_core::diffusion::{ScheduleConfig, ScheduleKind};
use ideq_core::io::{
    bundled_reference, read_tsplib, reference_length, write_report_csv, write_summary_json,
    write_tsplib, BenchRow,
};
use ideq_core::oracle::{brute_force, held_karp, HELD_KARP_LIMIT};
use ideq_core::solver::{solve, ProjectionMode, SolveConfig};
use ideq_core::tsp::{generate_random_instance, Instance};

#[derive(Parser)]
#[command(name = "ideq", version, about = "Diffusion TSP solver with 2-opt projected denoising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate uniform random instances as TSPLIB files.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Solve instances exactly (n <= 18).
    #[command(args_override_self = true)]
    Exact(ExactArgs),
    /// Train a denoiser checkpoint.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Solve instances with a checkpoint.
    #[command(args_override_self = true)]
    Solve(SolveCmd),
    /// Benchmark checkpoints and projection modes against 2-opt from random.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
    /// Checkpoint x inference ablation grid.
    #[command(args_override_self = true)]
    Ablate(AblateArgs),
    /// Gap distribution over repeated seeds.
    #[command(args_override_self = true)]
    Variance(VarianceArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Instance k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExactMethodArg {
    HeldKarp,
    BruteForce,
}

#[derive(Args)]
struct ExactArgs {
    /// A .tsp file or a directory of them.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "held-karp")]
    method: ExactMethodArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dirac,
    Equivalence,
}

#[derive(Clone, Copy, ValueEnum)]
enum RedrawArg {
    PerEpoch,
    PerStep,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Linear,
    Cosine,
}

#[derive(Args)]
struct TrainArgs {
    /// Training instances; otherwise `--count` random ones are generated.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, value_enum, default_value = "dirac")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "per-epoch")]
    redraw: RedrawArg,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 4)]
    time_freqs: usize,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 1e-4)]
    beta_min: f64,
    #[arg(long, default_value_t = 0.02)]
    beta_max: f64,
    #[arg(long, default_value_t = 20)]
    inference_steps: usize,
    #[arg(long, value_enum, default_value = "linear")]
    schedule: ScheduleArg,
    /// 2-opt restarts per label when n is too large for Held-Karp.
    #[arg(long, default_value_t = 50)]
    label_restarts: usize,
    /// Initialize from this checkpoint; its architecture must match.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Ideq,
    DecodeOnly,
    None,
}

impl From<ProjectionArg> for ProjectionMode {
    fn from(p: ProjectionArg) -> Self {
        match p {
            ProjectionArg::Ideq => ProjectionMode::Ideq,
            ProjectionArg::DecodeOnly => ProjectionMode::DecodeOnly,
            ProjectionArg::None => ProjectionMode::None,
        }
    }
}

/// Inference settings shared by the solving subcommands.
#[derive(Args, Clone)]
struct InferenceArgs {
    #[arg(long, default_value_t = 1)]
    samples: usize,
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    #[arg(long, default_value_t = 0.15)]
    alpha: f64,
    /// Override the checkpoint's number of denoising steps.
    #[arg(long)]
    inference_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InferenceArgs {
    fn config(&self, schedule: ScheduleConfig, mode: ProjectionMode, final_two_opt: bool) -> SolveConfig {
        SolveConfig {
            schedule: ScheduleConfig {
                inference_steps: self.inference_steps.unwrap_or(schedule.inference_steps),
                ..schedule
            },
            refinement_rounds: self.rounds,
            renoise_fraction: self.alpha,
            samples: self.samples,
            projection: mode,
            final_two_opt,
            seed: self.seed,
        }
    }
}

/// Where reference lengths come from and how results are written.
#[derive(Args, Clone)]
struct OutputArgs {
    /// CSV of reference lengths: `name,ref_length,...` or a report CSV.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Write the report CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-method JSON summary.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Record wall-clock seconds (makes the CSV non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SolveCmd {
    /// A single TSPLIB file.
    #[arg(long, conflicts_with = "input")]
    tsplib: Option<PathBuf>,
    /// A .tsp file or a directory of them.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "ideq")]
    mode: ProjectionArg,
    #[arg(long)]
    final_two_opt: bool,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// May be repeated; methods are named `<file stem>+<mode>`.
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ideq,decode-only,none")]
    modes: Vec<ProjectionArg>,
    /// Skip the 2-opt-from-random baseline.
    #[arg(long)]
    no_baseline: bool,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    /// Variance report (JSON).
    #[arg(long)]
    variance: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    dirac: PathBuf,
    #[arg(long)]
    equivalence: PathBuf,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long)]
    variance: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VarianceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "ideq")]
    mode: ProjectionArg,
    #[arg(long)]
    final_two_opt: bool,
    /// Use only the first K instances (sorted by file name).
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long, default_value_t = 32)]
    repetitions: usize,
    /// Also run 2-opt from random.
    #[arg(long)]
    baseline: bool,
    /// Variance report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Gap histogram CSV: method,bin_lo_pct,bin_hi_pct,count.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let argv = match config::expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    init_thread_pool();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Exact(a) => exact(a),
        Command::Train(a) => train_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Ablate(a) => ablate_cmd(a),
        Command::Variance(a) => variance_cmd(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for k in 0..a.count as u64 {
        let inst: Instance<f64> = generate_random_instance(a.n, a.seed + k)?;
        let path = a.out.join(format!("{}.tsp", inst.id()));
        write_tsplib(&inst, BufWriter::new(File::create(&path)?))?;
    }
    info!("wrote {} instances to {}", a.count, a.out.display());
    Ok(())
}

/// A single file, or every `.tsp` file of a directory in file-name order.
fn load_instances(path: &Path) -> Result<Vec<Instance<f64>>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tsp"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        bail!("no .tsp files in {}", path.display());
    }
    files
        .iter()
        .map(|f| read_tsplib(f).with_context(|| format!("parsing {}", f.display())))
        .collect()
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn exact(a: ExactArgs) -> Result<()> {
    let instances = load_instances(&a.input)?;
    let mut rows = Vec::new();
    for inst in &instances {
        let r = match a.method {
            ExactMethodArg::HeldKarp => held_karp(inst)?,
            ExactMethodArg::BruteForce => brute_force(inst)?,
        };
        rows.push(BenchRow::new(
            inst.id(),
            inst.n(),
            r.method.name(),
            r.length,
            Some(r.length),
            None,
            0,
        ));
    }
    write_report_csv(&rows, sink(a.out.as_deref())?)?;
    Ok(())
}

/// Reference lengths from a user CSV: either `name,ref_length` columns or a
/// report with `instance,length` columns.
fn read_reference_file(path: &Path) -> Result<HashMap<String, f64>> {
    let mut rd = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (key, val) = match (col("name"), col("ref_length"), col("instance"), col("length")) {
        (Some(k), Some(v), _, _) => (k, v),
        (_, _, Some(k), Some(v)) => (k, v),
        _ => bail!(
            "{}: need columns name,ref_length or instance,length",
            path.display()
        ),
    };
    let mut out = HashMap::new();
    for rec in rd.records() {
        let rec = rec?;
        let name = rec[key].trim_end_matches(".tsp").to_string();
        let len: f64 = rec[val]
            .parse()
            .with_context(|| format!("{}: bad length {:?}", path.display(), &rec[val]))?;
        out.insert(name, len);
    }
    Ok(out)
}

/// Reference length per instance: user file, then the bundled TSPLIB table,
/// then Held-Karp for small instances.
fn references(instances: &[Instance<f64>], file: Option<&Path>) -> Result<Vec<BenchInstance<f64>>> {
    let user = match file {
        Some(p) => read_reference_file(p)?,
        None => HashMap::new(),
    };
    let table = bundled_reference();
    instances
        .iter()
        .map(|inst| {
            let reference = match user.get(inst.id()).copied() {
                Some(r) => Some(r),
                None => match reference_length(&table, inst.id()) {
                    Some(r) => Some(r),
                    None if inst.n() <= HELD_KARP_LIMIT => Some(held_karp(inst)?.length),
                    None => None,
                },
            };
            Ok(BenchInstance {
                instance: inst.clone(),
                reference,
            })
        })
        .collect()
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let instances = match &a.data {
        Some(dir) => load_instances(dir)?,
        None => (0..a.count as u64)
            .map(|k| generate_random_instance(a.n, a.seed + k))
            .collect::<ideq_core::Result<_>>()?,
    };
    let n = instances[0].n();
    if instances.iter().any(|i| i.n() != n) {
        bail!("training instances must all have the same size");
    }
    info!("labelling {} instances of size {n}", instances.len());
    let data = label_instances(instances, a.label_restarts, a.seed)?;
    let config = TrainingConfig {
        target_mode: match a.mode {
            ModeArg::Dirac => TargetMode::Dirac,
            ModeArg::Equivalence => TargetMode::EquivalenceClass,
        },
        redraw: match a.redraw {
            RedrawArg::PerEpoch => Redraw::PerEpoch,
            RedrawArg::PerStep => Redraw::PerStep,
        },
        learning_rate: a.lr,
        momentum: a.momentum,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        n,
        dataset_size: data.len(),
        hidden: a.hidden,
        time_freqs: a.time_freqs,
        schedule: ScheduleConfig {
            horizon: a.horizon,
            beta_min: a.beta_min,
            beta_max: a.beta_max,
            inference_steps: a.inference_steps,
            kind: match a.schedule {
                ScheduleArg::Linear => ScheduleKind::Linear,
                ScheduleArg::Cosine => ScheduleKind::Cosine,
            },
        },
        ..TrainingConfig::default()
    };
    let init = a.init.as_deref().map(load_checkpoint::<f64>).transpose()?;
    let ck = train(&config, &data, init.as_ref())?;
    save_checkpoint(&ck, &a.out)?;
    info!("saved checkpoint to {}", a.out.display());
    Ok(())
}

fn load_ck(path: &Path) -> Result<Arc<Checkpoint<f64>>> {
    Ok(Arc::new(
        load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?,
    ))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".into())
}

fn emit(rows: &[BenchRow], out: &OutputArgs) -> Result<()> {
    let mut w = sink(out.out.as_deref())?;
    write_report_csv(rows, &mut w)?;
    w.flush()?;
    if let Some(p) = &out.summary {
        write_summary_json(rows, BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn solve_cmd(a: SolveCmd) -> Result<()> {
    let path = match (&a.tsplib, &a.input) {
        (Some(p), None) | (None, Some(p)) => p,
        _ => bail!("give exactly one of --tsplib or --in"),
    };
    let instances = load_instances(path)?;
    let ck = load_ck(&a.checkpoint)?;
    let config = a.inference.config(ck.config.schedule, a.mode.into(), a.final_two_opt);
    let benches = references(&instances, a.output.reference.as_deref())?;
    let mode: ProjectionMode = a.mode.into();
    let mut rows = Vec::new();
    for b in &benches {
        let res = solve(&b.instance, ck.as_ref() as &dyn Denoiser<f64>, &config)?;
        info!("{}: length {:.6}", b.instance.id(), res.length);
        rows.push(BenchRow::new(
            b.instance.id(),
            b.instance.n(),
            mode.name(),
            res.length,
            b.reference,
            a.output.timings.then_some(res.seconds),
            config.seed,
        ));
    }
    emit(&rows, &a.output)
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let instances = load_instances(&a.input)?;
    let benches = references(&instances, a.output.reference.as_deref())?;
    let mut methods = Vec::new();
    if !a.no_baseline {
        methods.push(Method::two_opt_from_random());
    }
    for path in &a.checkpoint {
        let ck = load_ck(path)?;
        for &m in &a.modes {
            let mode: ProjectionMode = m.into();
            let cfg = a.inference.config(ck.config.schedule, mode, false);
            methods.push(Method::solver(
                format!("{}+{}", stem(path), mode.name()),
                ck.clone(),
                cfg,
            ));
        }
    }
    let (rows, variance) =
        run_benchmark(&benches, &methods, a.repetitions, a.inference.seed, a.output.timings)?;
    if let Some(p) = &a.variance {
        write_json(&variance, p)?;
    }
    emit(&rows, &a.output)
}

fn ablate_cmd(a: AblateArgs) -> Result<()> {
    let instances = load_instances(&a.input)?;
    let benches = references(&instances, a.output.reference.as_deref())?;
    let dirac = load_ck(&a.dirac)?;
    let equiv = load_ck(&a.equivalence)?;
    if dirac.config.schedule != equiv.config.schedule {
        bail!("the two checkpoints were trained with different schedules");
    }
    let base = a.inference.config(dirac.config.schedule, ProjectionMode::Ideq, false);
    let (rows, variance) = run_ablation(
        &benches,
        Some(dirac),
        Some(equiv),
        &base,
        a.repetitions,
        a.inference.seed,
        a.output.timings,
    )?;
    if let Some(p) = &a.variance {
        write_json(&variance, p)?;
    }
    emit(&rows, &a.output)
}

fn variance_cmd(a: VarianceArgs) -> Result<()> {
    let mut instances = load_instances(&a.input)?;
    if let Some(k) = a.instances {
        instances.truncate(k);
    }
    let benches = references(&instances, a.output.reference.as_deref())?;
    let ck = load_ck(&a.checkpoint)?;
    let mode: ProjectionMode = a.mode.into();
    let cfg = a.inference.config(ck.config.schedule, mode, a.final_two_opt);
    let mut methods = vec![Method::solver(
        format!("{}+{}", stem(&a.checkpoint), mode.name()),
        ck,
        cfg,
    )];
    if a.baseline {
        methods.push(Method::two_opt_from_random());
    }
    let (rows, variance) =
        run_benchmark(&benches, &methods, a.repetitions, a.inference.seed, a.output.timings)?;
    for (m, s) in &variance.pooled_std_gap_pct {
        info!("{m}: pooled std of gap {s:.4}%");
    }
    if let Some(p) = &a.report {
        write_json(&variance, p)?;
    }
    if let Some(p) = &a.histogram {
        write_histogram(&rows, a.bins, p)?;
    }
    emit(&rows, &a.output)
}

/// Equal-width bins over the observed gap range, shared by all methods.
fn write_histogram(rows: &[BenchRow], bins: usize, path: &Path) -> Result<()> {
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap_pct()).collect();
    if gaps.is_empty() || bins == 0 {
        bail!("no gaps to histogram");
    }
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let report = VarianceReport::from_rows(rows);
    let mut methods: Vec<&str> = report.pooled_std_gap_pct.keys().map(String::as_str).collect();
    methods.dedup();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,bin_lo_pct,bin_hi_pct,count")?;
    for m in methods {
        let mut counts = vec![0usize; bins];
        for g in rows.iter().filter(|r| r.method == m).filter_map(|r| r.gap_pct()) {
            let k = (((g - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            let a = lo + width * k as f64;
            writeln!(w, "{m},{a},{},{c}", a + width)?;
        }
    }
    Ok(())
}
