use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use locnet_core::config::{RunConfig, CONFIG_ENV};
use locnet_core::dataset::{self, build_dataset, split, Dataset, Encoding};
use locnet_core::eval::{compare_runs, evaluate};
use locnet_core::experiment::{self, ExperimentSetup, RunOutcome};
use locnet_core::fsutil::write_bytes_atomic;
use locnet_core::locnet::{
    format_table, gradient_suite, load_checkpoint, param_count, save_checkpoint, train_with_progress, write_history_csv,
    Ablation, EpochRecord, LocNet,
};
use locnet_core::manifest::ManifestBuilder;
use locnet_core::nn::gradcheck::GradCheckConfig;
use locnet_core::scenario::{build_trp_grid, classify_links, drop_ues, ScenarioConfig};
use locnet_core::{rng, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "locnet", version, about = "Indoor-factory positioning: channel simulation, datasets, LocNet training and evaluation")]
struct Cli {
    /// TOML config layered over the built-in defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Start from the full-size defaults (18 TRPs, 256 taps, 80000 samples, 2.9 M-parameter model).
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Worker threads for data generation, training and evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the TRP grid, optional UE drops and the resolved scenario.
    GenScenario(GenScenarioArgs),
    /// Simulate channels and write an encoded dataset.
    GenDataset(GenDatasetArgs),
    /// Train LocNet and write the best-validation checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Finite-difference check of every layer and the composed network.
    Gradcheck(GradcheckArgs),
    /// Train one model per encoding with every TRP present and compare them.
    ExperimentInputRichness(InputRichnessArgs),
    /// Train on a mixed-availability plan and score every N′ on paired test sets.
    ExperimentVariableTrp(VariableTrpArgs),
    /// Train on clean and on noisy labels and score both against clean labels.
    ExperimentLabelNoise(LabelNoiseArgs),
}

#[derive(Debug, Args)]
struct GenScenarioArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also drop this many UEs and record their LoS flags.
    #[arg(long, default_value_t = 0)]
    ues: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GenDatasetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    encoding: Option<Encoding>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `full`, `default` (mixed) or `n:count,...`.
    #[arg(long)]
    variable_trp_plan: Option<String>,
    /// `none`, `paper` (mixed) or `sigma:count,...`.
    #[arg(long)]
    label_noise_plan: Option<String>,
    /// Also write `<out>.train.lnet`, `<out>.val.lnet` and `<out>.test.lnet`.
    #[arg(long)]
    split: bool,
}

#[derive(Debug, Args)]
struct TrainSettings {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Early-stopping patience in epochs; 0 disables it.
    #[arg(long)]
    patience: Option<usize>,
    /// Train-time seed (initialization, dropout, batching).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Full dataset; split with its own seed into train/val/test.
    #[arg(long, required_unless_present = "train")]
    dataset: Option<PathBuf>,
    #[arg(long, requires = "val", conflicts_with = "dataset")]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    val: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ablate: Option<Ablation>,
    #[command(flatten)]
    settings: TrainSettings,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Score only the test part of a full dataset.
    #[arg(long)]
    test_split: bool,
    #[arg(long)]
    per_trp: bool,
    /// Compare predictions with the noise-free labels.
    #[arg(long)]
    clean_labels: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Test hook: corrupt this layer's analytic gradient by 1%.
    #[arg(long)]
    inject_broken: Option<String>,
}

#[derive(Debug, Args)]
struct ExperimentCommon {
    #[arg(long)]
    out: PathBuf,
    /// One run per seed; each seed drives channels, split and training.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Use the full 18-TRP grid while keeping the configured CIR length.
    #[arg(long)]
    full_grid: bool,
    #[command(flatten)]
    settings: TrainSettings,
}

#[derive(Debug, Args)]
struct InputRichnessArgs {
    #[command(flatten)]
    common: ExperimentCommon,
    #[arg(long, value_delimiter = ',', default_value = "cir,cir-rsrp")]
    encodings: Vec<Encoding>,
}

#[derive(Debug, Args)]
struct VariableTrpArgs {
    #[command(flatten)]
    common: ExperimentCommon,
    #[arg(long, value_delimiter = ',', default_value = "cir,cir-rsrp,cir-rsrp-ratio")]
    encodings: Vec<Encoding>,
    /// Smallest N′ in the plan and in the paired test sets.
    #[arg(long, default_value_t = 4)]
    min_available: usize,
}

#[derive(Debug, Args)]
struct LabelNoiseArgs {
    #[command(flatten)]
    common: ExperimentCommon,
    #[arg(long, default_value = "cir-rsrp")]
    encoding: Encoding,
}

struct Context {
    config: RunConfig,
    manifest: ManifestBuilder,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(Error::InvalidArgument("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    let config = RunConfig::resolve(cli.paper_scale, cli.config.as_deref())?;
    let mut ctx = Context {
        config,
        manifest: ManifestBuilder::new(std::env::args().collect(), threads),
    };
    if let Some(path) = &cli.config {
        ctx.manifest.input(path);
    }
    match cli.command {
        Command::GenScenario(a) => gen_scenario(ctx, a),
        Command::GenDataset(a) => gen_dataset(ctx, a),
        Command::Train(a) => train(ctx, a),
        Command::Eval(a) => eval(ctx, a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::ExperimentInputRichness(a) => input_richness(ctx, a),
        Command::ExperimentVariableTrp(a) => variable_trp(ctx, a),
        Command::ExperimentLabelNoise(a) => label_noise(ctx, a),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_output(ctx: &mut Context, path: &Path, bytes: &[u8]) -> Result<()> {
    write_bytes_atomic(path, bytes)?;
    ctx.manifest.output(path);
    Ok(())
}

fn finish(ctx: Context, path: &Path) -> Result<()> {
    ctx.manifest.finish(&ctx.config, path)?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn gen_scenario(mut ctx: Context, a: GenScenarioArgs) -> Result<()> {
    if let Some(seed) = a.seed {
        ctx.config.scenario.rng_seed = seed;
    }
    let scenario = ctx.config.scenario.clone();
    scenario.validate()?;
    ensure_dir(&a.out)?;
    let trps = build_trp_grid(&scenario)?;
    let mut csv = String::from("trp,x_m,y_m,z_m\n");
    for (i, t) in trps.iter().enumerate() {
        let _ = writeln!(csv, "{i},{:.3},{:.3},{:.3}", t.x_m, t.y_m, t.z_m);
    }
    write_output(&mut ctx, &a.out.join("trps.csv"), csv.as_bytes())?;
    if a.ues > 0 {
        let seed = scenario.rng_seed;
        ctx.manifest.seed(seed);
        let ues = drop_ues(&scenario, a.ues, &mut rng::stream(seed, rng::label::SCENARIO, 0))?;
        let los = classify_links(&ues, &trps, &scenario, &mut rng::stream(seed, rng::label::LOS, 0))?;
        let mut csv = String::from("ue,x_m,y_m,z_m,los_trps\n");
        for (i, (u, flags)) in ues.iter().zip(&los).enumerate() {
            let visible: Vec<String> = flags.iter().enumerate().filter(|(_, l)| **l).map(|(t, _)| t.to_string()).collect();
            let _ = writeln!(csv, "{i},{:.3},{:.3},{:.3},{}", u.x_m, u.y_m, u.z_m, visible.join(" "));
        }
        write_output(&mut ctx, &a.out.join("ues.csv"), csv.as_bytes())?;
    }
    let text = toml::to_string(&scenario).map_err(|e| Error::Format(e.to_string()))?;
    write_output(&mut ctx, &a.out.join("scenario.toml"), text.as_bytes())?;
    println!("{} TRPs written to {}", trps.len(), a.out.display());
    finish(ctx, &a.out.join("manifest.toml"))
}

fn gen_dataset(mut ctx: Context, a: GenDatasetArgs) -> Result<()> {
    let d = &mut ctx.config.dataset;
    if let Some(e) = a.encoding {
        d.encoding = e;
    }
    if let Some(n) = a.samples {
        d.samples = n;
    }
    if let Some(s) = a.seed {
        d.seed = s;
    }
    if let Some(p) = a.variable_trp_plan {
        d.trp_plan = p;
    }
    if let Some(p) = a.label_noise_plan {
        d.noise_plan = p;
    }
    let spec = ctx.config.dataset.spec(ctx.config.scenario.n_trp)?;
    ctx.manifest.seed(spec.rng_seed);
    let started = Instant::now();
    let ds = build_dataset(&spec, &ctx.config.scenario)?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_output(&mut ctx, &a.out, &dataset::serialize(&ds)?)?;
    println!(
        "{} samples, encoding {}, dims {:?}, {:.1}s -> {}",
        ds.len(),
        ds.encoding,
        ds.dims,
        started.elapsed().as_secs_f64(),
        a.out.display()
    );
    if a.split {
        let (tr, va, te) = split(&ds, spec.split, spec.rng_seed)?;
        for (part, name) in [(&tr, "train.lnet"), (&va, "val.lnet"), (&te, "test.lnet")] {
            let path = sibling(&a.out, name);
            write_output(&mut ctx, &path, &dataset::serialize(part)?)?;
            println!("  {} samples -> {}", part.len(), path.display());
        }
    }
    finish(ctx, &sibling(&a.out, "manifest.toml"))
}

fn apply_train_settings(config: &mut RunConfig, s: &TrainSettings) {
    let t = &mut config.train;
    if let Some(v) = s.epochs {
        t.epochs = v;
    }
    if let Some(v) = s.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = s.lr {
        t.adam.lr = v;
    }
    if let Some(v) = s.patience {
        t.patience = (v > 0).then_some(v);
    }
    if let Some(v) = s.seed {
        t.seed = v;
    }
}

fn load_dataset(ctx: &mut Context, path: &Path) -> Result<Dataset> {
    let ds = dataset::load(path)?;
    ctx.manifest.input(path);
    Ok(ds)
}

fn progress_line(label: &str, r: &EpochRecord, epochs: usize, started: Instant) {
    println!(
        "{label}epoch {}/{} train_loss {:.4} val_loss {:.4} elapsed {:.1}s",
        r.epoch,
        epochs,
        r.train_loss,
        r.val_loss,
        started.elapsed().as_secs_f64()
    );
}

fn train(mut ctx: Context, a: TrainArgs) -> Result<()> {
    apply_train_settings(&mut ctx.config, &a.settings);
    let (train_set, val_set) = match (&a.dataset, &a.train, &a.val) {
        (Some(path), _, _) => {
            let full = load_dataset(&mut ctx, path)?;
            let (tr, va, _) = split(&full, ctx.config.dataset.split, full.seed)?;
            ctx.manifest.seed(full.seed);
            (tr, va)
        }
        (None, Some(t), Some(v)) => (load_dataset(&mut ctx, t)?, load_dataset(&mut ctx, v)?),
        _ => return Err(Error::InvalidArgument("give --dataset or both --train and --val".into())),
    };
    if train_set.encoding != val_set.encoding {
        return Err(Error::InvalidArgument(format!(
            "training data is encoded as {} but validation data as {}",
            train_set.encoding, val_set.encoding
        )));
    }
    let mut model_cfg = ctx.config.locnet.clone();
    model_cfg.input_shape = train_set.dims;
    if let Some(ab) = a.ablate {
        model_cfg = model_cfg.ablated(ab);
    }
    ctx.config.locnet = model_cfg.clone();
    let seed = ctx.config.train.seed;
    ctx.manifest.seed(seed);
    let mut model = LocNet::<f32>::new(model_cfg, seed)?;
    model.set_output_bias(train_set.label_mean());
    println!(
        "LocNet: {} parameters, input {:?}, {} train / {} val samples",
        param_count(&model),
        train_set.dims,
        train_set.len(),
        val_set.len()
    );
    ensure_dir(&a.out)?;
    let started = Instant::now();
    let epochs = ctx.config.train.epochs;
    let report = train_with_progress(&mut model, &train_set, &val_set, &ctx.config.train, |r| {
        progress_line("", r, epochs, started)
    })?;
    println!(
        "best epoch {} val_loss {:.4}{}",
        report.best_epoch,
        report.best_val_loss,
        if report.stopped_early { " (stopped early)" } else { "" }
    );
    let ckpt = a.out.join("model.lnwt");
    save_checkpoint(&ckpt, &model, train_set.encoding)?;
    ctx.manifest.output(&ckpt);
    let history = a.out.join("history.csv");
    write_history_csv(&history, &report.history)?;
    ctx.manifest.output(&history);
    finish(ctx, &a.out.join("manifest.toml"))
}

fn eval(mut ctx: Context, a: EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    ctx.manifest.input(&a.checkpoint);
    let mut ds = load_dataset(&mut ctx, &a.dataset)?;
    if ckpt.encoding != ds.encoding {
        return Err(Error::InvalidArgument(format!(
            "checkpoint was trained on {} inputs but the dataset is encoded as {}",
            ckpt.encoding, ds.encoding
        )));
    }
    if ckpt.model.config().input_shape != ds.dims {
        return Err(Error::Shape(format!(
            "checkpoint expects inputs of {:?}, dataset holds {:?}",
            ckpt.model.config().input_shape,
            ds.dims
        )));
    }
    if a.test_split {
        ds = split(&ds, ctx.config.dataset.split, ds.seed)?.2;
    }
    ctx.manifest.seed(ds.seed);
    ctx.config.locnet = ckpt.model.config().clone();
    let mut model = ckpt.model;
    let report = evaluate(&mut model, &ds, a.clean_labels)?;
    report.write_csvs(&a.out, a.per_trp)?;
    let mut names = vec!["cdf.csv", "summary.csv"];
    if a.per_trp {
        names.push("per_trp.csv");
    }
    for n in names {
        ctx.manifest.output(&a.out.join(n));
    }
    println!(
        "{} samples: p90 {:.3} m, median {:.3} m, mean {:.3} m ({} labels)",
        report.n_samples,
        report.p90_m,
        report.median_m,
        report.mean_m,
        if a.clean_labels { "clean" } else { "stored" }
    );
    if a.per_trp {
        for b in &report.per_trp {
            println!("  N'={:>2}: p90 {:.3} m over {} samples", b.n_trp_available, b.p90_m, b.count);
        }
    }
    finish(ctx, &a.out.join("manifest.toml"))
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let cfg = GradCheckConfig::default();
    println!(
        "precision f64, step {:e}, tolerance {:e}, denominator floor {:e}",
        cfg.step, cfg.tolerance, cfg.denom_floor
    );
    let mut failed = Vec::new();
    for seed in 0..a.seeds {
        println!("seed {seed}");
        let reports = gradient_suite(seed, &cfg, a.inject_broken.as_deref())?;
        print!("{}", format_table(&reports));
        for r in reports.iter().filter(|r| !r.passed()) {
            if !failed.contains(&r.name) {
                failed.push(r.name.clone());
            }
        }
    }
    if failed.is_empty() {
        println!("all layers passed");
        Ok(())
    } else {
        Err(Error::Numeric(format!("gradient check failed for: {}", failed.join(", "))))
    }
}

fn setup(ctx: &mut Context, common: &ExperimentCommon) -> Result<ExperimentSetup> {
    apply_train_settings(&mut ctx.config, &common.settings);
    if common.full_grid {
        ctx.config.scenario = ScenarioConfig {
            cir_taps: ctx.config.scenario.cir_taps,
            ..ScenarioConfig::paper()
        };
    }
    if let Some(n) = common.samples {
        ctx.config.dataset.samples = n;
    }
    ctx.config.validate()?;
    for s in &common.seeds {
        ctx.manifest.seed(*s);
    }
    ensure_dir(&common.out)?;
    Ok(ExperimentSetup {
        scenario: ctx.config.scenario.clone(),
        locnet: ctx.config.locnet.clone(),
        train: ctx.config.train.clone(),
        samples: ctx.config.dataset.samples,
        split: ctx.config.dataset.split,
    })
}

fn write_runs(ctx: &mut Context, dir: &Path, runs: &[RunOutcome], per_trp: bool) -> Result<()> {
    for run in runs {
        let sub = dir.join(&run.label);
        run.report.write_csvs(&sub, per_trp)?;
        for n in ["cdf.csv", "summary.csv"].iter().chain(per_trp.then_some(&"per_trp.csv")) {
            ctx.manifest.output(&sub.join(n));
        }
        let history = sub.join("history.csv");
        write_history_csv(&history, &run.history.history)?;
        ctx.manifest.output(&history);
    }
    let table: Vec<(&str, _)> = runs.iter().map(|r| (r.label.as_str(), &r.report)).collect();
    write_output(ctx, &dir.join("comparison.csv"), compare_runs(&table).as_bytes())
}

fn run_seeds(
    ctx: &mut Context,
    common: &ExperimentCommon,
    per_trp: bool,
    mut one: impl FnMut(&ExperimentSetup, u64, experiment::Progress) -> Result<Vec<RunOutcome>>,
) -> Result<()> {
    let setup = setup(ctx, common)?;
    let epochs = setup.train.epochs;
    for &seed in &common.seeds {
        let started = Instant::now();
        let mut progress = |label: &str, r: &EpochRecord| progress_line(&format!("seed {seed} {label} "), r, epochs, started);
        let runs = one(&setup, seed, &mut progress)?;
        let dir = common.out.join(format!("seed-{seed}"));
        write_runs(ctx, &dir, &runs, per_trp)?;
        for r in &runs {
            println!("seed {seed} {}: p90 {:.3} m", r.label, r.report.p90_m);
        }
    }
    Ok(())
}

fn input_richness(mut ctx: Context, a: InputRichnessArgs) -> Result<()> {
    run_seeds(&mut ctx, &a.common, false, |s, seed, p| experiment::input_richness(s, &a.encodings, seed, p))?;
    finish(ctx, &a.common.out.join("manifest.toml"))
}

fn variable_trp(mut ctx: Context, a: VariableTrpArgs) -> Result<()> {
    run_seeds(&mut ctx, &a.common, true, |s, seed, p| {
        experiment::variable_trp(s, &a.encodings, a.min_available, seed, p)
    })?;
    finish(ctx, &a.common.out.join("manifest.toml"))
}

fn label_noise(mut ctx: Context, a: LabelNoiseArgs) -> Result<()> {
    run_seeds(&mut ctx, &a.common, false, |s, seed, p| {
        experiment::label_noise(s, a.encoding, seed, p).map(Vec::from)
    })?;
    finish(ctx, &a.common.out.join("manifest.toml"))
}
