//! The `frog` command-line tool: subcommands wiring config files to the
//! library. Every subcommand reads inputs, writes artifacts under the
//! configured output directory (never mutating inputs), and leaves a
//! manifest naming what it produced.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{parse_config, RunConfig};
use crate::data::{
    generate_synthetic, load_dataset, split_temporal, write_dataset, Dataset, DatasetSplit, SynthConfig,
};
use crate::encoders::UserModality;
use crate::error::{Error, Result};
use crate::model::{
    focal_term, load_checkpoint, save_checkpoint, score_on_tape, FrogModel, LossConfig, ScoreCaches, Variant,
};
use crate::numerics::{grad_check, GradCheckReport};
use crate::report::{
    dataset_artifacts, write_json, write_manifest, MetricsReport, SeedRun, Timings, CHECKPOINT_FILE,
    DATASET_DIR, METRICS_FILE, TIMINGS_FILE,
};
use crate::rng;
use crate::train::{
    average_metrics, bench_matching, evaluate, evaluate_baseline, run_ablation, train, train_baseline,
    AblationRun, BaselineKind, RankingMetrics, TrainConfig,
};

pub const GRADCHECK_FILE: &str = "gradcheck.json";
pub const BENCH_FILE: &str = "bench.json";

#[derive(Parser)]
#[command(name = "frog", version, about = "Multi-modal friend recommendation: synthesis, training, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write its three files
    Synth(CommonArgs),
    /// Train a model, evaluate it on the held-out day, save a checkpoint
    Train(CommonArgs),
    /// Rank test candidates with a saved checkpoint
    Eval(EvalArgs),
    /// Train every model variant plus the baselines and compare
    Ablate(CommonArgs),
    /// Check analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Time pairwise-matching forwards across embedding widths
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dotted-key override, e.g. --set train.learning_rate=0.01 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides config `out`)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed (overrides config `seed`)
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

impl CommonArgs {
    /// Resolves the full configuration: defaults, file, `--set`, then the
    /// `--seed`/`--out` flag shorthands.
    fn load(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut sets = self.set.clone();
        if let Some(seed) = self.seed {
            sets.push(format!("seed={seed}"));
        }
        let mut cfg = parse_config(self.config.as_deref(), &sets, base)?;
        if let Some(out) = &self.out {
            if out.as_os_str().is_empty() {
                return Err(Error::InvalidConfig { key: "out".into(), reason: "must be a non-empty path".into() });
            }
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trained model checkpoint to evaluate
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Maximum relative error allowed for exit code 0
    #[arg(long, value_name = "FLOAT", default_value_t = 1e-4)]
    threshold: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Embedding widths to time
    #[arg(long, value_delimiter = ',', value_name = "D,...", default_value = "16,32,64,128")]
    dims: Vec<usize>,
    /// Modality channels per forward
    #[arg(long, value_name = "INT", default_value_t = 5)]
    t: usize,
    /// Timed repetitions per width
    #[arg(long, value_name = "INT", default_value_t = 50)]
    reps: usize,
}

/// Entry point behind `main`: parses argv, dispatches, maps errors to
/// exit codes (0 success, 1 failure, 2 usage).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return err.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Ablate(args) => cmd_ablate(&args),
        Command::Gradcheck(args) => cmd_gradcheck(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn cmd_synth(args: &CommonArgs) -> Result<i32> {
    let cfg = args.load(&RunConfig::default())?;
    let mut timings = Timings::new();
    let ds = timings.time("generate", || generate_synthetic(&cfg.data.synth, rng::sub_seed(cfg.seed, "synth")))?;
    let dir = cfg.out.join(DATASET_DIR);
    timings.time("write", || write_dataset(&ds, &dir))?;
    write_json(&cfg.out.join(TIMINGS_FILE), &timings)?;
    write_manifest(&cfg.out, "synth", &cfg, &dataset_artifacts())?;
    println!(
        "synth: {} users, {} edges, {} instances -> {}",
        ds.n(),
        ds.graph.edge_count(),
        ds.instances.len(),
        dir.display()
    );
    Ok(0)
}

fn cmd_train(args: &CommonArgs) -> Result<i32> {
    let cfg = args.load(&RunConfig::default())?;
    let mut timings = Timings::new();
    let (ds, origin) = timings.time("data", || obtain_dataset(&cfg))?;
    let split = timings.time("split", || make_split(&cfg, &ds))?;
    let shape = cfg.model.to_shape(&ds)?;
    println!("dataset: {origin}");
    println!(
        "split: train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    println!(
        "model: variant={} d={} h={} m={} t={}",
        shape.variant.name(),
        shape.d(),
        shape.h,
        shape.m,
        shape.t()
    );

    let (model, report) = timings.time("train", || train::<f64>(&cfg.train, &shape, &ds, &split))?;
    let metrics =
        timings.time("eval", || evaluate(&model, &ds, &split.test, &cfg.train, rng::sub_seed(cfg.seed, "eval")))?;

    fs::create_dir_all(&cfg.out)?;
    save_checkpoint(&model, &cfg.out.join(CHECKPOINT_FILE))?;
    let metrics_report = MetricsReport {
        command: "train".into(),
        seed: cfg.seed,
        config: cfg.clone(),
        runs: vec![SeedRun { seed: cfg.train.seed, train: Some(report.clone()), test: metrics.clone() }],
        mean: metrics.clone(),
        timings_file: TIMINGS_FILE.into(),
    };
    write_json(&cfg.out.join(METRICS_FILE), &metrics_report)?;
    write_json(&cfg.out.join(TIMINGS_FILE), &timings)?;
    write_manifest(&cfg.out, "train", &cfg, &[CHECKPOINT_FILE.to_string(), METRICS_FILE.to_string()])?;

    let last = report.train_loss.len().saturating_sub(1);
    println!(
        "train: epoch 0 loss {:.6} -> epoch {} loss {:.6}, best epoch {} (val HR@10 {:.4})",
        report.train_loss.first().copied().unwrap_or(f64::NAN),
        last,
        report.train_loss.last().copied().unwrap_or(f64::NAN),
        report.best_epoch,
        report.val_hr10.get(report.best_epoch).copied().unwrap_or(f64::NAN),
    );
    println!("test: {}", metric_line(&metrics));
    println!("wrote {}", cfg.out.display());
    Ok(0)
}

fn cmd_eval(args: &EvalArgs) -> Result<i32> {
    let cfg = args.common.load(&RunConfig::default())?;
    let mut timings = Timings::new();
    let model = load_checkpoint::<f64>(&args.checkpoint)?;
    let (ds, origin) = timings.time("data", || obtain_dataset(&cfg))?;
    let split = timings.time("split", || make_split(&cfg, &ds))?;
    println!("dataset: {origin}");

    let runs = timings.time("eval", || -> Result<Vec<SeedRun>> {
        (0..cfg.eval.repeats)
            .map(|r| {
                let seed = rng::sub_seed_n(cfg.seed, "eval", r as u64);
                let test = evaluate(&model, &ds, &split.test, &cfg.train, seed)?;
                Ok(SeedRun { seed, train: None, test })
            })
            .collect()
    })?;
    let mean = average_metrics(&runs.iter().map(|r| r.test.clone()).collect::<Vec<_>>())?;

    let metrics_report = MetricsReport {
        command: "eval".into(),
        seed: cfg.seed,
        config: cfg.clone(),
        runs,
        mean: mean.clone(),
        timings_file: TIMINGS_FILE.into(),
    };
    write_json(&cfg.out.join(METRICS_FILE), &metrics_report)?;
    write_json(&cfg.out.join(TIMINGS_FILE), &timings)?;
    write_manifest(&cfg.out, "eval", &cfg, &[METRICS_FILE.to_string()])?;

    println!("eval ({} negative-sampling seeds): {}", cfg.eval.repeats, metric_line(&mean));
    println!("wrote {}", cfg.out.display());
    Ok(0)
}

/// Per-variant section of the ablation metrics file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: Vec<AblationRun>,
    pub mean: RankingMetrics,
}

/// Per-baseline section of the ablation metrics file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub baseline: BaselineKind,
    pub runs: Vec<SeedRun>,
    pub mean: RankingMetrics,
}

/// The metrics file for `ablate` runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblateReport {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub variants: Vec<VariantSummary>,
    pub baselines: Vec<BaselineSummary>,
    pub timings_file: String,
}

fn cmd_ablate(args: &CommonArgs) -> Result<i32> {
    let cfg = args.load(&RunConfig::default())?;
    let mut timings = Timings::new();
    let (ds, origin) = timings.time("data", || obtain_dataset(&cfg))?;
    let split = timings.time("split", || make_split(&cfg, &ds))?;
    let shape = cfg.model.to_shape(&ds)?;
    println!("dataset: {origin}");
    println!("{} repeats per variant, seeds derived from {}", cfg.eval.repeats, cfg.seed);

    let repeat_cfg = |r: usize| TrainConfig {
        seed: rng::sub_seed_n(cfg.seed, "repeat", r as u64),
        ..cfg.train.clone()
    };
    let eval_seed = |r: usize| rng::sub_seed_n(cfg.seed, "eval", r as u64);

    let mut variants = Vec::new();
    for variant in Variant::ALL {
        let runs = timings.time(&format!("variant.{}", variant.name()), || -> Result<Vec<AblationRun>> {
            (0..cfg.eval.repeats)
                .map(|r| run_ablation::<f64>(variant, &shape, &repeat_cfg(r), &ds, &split, eval_seed(r)))
                .collect()
        })?;
        let mean = average_metrics(&runs.iter().map(|r| r.test.clone()).collect::<Vec<_>>())?;
        println!("variant {:<12} {}", variant.name(), metric_line(&mean));
        variants.push(VariantSummary { variant, runs, mean });
    }

    let mut baselines = Vec::new();
    for kind in [BaselineKind::LogisticRegression, BaselineKind::Mlp] {
        let runs = timings.time(&format!("baseline.{}", kind.name()), || -> Result<Vec<SeedRun>> {
            (0..cfg.eval.repeats)
                .map(|r| {
                    let train_cfg = repeat_cfg(r);
                    let (model, report) = train_baseline::<f64>(kind, &train_cfg, &ds, &split)?;
                    let test = evaluate_baseline(&model, &ds, &split.test, &train_cfg, eval_seed(r))?;
                    Ok(SeedRun { seed: train_cfg.seed, train: Some(report), test })
                })
                .collect()
        })?;
        let mean = average_metrics(&runs.iter().map(|r| r.test.clone()).collect::<Vec<_>>())?;
        println!("baseline {:<11} {}", kind.name(), metric_line(&mean));
        baselines.push(BaselineSummary { baseline: kind, runs, mean });
    }

    let report = AblateReport {
        command: "ablate".into(),
        seed: cfg.seed,
        config: cfg.clone(),
        variants,
        baselines,
        timings_file: TIMINGS_FILE.into(),
    };
    write_json(&cfg.out.join(METRICS_FILE), &report)?;
    write_json(&cfg.out.join(TIMINGS_FILE), &timings)?;
    write_manifest(&cfg.out, "ablate", &cfg, &[METRICS_FILE.to_string()])?;
    println!("wrote {}", cfg.out.display());
    Ok(0)
}

/// Artifact written by `gradcheck`.
#[derive(Debug, Serialize)]
pub struct GradcheckArtifact {
    pub threshold: f64,
    pub passed: bool,
    #[serde(flatten)]
    pub report: GradCheckReport,
}

/// Small-but-whole default: every pipeline stage active, sized so the
/// finite-difference sweep over all parameters stays fast.
fn gradcheck_base() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model.d = 8;
    cfg.model.h = 8;
    cfg.model.m = 8;
    cfg.model.modalities = vec![UserModality::Profile, UserModality::Graph];
    cfg.model.sample_sizes = [4, 3];
    cfg.data.synth = SynthConfig {
        n: 48,
        communities: 3,
        profile_dim: 3,
        image_dim: 2,
        text_dim: 2,
        positives_per_user_day: 0.4,
        candidate_pool: 12,
        ..SynthConfig::default()
    };
    cfg.train.batch_size = 4;
    cfg
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<i32> {
    let cfg = args.common.load(&gradcheck_base())?;
    let (ds, origin) = obtain_dataset(&cfg)?;
    let split = make_split(&cfg, &ds)?;
    let shape = cfg.model.to_shape(&ds)?;
    // All-zero pair features park the pair projection exactly on the ReLU
    // kink (0·W + zero-init bias), where the derivative is one-sided and a
    // central difference is meaningless; check at differentiable points.
    let batch: Vec<_> = split
        .train
        .iter()
        .filter(|inst| inst.pair_feats.iter().any(|&f| f != 0.0))
        .take(cfg.train.batch_size)
        .collect();
    if batch.is_empty() {
        return Err(Error::EmptyInput { op: "gradcheck: no usable training instances" });
    }
    println!("dataset: {origin}");
    println!(
        "gradcheck: variant={} d={} h={} m={} t={}, batch {}",
        shape.variant.name(),
        shape.d(),
        shape.h,
        shape.m,
        shape.t(),
        batch.len()
    );

    let model = FrogModel::<f64>::new(shape.clone(), rng::sub_seed(cfg.train.seed, "init"))?;
    let mut params = model.params.clone();
    let sage_seed = rng::sub_seed(cfg.train.seed, "neighborhoods");
    let loss_cfg: LossConfig = cfg.train.loss;
    let report = grad_check(&mut params, crate::numerics::DEFAULT_FD_STEP, |tape, set, vars| {
        let bound = set.bind_vars(vars);
        let mut caches = ScoreCaches::new();
        let mut terms = Vec::with_capacity(batch.len());
        for inst in &batch {
            let y_hat = score_on_tape(
                tape,
                &bound,
                &shape,
                &ds.graph,
                &ds.users,
                sage_seed,
                &mut caches,
                inst.src,
                inst.dst,
                &inst.pair_feats,
            )?;
            terms.push(focal_term(tape, y_hat, inst.label, &loss_cfg));
        }
        Ok(tape.mean_of(&terms))
    })?;

    let passed = report.max_rel_err <= args.threshold;
    let artifact = GradcheckArtifact { threshold: args.threshold, passed, report: report.clone() };
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join(GRADCHECK_FILE), &artifact)?;
    write_manifest(&cfg.out, "gradcheck", &cfg, &[GRADCHECK_FILE.to_string()])?;
    println!(
        "gradcheck: {} entries, max rel err {:.3e} at `{}`[{}] (threshold {:.1e}) -> {}",
        report.entries_checked,
        report.max_rel_err,
        report.worst_param,
        report.worst_entry,
        args.threshold,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(if passed { 0 } else { 1 })
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let cfg = args.common.load(&RunConfig::default())?;
    let report = bench_matching(&args.dims, args.t, args.reps)?;
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join(BENCH_FILE), &report)?;
    write_manifest(&cfg.out, "bench", &cfg, &[BENCH_FILE.to_string()])?;
    for point in &report.points {
        println!("bench: d={:<4} mean {:.6} ms over {} reps", point.d, point.mean_secs * 1e3, report.repetitions);
    }
    println!("bench: log-log slope {:.3} (t={})", report.slope, report.t);
    Ok(0)
}

/// Loads the configured dataset files, or generates synthetically.
fn obtain_dataset(cfg: &RunConfig) -> Result<(Dataset, String)> {
    if cfg.data.is_external() {
        let (users, edges, instances) = (
            cfg.data.users.as_ref().expect("validated"),
            cfg.data.edges.as_ref().expect("validated"),
            cfg.data.instances.as_ref().expect("validated"),
        );
        let (ds, report) = load_dataset(users, edges, instances)?;
        let origin = format!(
            "loaded {} users, {} edges, {} instances from {}",
            report.users,
            report.edges,
            report.instances,
            users.display()
        );
        Ok((ds, origin))
    } else {
        let ds = generate_synthetic(&cfg.data.synth, rng::sub_seed(cfg.seed, "synth"))?;
        let origin = format!(
            "synthetic (n={}, {} edges, {} instances)",
            ds.n(),
            ds.graph.edge_count(),
            ds.instances.len()
        );
        Ok((ds, origin))
    }
}

fn make_split(cfg: &RunConfig, ds: &Dataset) -> Result<DatasetSplit> {
    split_temporal(&ds.instances, &ds.graph, &ds.interactions, rng::sub_seed(cfg.seed, "split"))
}

fn metric_line(m: &RankingMetrics) -> String {
    let hr: Vec<String> = m.hr.iter().map(|(k, v)| format!("HR@{k} {v:.4}")).collect();
    let ndcg: Vec<String> = m.ndcg.iter().map(|(k, v)| format!("NDCG@{k} {v:.4}")).collect();
    format!("{}  {}", hr.join("  "), ndcg.join("  "))
}
