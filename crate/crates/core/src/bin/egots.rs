use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use egots::bench::{time_builder, Builder};
use egots::config::RunConfig;
use egots::datasynth::{
    planted_motif_dataset, read_instances, synthesize_dataset, PlantedConfig, Split, SynthesisRecipe,
};
use egots::knngraph::{knn_stomp_cross_with, knn_stomp_self_with, BuildOptions};
use egots::knnclassify::{knn_predict, select_k_by_validation};
use egots::metrics::{median_foreground_length, onset_f1};
use egots::postprocess::{select_window_by_validation, smooth_labels};
use egots::trainer::{default_windows, infer, train, Model};
use egots::{Error, LabelSeries, Result, TimeSeries};

#[derive(Parser)]
#[command(name = "egots", version, about = "k-NN subsequence graphs and ego-network subsequence classification")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for graph construction (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build train/valid/test series from instances or planted motifs.
    Synth(SynthArgs),
    /// Build a k-NN subsequence graph.
    BuildGraph(GraphArgs),
    /// k-NN majority-vote classification of a test series.
    BaselineKnn(KnnArgs),
    /// Train an ego-network or baseline model.
    Train(TrainArgs),
    /// Predict labels for a test series with a trained model.
    Infer(InferArgs),
    /// Temporal-consistency smoothing of a label file.
    Smooth(SmoothArgs),
    /// Onset-based precision, recall and F1.
    Eval(EvalArgs),
    /// Time the naive and STOMP-based graph builders.
    BenchGraph(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the split CSVs and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Headerless CSV of instances (`label,v0,v1,...`); planted motifs when absent.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Rows per instance in --instances.
    #[arg(long, default_value_t = 1)]
    dims: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Planted: foreground classes.
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Planted: instances per class.
    #[arg(long, default_value_t = 40)]
    runs: usize,
    #[arg(long, default_value_t = 0.25)]
    noise: f64,
    /// Planted: foreground length (default 1.5·m).
    #[arg(long)]
    instance_len: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    #[value(name = "self")]
    SelfJoin,
    Cross,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum GraphFormat {
    Knng,
    Csv,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Query series (and target in self mode).
    #[arg(long)]
    series: PathBuf,
    /// Target series for cross mode.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "knng")]
    format: GraphFormat,
}

#[derive(Args)]
struct SplitPaths {
    #[arg(long)]
    train_series: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    valid_series: Option<PathBuf>,
    #[arg(long)]
    valid_labels: Option<PathBuf>,
    #[arg(long)]
    test_series: Option<PathBuf>,
    /// Test truth; when given the predictions are scored.
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Predicted-label CSV (or checkpoint for `train`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KnnArgs {
    #[command(flatten)]
    paths: SplitPaths,
    #[arg(long)]
    m: Option<usize>,
    /// Neighbors in the graph; the largest k candidate.
    #[arg(long)]
    k: Option<usize>,
    /// Fixed vote size; chosen on validation data from {1, 5, 10} ∩ 1..=k when absent.
    #[arg(long)]
    k_use: Option<usize>,
    /// Fixed smoothing window; chosen on validation data when absent (1 without validation).
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    paths: SplitPaths,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    model: Option<egots::trainer::ModelKind>,
    #[arg(long)]
    backbone: Option<egots::backbones::BackboneKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    valid_every: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    window_candidates: Option<Vec<usize>>,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    paths: SplitPaths,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Apply the checkpoint's smoothing window to the predictions.
    #[arg(long)]
    smooth: bool,
}

#[derive(Args)]
struct SmoothArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, conflicts_with = "auto_window")]
    window: Option<usize>,
    /// Choose the window on a validation prediction/truth pair.
    #[arg(long, requires_all = ["valid_pred", "valid_truth"])]
    auto_window: bool,
    #[arg(long)]
    valid_pred: Option<PathBuf>,
    #[arg(long)]
    valid_truth: Option<PathBuf>,
    /// Window candidates for --auto-window (default {1, m/4, m/2, m} with --m).
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Median foreground length (default: from the truth labels).
    #[arg(long)]
    m_med: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000,2000")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long = "impl", value_delimiter = ',', default_value = "naive,stomp")]
    builders: Vec<Builder>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SplitPaths {
    fn into_config(self) -> RunConfig {
        RunConfig {
            train_series: self.train_series,
            train_labels: self.train_labels,
            valid_series: self.valid_series,
            valid_labels: self.valid_labels,
            test_series: self.test_series,
            test_labels: self.test_labels,
            output: self.out,
            ..Default::default()
        }
    }
}

struct Ctx {
    json: bool,
    threads: Option<usize>,
    file: RunConfig,
}

impl Ctx {
    /// Resolves flags over the config file and logs the result to stderr.
    fn resolve(&self, flags: RunConfig) -> RunConfig {
        let mut cfg = self.file.clone().overlay(flags);
        cfg.threads = self.threads.or(cfg.threads);
        eprintln!("resolved config:\n{}", cfg.to_toml().trim_end());
        cfg
    }

    fn emit(&self, text: &str, value: serde_json::Value) {
        if self.json {
            println!("{value}");
        } else {
            println!("{text}");
        }
    }

    fn opts(&self, cfg: &RunConfig) -> BuildOptions {
        BuildOptions { threads: cfg.threads }
    }
}

fn path<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("`{key}` is required (flag or config key)")))
}

fn read_series(p: &Path) -> Result<TimeSeries> {
    TimeSeries::read_csv(p)
}

/// Reads label files and widens them to a shared class count.
fn read_labels(paths: &[&Path]) -> Result<Vec<LabelSeries>> {
    let raw = paths.iter().map(LabelSeries::read_csv).collect::<Result<Vec<_>>>()?;
    let n = raw.iter().map(LabelSeries::n_classes).max().unwrap_or(1).max(2);
    raw.into_iter().map(|l| l.with_n_classes(n)).collect()
}

fn score(pred: &[usize], truth_path: &Path) -> Result<serde_json::Value> {
    let truth = LabelSeries::read_csv(truth_path)?;
    let m_med = median_foreground_length(truth.labels())?;
    serde_json::to_value(onset_f1(pred, truth.labels(), m_med)?).map_err(|e| Error::Format(e.to_string()))
}

fn write_split(dir: &Path, name: &str, split: &Split) -> Result<()> {
    split.series.write_csv(dir.join(format!("{name}_series.csv")))?;
    split.labels.write_csv(dir.join(format!("{name}_labels.csv")))
}

fn write_json(p: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(p, text + "\n").map_err(|e| Error::io(p, e))
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let cfg = ctx.resolve(RunConfig { m: a.m, seed: a.seed, ..Default::default() });
    let m = RunConfig::require(&cfg.m, "m")?;
    let seed = cfg.seed.unwrap_or(0);
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let (splits, manifest) = match &a.instances {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| Error::io(p, e))?;
            let (instances, names) = read_instances(&p.display().to_string(), file, a.dims)?;
            let recipe = SynthesisRecipe::default();
            let n_classes = names.len() + 1;
            let splits = synthesize_dataset(instances, n_classes, &recipe, m, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let manifest = json!({
                "source": p.display().to_string(),
                "seed": seed,
                "m": m,
                "recipe": recipe,
                "n_classes": n_classes,
                "class_labels": names,
                "splits": splits.iter().zip(["train", "valid", "test"]).map(|(s, n)| json!({
                    "name": n, "length": s.series.len(), "instances_per_class": s.counts,
                })).collect::<Vec<_>>(),
            });
            (splits, manifest)
        }
        None => {
            let mut pc = PlantedConfig::new(a.classes, a.runs, m, a.noise, seed);
            pc.instance_len = a.instance_len;
            let ds = planted_motif_dataset(&pc)?;
            let manifest = serde_json::to_value(ds.manifest()).map_err(|e| Error::Format(e.to_string()))?;
            ([ds.train, ds.valid, ds.test], manifest)
        }
    };
    for (split, name) in splits.iter().zip(["train", "valid", "test"]) {
        write_split(&a.out_dir, name, split)?;
    }
    write_json(&a.out_dir.join("manifest.json"), &manifest)?;
    let lengths: Vec<usize> = splits.iter().map(|s| s.series.len()).collect();
    ctx.emit(
        &format!("wrote {} (train={} valid={} test={})", a.out_dir.display(), lengths[0], lengths[1], lengths[2]),
        json!({ "out_dir": a.out_dir, "lengths": lengths, "manifest": manifest }),
    );
    Ok(())
}

fn cmd_build_graph(ctx: &Ctx, a: GraphArgs) -> Result<()> {
    let cfg = ctx.resolve(RunConfig { m: a.m, k: a.k, output: a.out, ..Default::default() });
    let (m, k) = (RunConfig::require(&cfg.m, "m")?, RunConfig::require(&cfg.k, "k")?);
    let out = path(&cfg.output, "out")?;
    let query = read_series(&a.series)?;
    let start = std::time::Instant::now();
    let graph = match a.mode {
        Mode::SelfJoin => knn_stomp_self_with(&query, m, k, ctx.opts(&cfg))?,
        Mode::Cross => {
            let target = read_series(path(&a.target, "target")?)?;
            knn_stomp_cross_with(&query, &target, m, k, ctx.opts(&cfg))?
        }
    };
    let secs = start.elapsed().as_secs_f64();
    match a.format {
        GraphFormat::Knng => graph.save(out)?,
        GraphFormat::Csv => {
            let f = fs::File::create(out).map_err(|e| Error::io(out, e))?;
            graph.write_csv(std::io::BufWriter::new(f))?;
        }
    }
    ctx.emit(
        &format!("{} graph: {} rows × k={} (m={m}) in {secs:.3}s → {}", graph.mode(), graph.n_rows(), k, out.display()),
        json!({ "mode": graph.mode().to_string(), "rows": graph.n_rows(), "m": m, "k": k, "seconds": secs, "out": out }),
    );
    Ok(())
}

fn write_pred(out: &Path, labels: &LabelSeries) -> Result<()> {
    labels.write_csv(out)
}

fn cmd_baseline_knn(ctx: &Ctx, a: KnnArgs) -> Result<()> {
    let mut flags = a.paths.into_config();
    flags.m = a.m;
    flags.k = a.k;
    let cfg = ctx.resolve(flags);
    let (m, k) = (RunConfig::require(&cfg.m, "m")?, RunConfig::require(&cfg.k, "k")?);
    let train_s = read_series(path(&cfg.train_series, "train_series")?)?;
    let test_s = read_series(path(&cfg.test_series, "test_series")?)?;
    let out = path(&cfg.output, "out")?;
    let valid = match (&cfg.valid_series, &cfg.valid_labels) {
        (Some(s), Some(l)) => Some((read_series(s)?, l.as_path())),
        _ => None,
    };
    let mut label_paths = vec![path(&cfg.train_labels, "train_labels")?];
    if let Some((_, l)) = &valid {
        label_paths.push(l);
    }
    let labels = read_labels(&label_paths)?;
    let train_l = &labels[0];
    let (k_use, window) = match (&valid, labels.get(1)) {
        (Some((vs, _)), Some(vl)) => {
            let g = knn_stomp_cross_with(vs, &train_s, m, k, ctx.opts(&cfg))?;
            let m_med = median_foreground_length(vl.labels())?;
            let k_use = match a.k_use {
                Some(v) => v,
                None => {
                    let cands: Vec<usize> = [1, 5, 10].into_iter().filter(|&c| c <= k).collect();
                    let cands = if cands.is_empty() { vec![k] } else { cands };
                    let w0 = a.window.unwrap_or(1);
                    select_k_by_validation(&g, train_l, vl, &cands, w0, m_med)?
                }
            };
            let window = match a.window {
                Some(w) => w,
                None => {
                    let pred = knn_predict(&g, train_l, k_use)?;
                    select_window_by_validation(pred.labels(), vl.labels(), &default_windows(m), m_med)?
                }
            };
            (k_use, window)
        }
        _ => (a.k_use.unwrap_or(1), a.window.unwrap_or(1)),
    };
    let g = knn_stomp_cross_with(&test_s, &train_s, m, k, ctx.opts(&cfg))?;
    let raw = knn_predict(&g, train_l, k_use)?;
    let pred = LabelSeries::new(smooth_labels(raw.labels(), window)?, raw.n_classes())?;
    write_pred(out, &pred)?;
    let mut report = json!({ "k_use": k_use, "window": window, "out": out, "rows": pred.len() });
    let mut text = format!("k_use={k_use} window={window} wrote {} labels to {}", pred.len(), out.display());
    if let Some(t) = &cfg.test_labels {
        let s = score(pred.labels(), t)?;
        text = format!("{text}\n{}", scores_line(&s));
        report["scores"] = s;
    }
    ctx.emit(&text, report);
    Ok(())
}

fn scores_line(s: &serde_json::Value) -> String {
    format!(
        "precision={:.4} recall={:.4} f1={:.4} n_pred_onsets={} n_true_onsets={}",
        s["precision"].as_f64().unwrap_or(f64::NAN),
        s["recall"].as_f64().unwrap_or(f64::NAN),
        s["f1"].as_f64().unwrap_or(f64::NAN),
        s["n_pred_onsets"],
        s["n_true_onsets"]
    )
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let mut flags = a.paths.into_config();
    flags.m = a.m;
    flags.k = a.k;
    flags.model = a.model;
    flags.backbone = a.backbone;
    flags.epochs = a.epochs;
    flags.batch_size = a.batch_size;
    flags.lr = a.lr;
    flags.seed = a.seed;
    flags.patience = a.patience;
    flags.valid_every = a.valid_every;
    flags.window_candidates = a.window_candidates;
    let cfg = ctx.resolve(flags);
    let tc = cfg.train_config()?;
    let out = path(&cfg.output, "out")?;
    let train_s = read_series(path(&cfg.train_series, "train_series")?)?;
    let valid_s = cfg.valid_series.as_deref().map(read_series).transpose()?;
    let mut label_paths = vec![path(&cfg.train_labels, "train_labels")?];
    if valid_s.is_some() {
        label_paths.push(path(&cfg.valid_labels, "valid_labels")?);
    }
    let labels = read_labels(&label_paths)?;
    let valid = valid_s.as_ref().zip(labels.get(1));
    let (model, report) = train(&train_s, &labels[0], valid, &tc)?;
    model.save(out)?;
    let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    ctx.emit(
        &format!(
            "trained {} epochs (best epoch {}, valid f1 {:.4}, window {}), final loss {last:.4} → {}",
            report.epoch_losses.len(),
            report.best_epoch,
            report.best_valid_f1,
            model.manifest.window,
            out.display()
        ),
        json!({ "report": report, "manifest": model.manifest, "out": out }),
    );
    Ok(())
}

fn cmd_infer(ctx: &Ctx, a: InferArgs) -> Result<()> {
    let cfg = ctx.resolve(a.paths.into_config());
    let model = Model::load(&a.checkpoint)?;
    let out = path(&cfg.output, "out")?;
    let test_s = read_series(path(&cfg.test_series, "test_series")?)?;
    let train_s = read_series(path(&cfg.train_series, "train_series")?)?;
    let train_l = LabelSeries::read_csv(path(&cfg.train_labels, "train_labels")?)?
        .with_n_classes(model.manifest.n_classes)?;
    let mut pred = infer(&test_s, &train_s, &train_l, &model, cfg.threads)?;
    if a.smooth {
        pred = model.smooth(&pred)?;
    }
    write_pred(out, &pred)?;
    let mut report = json!({ "rows": pred.len(), "smoothed": a.smooth, "window": model.manifest.window, "out": out });
    let mut text = format!("wrote {} labels to {}", pred.len(), out.display());
    if let Some(t) = &cfg.test_labels {
        let s = score(pred.labels(), t)?;
        text = format!("{text}\n{}", scores_line(&s));
        report["scores"] = s;
    }
    ctx.emit(&text, report);
    Ok(())
}

fn cmd_smooth(ctx: &Ctx, a: SmoothArgs) -> Result<()> {
    let labels = LabelSeries::read_csv(&a.labels)?;
    let window = if a.auto_window {
        let vp = LabelSeries::read_csv(a.valid_pred.as_ref().expect("required by clap"))?;
        let vt = LabelSeries::read_csv(a.valid_truth.as_ref().expect("required by clap"))?;
        let cands = match (&a.candidates, a.m) {
            (Some(c), _) => c.clone(),
            (None, Some(m)) => default_windows(m),
            (None, None) => return Err(Error::Config("--auto-window needs --candidates or --m".into())),
        };
        let m_med = median_foreground_length(vt.labels())?;
        select_window_by_validation(vp.labels(), vt.labels(), &cands, m_med)?
    } else {
        a.window
            .ok_or_else(|| Error::Config("give --window or --auto-window".into()))?
    };
    let out = LabelSeries::new(smooth_labels(labels.labels(), window)?, labels.n_classes())?;
    out.write_csv(&a.out)?;
    ctx.emit(
        &format!("window={window} wrote {}", a.out.display()),
        json!({ "window": window, "out": a.out }),
    );
    Ok(())
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let pred = LabelSeries::read_csv(&a.pred)?;
    let truth = LabelSeries::read_csv(&a.truth)?;
    let m_med = match a.m_med {
        Some(v) => v,
        None => median_foreground_length(truth.labels())?,
    };
    let s = onset_f1(pred.labels(), truth.labels(), m_med)?;
    let mut v = serde_json::to_value(s).map_err(|e| Error::Format(e.to_string()))?;
    v["m_med"] = json!(m_med);
    ctx.emit(&s.report_line(), v);
    Ok(())
}

fn cmd_bench(ctx: &Ctx, a: BenchArgs) -> Result<()> {
    let cfg = ctx.resolve(RunConfig::default());
    let mut rows = Vec::new();
    if !ctx.json {
        println!("{:<6} {:>7} {:>5} {:>3} {:>5} {:>12}", "impl", "n", "m", "k", "reps", "median_s");
    }
    for &n in &a.n {
        for &b in &a.builders {
            let row = time_builder(b, n, a.m, a.k, a.reps, a.seed, cfg.threads)?;
            if !ctx.json {
                println!("{:<6} {:>7} {:>5} {:>3} {:>5} {:>12.6}", row.builder, n, a.m, a.k, a.reps, row.median);
            }
            rows.push(row);
        }
    }
    if ctx.json {
        println!("{}", json!({ "rows": rows }));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx { json: cli.json, threads: cli.threads, file };
    match cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::BuildGraph(a) => cmd_build_graph(&ctx, a),
        Command::BaselineKnn(a) => cmd_baseline_knn(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Infer(a) => cmd_infer(&ctx, a),
        Command::Smooth(a) => cmd_smooth(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::BenchGraph(a) => cmd_bench(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
