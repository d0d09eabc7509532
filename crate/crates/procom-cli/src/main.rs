//! Command-line pipeline: pretrain, prompt-tune, predict, eval, bench,
//! gen-synthetic. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 numeric failure.

use clap::{Args, Parser, Subcommand};
use procom::checkpoint::{load_checkpoint, save_checkpoint};
use procom::config::RunConfig;
use procom::error::Error;
use procom::eval::{gen_planted, BenchConfig};
use procom::graph::{Community, Graph};
use procom::parallel::with_workers;
use procom::pipeline::{
    self, bench_report, compact_communities, eval_report, load_raw_communities,
    make_checkpoint, prediction_report, split_prompts, write_predictions,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "procom",
    version,
    about = "Few-shot targeted community detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train the graph encoder and write an encoder checkpoint.
    Pretrain(PretrainCmd),
    /// Tune the prompting function on m prompt communities (encoder frozen).
    PromptTune(PromptTuneCmd),
    /// Predict communities with a tuned checkpoint pair.
    Predict(PredictCmd),
    /// Score a predictions file against ground-truth communities.
    Eval(EvalCmd),
    /// End-to-end run on the built-in synthetic planted benchmark.
    Bench(BenchCmd),
    /// Emit synthetic benchmark files (edge list + community files).
    GenSynthetic(GenSyntheticCmd),
}

/// Flags shared across subcommands; every value can also come from a
/// `--config` file (`key = value` lines) with flags taking precedence.
/// `PROCOM_SEED` is a seed fallback below both.
#[derive(Args, Debug, Default)]
struct CommonOpts {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Dataset preset supplying the usual prediction count
    /// (facebook 200, livejournal 1000, amazon/dblp/twitter 5000).
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of prompt communities (default 10).
    #[arg(long)]
    m: Option<usize>,
    /// Number of predicted communities (default: preset value, else the
    /// held-out count).
    #[arg(long = "num-pred")]
    num_pred: Option<usize>,
    /// Context radius; also the encoder depth.
    #[arg(long)]
    k: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// InfoNCE temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// Weight of the context-distinction loss.
    #[arg(long)]
    lambda: Option<f64>,
    /// Remaining edge ratio for context corruption.
    #[arg(long)]
    rho: Option<f64>,
    /// Distillation threshold.
    #[arg(long)]
    alpha: Option<f64>,
    /// Pre-training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Prompt-tuning epochs.
    #[arg(long = "prompt-epochs")]
    prompt_epochs: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// Pre-training learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "prompt-lr")]
    prompt_lr: Option<f64>,
    /// MLP hidden width.
    #[arg(long)]
    hidden: Option<usize>,
    /// Per-hop neighbor cap for very dense hubs (default unlimited).
    #[arg(long = "hop-cap")]
    hop_cap: Option<usize>,
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

/// Known datasets and their usual prediction counts.
#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Preset {
    Facebook,
    Amazon,
    Dblp,
    Livejournal,
    Twitter,
}

impl Preset {
    fn num_pred(self) -> usize {
        match self {
            Preset::Facebook => 200,
            Preset::Livejournal => 1000,
            Preset::Amazon | Preset::Dblp | Preset::Twitter => 5000,
        }
    }
}

impl CommonOpts {
    fn build(&self) -> Result<RunConfig, Error> {
        self.build_from(RunConfig::default())
    }

    fn build_from(&self, base: RunConfig) -> Result<RunConfig, Error> {
        let mut cfg = base;
        if let Some(preset) = self.preset {
            cfg.num_pred = Some(preset.num_pred());
        }
        if let Ok(seed) = std::env::var("PROCOM_SEED") {
            cfg.seed = seed
                .parse()
                .map_err(|_| Error::Usage(format!("PROCOM_SEED is not an integer: {seed:?}")))?;
        }
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        macro_rules! flag {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        flag!(seed);
        flag!(m);
        flag!(k);
        flag!(dim);
        flag!(tau);
        flag!(lambda);
        flag!(rho);
        flag!(alpha);
        flag!(epochs);
        flag!(prompt_epochs);
        flag!(batch_size);
        flag!(lr);
        flag!(prompt_lr);
        flag!(hidden);
        flag!(workers);
        if let Some(v) = self.num_pred {
            cfg.num_pred = Some(v);
        }
        if let Some(v) = self.hop_cap {
            cfg.hop_cap = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct PretrainCmd {
    /// Edge-list file (`u v` per line, '#' comments).
    #[arg(long, value_name = "FILE")]
    edges: PathBuf,
    /// Optional dense feature matrix (one row per node); structural
    /// degree features are computed when absent.
    #[arg(long, value_name = "FILE")]
    features: Option<PathBuf>,
    /// Output checkpoint path.
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct PromptTuneCmd {
    #[arg(long, value_name = "FILE")]
    edges: PathBuf,
    #[arg(long, value_name = "FILE")]
    features: Option<PathBuf>,
    /// Ground-truth community file; m prompts are split out by seed.
    #[arg(long, value_name = "FILE")]
    communities: PathBuf,
    /// Input encoder checkpoint.
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Output checkpoint with the tuned prompting function.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct PredictCmd {
    #[arg(long, value_name = "FILE")]
    edges: PathBuf,
    #[arg(long, value_name = "FILE")]
    features: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    communities: PathBuf,
    /// Tuned checkpoint (encoder + prompting function).
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Output predictions file (one community per line, original ids).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Companion report path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct EvalCmd {
    /// Predictions file (one community per line, original ids).
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Ground-truth community file.
    #[arg(long, value_name = "FILE")]
    communities: PathBuf,
    /// Report path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct BenchCmd {
    /// Report path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Background node count.
    #[arg(long, default_value_t = 1600)]
    nodes: usize,
    #[arg(long, default_value_t = 30)]
    targeted: usize,
    #[arg(long, default_value_t = 30)]
    distractors: usize,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct GenSyntheticCmd {
    /// Output prefix; writes PREFIX.edges, PREFIX.targeted.cmty,
    /// PREFIX.distractors.cmty.
    #[arg(long, value_name = "PREFIX")]
    out: PathBuf,
    #[arg(long, default_value_t = 1600)]
    nodes: usize,
    #[arg(long, default_value_t = 30)]
    targeted: usize,
    #[arg(long, default_value_t = 30)]
    distractors: usize,
    #[command(flatten)]
    common: CommonOpts,
}

fn load_graph(edges: &Path, features: Option<&Path>) -> Result<Graph, Error> {
    let graph = Graph::load_edge_list(edges)?;
    let graph = match features {
        Some(path) => {
            let (dim, rows) = graph.load_features(path)?;
            graph.with_features(dim, rows)?
        }
        None => graph.augment_features(),
    };
    log::info!("loaded graph: {}", graph.summary());
    Ok(graph)
}

fn check_feat_dim(graph: &Graph, ckpt_in_dim: usize) -> Result<(), Error> {
    if graph.feat_dim() != ckpt_in_dim {
        return Err(Error::data(format!(
            "feature-dim mismatch: graph has {}, checkpoint expects {}",
            graph.feat_dim(),
            ckpt_in_dim
        )));
    }
    Ok(())
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p.display().to_string(), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn bench_config(nodes: usize, targeted: usize, distractors: usize, seed: u64) -> BenchConfig {
    BenchConfig {
        background_nodes: nodes,
        num_targeted: targeted,
        num_distractors: distractors,
        seed,
        ..Default::default()
    }
}

/// Defaults for the synthetic benchmark. Planted communities are small
/// and 1-hop-compact, so k = 1 contexts fit them; the one-step-per-epoch
/// prompt tuner gets a longer schedule to accumulate enough updates.
fn bench_preset() -> RunConfig {
    RunConfig {
        k: 1,
        alpha: 0.3,
        prompt_epochs: 300,
        prompt_lr: 0.01,
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Pretrain(cmd) => {
            let cfg = cmd.common.build()?;
            let graph = load_graph(&cmd.edges, cmd.features.as_deref())?;
            let started = Instant::now();
            let (encoder, stats) =
                with_workers(cfg.workers, || pipeline::pretrain_stage(&graph, &cfg))?;
            log::info!(
                "pre-trained {} epochs in {:.1}s (loss {:.4} -> {:.4})",
                stats.epoch_losses.len(),
                started.elapsed().as_secs_f64(),
                stats.epoch_losses.first().unwrap_or(&f64::NAN),
                stats.epoch_losses.last().unwrap_or(&f64::NAN),
            );
            save_checkpoint(&cmd.checkpoint, &make_checkpoint(encoder, None, &cfg))
        }
        Command::PromptTune(cmd) => {
            let cfg = cmd.common.build()?;
            let graph = load_graph(&cmd.edges, cmd.features.as_deref())?;
            let ckpt = load_checkpoint(&cmd.checkpoint)?;
            check_feat_dim(&graph, ckpt.feat_dim())?;
            let truths = graph.load_communities(&cmd.communities)?;
            let (prompts, _) = split_prompts(&truths, cfg.m, cfg.seed)?;
            let (phi, stats) = with_workers(cfg.workers, || {
                pipeline::tune_stage(&graph, &ckpt.encoder, &prompts, &cfg)
            })?;
            log::info!(
                "tuned prompting function: {} supervision signals, loss {:.4} -> {:.4}",
                stats.supervision_count,
                stats.epoch_losses.first().unwrap_or(&f64::NAN),
                stats.epoch_losses.last().unwrap_or(&f64::NAN),
            );
            save_checkpoint(&cmd.out, &make_checkpoint(ckpt.encoder, Some(phi), &cfg))
        }
        Command::Predict(cmd) => {
            let cfg = cmd.common.build()?;
            let graph = load_graph(&cmd.edges, cmd.features.as_deref())?;
            let ckpt = load_checkpoint(&cmd.checkpoint)?;
            check_feat_dim(&graph, ckpt.feat_dim())?;
            let phi = ckpt.prompt.ok_or_else(|| {
                Error::data("prompt stage missing: checkpoint has no prompting function; run prompt-tune first")
            })?;
            let truths = graph.load_communities(&cmd.communities)?;
            let (prompts, heldout) = split_prompts(&truths, cfg.m, cfg.seed)?;
            let n_pred = cfg.num_pred.unwrap_or(heldout.len()).max(1);
            let preds = with_workers(cfg.workers, || {
                pipeline::predict_stage(&graph, &ckpt.encoder, &phi, &prompts, n_pred, &cfg)
            })?;
            write_predictions(&cmd.out, &preds, &graph)?;
            write_or_print(cmd.report.as_deref(), &prediction_report(&preds))
        }
        Command::Eval(cmd) => {
            let cfg = cmd.common.build()?;
            let preds_raw = load_raw_communities(&cmd.pred)?;
            let truths_raw = load_raw_communities(&cmd.communities)?;
            // With an explicit --m, score against the held-out complement
            // of the (m, seed) split; otherwise against the whole file.
            let truths_raw = match cmd.common.m {
                Some(m) => split_prompts(&truths_raw, m, cfg.seed)?.1,
                None => truths_raw,
            };
            let (preds, truths) = compact_communities(&preds_raw, &truths_raw)?;
            let metrics = pipeline::evaluate(&preds, &truths)?;
            let report = eval_report(&metrics, preds.len(), truths.len(), cfg.seed, &cfg.echo());
            write_or_print(cmd.out.as_deref(), &report)
        }
        Command::Bench(cmd) => {
            let cfg = cmd.common.build_from(bench_preset())?;
            let bcfg = bench_config(cmd.nodes, cmd.targeted, cmd.distractors, cfg.seed);
            let started = Instant::now();
            let outcome =
                with_workers(cfg.workers, || pipeline::run_synthetic_bench(&bcfg, &cfg))?;
            log::info!("bench finished in {:.1}s", started.elapsed().as_secs_f64());
            let report = bench_report(&outcome, cfg.seed, &cfg.echo());
            write_or_print(cmd.out.as_deref(), &report)
        }
        Command::GenSynthetic(cmd) => {
            let cfg = cmd.common.build()?;
            let bcfg = bench_config(cmd.nodes, cmd.targeted, cmd.distractors, cfg.seed);
            let (graph, targeted, distractors) = gen_planted(&bcfg)?;
            let prefix = cmd.out.display();
            write_edge_file(&format!("{prefix}.edges"), &graph)?;
            write_community_file(&format!("{prefix}.targeted.cmty"), &graph, &targeted)?;
            write_community_file(&format!("{prefix}.distractors.cmty"), &graph, &distractors)?;
            log::info!(
                "wrote {prefix}.edges ({} nodes, {} edges), {} targeted, {} distractor communities",
                graph.num_nodes(),
                graph.num_edges(),
                targeted.len(),
                distractors.len()
            );
            Ok(())
        }
    }
}

fn write_edge_file(path: &str, graph: &Graph) -> Result<(), Error> {
    let mut out = String::new();
    let _ = writeln!(out, "# synthetic planted benchmark");
    for u in 0..graph.num_nodes() as u32 {
        for &v in graph.neighbors(u) {
            if v > u {
                let _ = writeln!(out, "{} {}", graph.original_id(u), graph.original_id(v));
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.to_string(), e))
}

fn write_community_file(path: &str, graph: &Graph, cs: &[Community]) -> Result<(), Error> {
    let mut out = String::new();
    for c in cs {
        let ids: Vec<String> = c
            .members()
            .iter()
            .map(|&v| graph.original_id(v).to_string())
            .collect();
        let _ = writeln!(out, "{}", ids.join(" "));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.to_string(), e))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) => 1,
        Error::Io { .. } | Error::Data(_) | Error::Shape { .. } => 2,
        Error::Numeric(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version output is a successful exit
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
