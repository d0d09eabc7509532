//! Stage orchestration shared by the CLI and the test suites: dataset
//! splitting, full-pipeline runs, the synthetic benchmark, report
//! formatting, and prediction-file I/O.
//!
//! Every report is plain structured text with no timestamps, so reruns
//! with identical inputs produce byte-identical artifacts.

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::encoder::{encode_all, EncoderParams};
use crate::error::{Error, Result};
use crate::eval::{bimatch, gen_planted, BenchConfig, Delta};
use crate::graph::{Community, Graph};
use crate::inference::{
    generate_candidates, generate_ego_candidates, community_embedding, select_top_n,
    PredictionSet,
};
use crate::pretrain::{run_pretrain, PretrainStats};
use crate::prompt::{run_prompt_tune, PromptParams, PromptTuneStats};
use crate::rng::{domain, stream};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Training precision; checkpoints store f32 arrays.
pub type TrainFloat = f32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub f1: f64,
    pub jaccard: f64,
}

/// Bi-matching F1 and Jaccard of predictions against ground truth.
pub fn evaluate(preds: &[Community], truths: &[Community]) -> Result<Metrics> {
    Ok(Metrics {
        f1: bimatch(preds, truths, Delta::F1)?,
        jaccard: bimatch(preds, truths, Delta::Jaccard)?,
    })
}

/// Uniform random m-subset as prompts, complement (in original order) as
/// held-out evaluation targets. Deterministic per seed.
pub fn split_prompts<T: Clone>(items: &[T], m: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.len() <= m {
        return Err(Error::data(format!(
            "need more than {m} communities to split, got {}",
            items.len()
        )));
    }
    let mut rng = stream(seed, domain::SPLIT, 0);
    let picked = rand::seq::index::sample(&mut rng, items.len(), m);
    let mut is_prompt = vec![false; items.len()];
    let prompts: Vec<T> = picked
        .iter()
        .map(|i| {
            is_prompt[i] = true;
            items[i].clone()
        })
        .collect();
    let heldout: Vec<T> = items
        .iter()
        .zip(&is_prompt)
        .filter(|(_, &p)| !p)
        .map(|(t, _)| t.clone())
        .collect();
    Ok((prompts, heldout))
}

/// Pre-train an encoder from a run configuration.
pub fn pretrain_stage(
    graph: &Graph,
    cfg: &RunConfig,
) -> Result<(EncoderParams<TrainFloat>, PretrainStats)> {
    run_pretrain::<TrainFloat>(graph, &cfg.pretrain_config())
}

/// Tune the prompting function against a frozen encoder.
pub fn tune_stage(
    graph: &Graph,
    encoder: &EncoderParams<TrainFloat>,
    prompts: &[Community],
    cfg: &RunConfig,
) -> Result<(PromptParams<TrainFloat>, PromptTuneStats)> {
    let z = encode_all(encoder, graph)?;
    run_prompt_tune(graph, &z, prompts, &cfg.prompt_config())
}

/// Candidate generation plus matching with a trained checkpoint pair.
pub fn predict_stage(
    graph: &Graph,
    encoder: &EncoderParams<TrainFloat>,
    phi: &PromptParams<TrainFloat>,
    prompts: &[Community],
    n_pred: usize,
    cfg: &RunConfig,
) -> Result<PredictionSet> {
    let (preds, _) = crate::inference::run_predict(
        graph,
        encoder,
        phi,
        prompts,
        n_pred,
        cfg.k,
        cfg.hop_cap,
    )?;
    Ok(preds)
}

/// One full trial: split -> pre-train -> tune -> predict -> evaluate
/// against the held-out communities.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub metrics: Metrics,
    pub n_pred: usize,
    pub m_heldout: usize,
}

pub fn run_trial(graph: &Graph, truths: &[Community], cfg: &RunConfig) -> Result<TrialOutcome> {
    cfg.validate()?;
    let (prompts, heldout) = split_prompts(truths, cfg.m, cfg.seed)?;
    let (encoder, _) = pretrain_stage(graph, cfg)?;
    let (phi, _) = tune_stage(graph, &encoder, &prompts, cfg)?;
    let n_pred = cfg.num_pred.unwrap_or(heldout.len()).max(1);
    let preds = predict_stage(graph, &encoder, &phi, &prompts, n_pred, cfg)?;
    let metrics = evaluate(&preds.communities(), &heldout)?;
    Ok(TrialOutcome {
        metrics,
        n_pred: preds.len(),
        m_heldout: heldout.len(),
    })
}

/// Synthetic benchmark outcome: the full pipeline against the held-out
/// targeted communities, plus the no-prompt raw-ego-net baseline.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub procom: Metrics,
    pub baseline: Metrics,
    pub nodes: usize,
    pub edges: usize,
    pub n_targeted: usize,
    pub n_distractors: usize,
    pub n_pred: usize,
    pub m_heldout: usize,
}

/// End-to-end run on the planted benchmark. Prompts are drawn from the
/// targeted communities; predictions are scored against the held-out
/// targeted communities; distractors stay unlabeled in the graph.
pub fn run_synthetic_bench(bench: &BenchConfig, cfg: &RunConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let (graph, targeted, distractors) = gen_planted(bench)?;
    let graph = if graph.feat_dim() == 0 {
        graph.augment_features()
    } else {
        graph
    };
    let (prompts, heldout) = split_prompts(&targeted, cfg.m, cfg.seed)?;
    let n_pred = cfg.num_pred.unwrap_or(heldout.len()).max(1);

    let (encoder, _) = pretrain_stage(&graph, cfg)?;
    let (phi, _) = tune_stage(&graph, &encoder, &prompts, cfg)?;
    let z = encode_all(&encoder, &graph)?;
    let prompt_embs: Vec<Vec<TrainFloat>> = prompts
        .iter()
        .map(|c| community_embedding(&z, c))
        .collect::<Result<_>>()?;

    let candidates = generate_candidates(&graph, &z, &phi, phi.alpha, cfg.k, cfg.hop_cap)?;
    let preds = select_top_n(&prompt_embs, &prompts, &candidates, n_pred)?;
    let procom = evaluate(&preds.communities(), &heldout)?;

    // w/o-prompt baseline: raw k-ego nets matched directly.
    let ego = generate_ego_candidates(&graph, &z, cfg.k, cfg.hop_cap)?;
    let base_preds = select_top_n(&prompt_embs, &prompts, &ego, n_pred)?;
    let baseline = evaluate(&base_preds.communities(), &heldout)?;

    Ok(BenchOutcome {
        procom,
        baseline,
        nodes: graph.num_nodes(),
        edges: graph.num_edges(),
        n_targeted: targeted.len(),
        n_distractors: distractors.len(),
        n_pred: preds.len(),
        m_heldout: heldout.len(),
    })
}

/// Checkpoint helper carrying the config echo.
pub fn make_checkpoint(
    encoder: EncoderParams<TrainFloat>,
    prompt: Option<PromptParams<TrainFloat>>,
    cfg: &RunConfig,
) -> Checkpoint {
    Checkpoint {
        encoder,
        prompt,
        seed: cfg.seed,
        config_echo: cfg.echo(),
    }
}

/// Write predictions: one community per line, space-separated original ids.
pub fn write_predictions(
    path: impl AsRef<Path>,
    preds: &PredictionSet,
    graph: &Graph,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in &preds.predictions {
        let ids: Vec<String> = p
            .members
            .members()
            .iter()
            .map(|&v| graph.original_id(v).to_string())
            .collect();
        let _ = writeln!(out, "{}", ids.join(" "));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Companion report: per-prediction matched prompt index and distance.
pub fn prediction_report(preds: &PredictionSet) -> String {
    let mut s = String::from("procom-prediction-report\n");
    let _ = writeln!(s, "requested = {}", preds.requested);
    let _ = writeln!(s, "selected = {}", preds.len());
    let _ = writeln!(s, "complete = {}", preds.is_complete());
    s.push_str("# index prompt_idx distance size\n");
    for (i, p) in preds.predictions.iter().enumerate() {
        let _ = writeln!(
            s,
            "{} {} {:.6} {}",
            i,
            p.prompt_idx,
            p.distance,
            p.members.len()
        );
    }
    s
}

/// Metric report for the `eval` stage.
pub fn eval_report(
    metrics: &Metrics,
    n_pred: usize,
    m_truth: usize,
    seed: u64,
    config_echo: &str,
) -> String {
    let mut s = String::from("procom-eval-report\n");
    let _ = writeln!(s, "f1 = {:.6}", metrics.f1);
    let _ = writeln!(s, "jaccard = {:.6}", metrics.jaccard);
    let _ = writeln!(s, "n_pred = {n_pred}");
    let _ = writeln!(s, "m_truth = {m_truth}");
    let _ = writeln!(s, "seed = {seed}");
    for line in config_echo.lines() {
        let _ = writeln!(s, "config.{line}");
    }
    s
}

/// Report for the synthetic benchmark run.
pub fn bench_report(out: &BenchOutcome, seed: u64, config_echo: &str) -> String {
    let mut s = String::from("procom-bench-report\n");
    let _ = writeln!(s, "nodes = {}", out.nodes);
    let _ = writeln!(s, "edges = {}", out.edges);
    let _ = writeln!(s, "n_targeted = {}", out.n_targeted);
    let _ = writeln!(s, "n_distractors = {}", out.n_distractors);
    let _ = writeln!(s, "n_pred = {}", out.n_pred);
    let _ = writeln!(s, "m_heldout = {}", out.m_heldout);
    let _ = writeln!(s, "f1 = {:.6}", out.procom.f1);
    let _ = writeln!(s, "jaccard = {:.6}", out.procom.jaccard);
    let _ = writeln!(s, "baseline_f1 = {:.6}", out.baseline.f1);
    let _ = writeln!(s, "baseline_jaccard = {:.6}", out.baseline.jaccard);
    let _ = writeln!(s, "seed = {seed}");
    for line in config_echo.lines() {
        let _ = writeln!(s, "config.{line}");
    }
    s
}

/// Read communities in the original id space without a graph (the `eval`
/// stage never loads model or graph files).
pub fn load_raw_communities(path: impl AsRef<Path>) -> Result<Vec<Vec<u64>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ids: Vec<u64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse().map_err(|_| {
                    Error::data(format!(
                        "{}:{}: non-integer token {:?}",
                        path.display(),
                        lineno + 1,
                        tok
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if !ids.is_empty() {
            out.push(ids);
        }
    }
    if out.is_empty() {
        return Err(Error::data(format!(
            "{}: no communities found",
            path.display()
        )));
    }
    Ok(out)
}

/// Compact raw id communities from two files into a shared u32 space so
/// the bi-matching machinery applies. Scores only depend on set identity.
pub fn compact_communities(
    preds: &[Vec<u64>],
    truths: &[Vec<u64>],
) -> Result<(Vec<Community>, Vec<Community>)> {
    use std::collections::HashMap;
    let mut ids: Vec<u64> = preds
        .iter()
        .chain(truths.iter())
        .flatten()
        .copied()
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let index: HashMap<u64, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i as u32))
        .collect();
    let remap = |cs: &[Vec<u64>]| -> Result<Vec<Community>> {
        cs.iter()
            .map(|c| Community::new(c.iter().map(|id| index[id]).collect()))
            .collect()
    };
    Ok((remap(preds)?, remap(truths)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_determinism() {
        let items: Vec<u32> = (0..130).collect();
        let (prompts, heldout) = split_prompts(&items, 10, 42).unwrap();
        assert_eq!(prompts.len(), 10);
        assert_eq!(heldout.len(), 120);
        let (p2, h2) = split_prompts(&items, 10, 42).unwrap();
        assert_eq!(prompts, p2);
        assert_eq!(heldout, h2);
        let (p3, _) = split_prompts(&items, 10, 43).unwrap();
        assert_ne!(prompts, p3);
        // m = |truths| is rejected
        assert!(split_prompts(&items, 130, 1).is_err());
    }

    #[test]
    fn split_preserves_multiset() {
        let items: Vec<u32> = (0..25).collect();
        let (p, h) = split_prompts(&items, 7, 3).unwrap();
        let mut all: Vec<u32> = p.into_iter().chain(h).collect();
        all.sort_unstable();
        assert_eq!(all, items);
    }

    #[test]
    fn raw_communities_and_compaction() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("preds.txt");
        std::fs::write(&p, "100 200 300\n400 500\n").unwrap();
        let t = dir.path().join("truths.txt");
        std::fs::write(&t, "100 200 300\n999\n").unwrap();
        let preds = load_raw_communities(&p).unwrap();
        let truths = load_raw_communities(&t).unwrap();
        let (cp, ct) = compact_communities(&preds, &truths).unwrap();
        let m = evaluate(&cp, &ct).unwrap();
        // one exact match on each side, one miss: 0.5 * (0.5 + 0.5)
        assert_eq!(m.f1, 0.5);
        assert_eq!(cp.len(), 2);
        assert_eq!(ct.len(), 2);
    }

    #[test]
    fn reports_are_deterministic_text() {
        let m = Metrics {
            f1: 0.8123456,
            jaccard: 0.7,
        };
        let a = eval_report(&m, 10, 20, 7, "k = 2\n");
        let b = eval_report(&m, 10, 20, 7, "k = 2\n");
        assert_eq!(a, b);
        assert!(a.contains("f1 = 0.812346"));
        assert!(a.contains("config.k = 2"));
    }
}
