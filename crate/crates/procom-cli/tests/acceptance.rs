//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (SKIP for dataset-gated runs when the files are absent).
//!
//! Run with:
//!   cargo test --release -p procom-cli --test acceptance -- --nocapture
//!
//! Dataset runs look for files under $PROCOM_DATA_DIR (default `data/`):
//!   amazon.edges / amazon.cmty, facebook.edges / facebook.cmty
//! in the edge-list and community-file formats described in the README.

use procom::config::RunConfig;
use procom::encoder::{encode_all, EncoderParams, PoolMode};
use procom::eval::{bimatch, gen_planted, score_f1, score_jaccard, BenchConfig, Delta};
use procom::graph::{Community, Graph};
use procom::inference::{community_embedding, generate_candidates, select_top_n};
use procom::pipeline::{run_synthetic_bench, run_trial, split_prompts};
use procom::pretrain::{
    batch_loss_and_grads, batch_loss, loss_c2c, loss_n2c, PretrainConfig,
};
use procom::prompt::{bce_loss_and_grads, PromptParams};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::time::Instant;

fn pass(n: usize, msg: &str) {
    println!("[PASS] criterion {n}: {msg}");
}

fn fail(n: usize, msg: &str) -> ! {
    println!("[FAIL] criterion {n}: {msg}");
    panic!("criterion {n} failed: {msg}");
}

fn data_dir() -> PathBuf {
    std::env::var("PROCOM_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|_| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
        })
}

fn find_dataset(names: &[(&str, &str)]) -> Option<(PathBuf, PathBuf)> {
    let dir = data_dir();
    for (edges, cmty) in names {
        let (e, c) = (dir.join(edges), dir.join(cmty));
        if e.exists() && c.exists() {
            return Some((e, c));
        }
    }
    None
}

fn dataset_trials(
    edges: &PathBuf,
    cmty: &PathBuf,
    n_pred: usize,
    k: usize,
    seeds: &[u64],
) -> (f64, f64) {
    let graph = Graph::load_edge_list(edges).unwrap().augment_features();
    let truths = graph.load_communities(cmty).unwrap();
    let mut f1 = 0.0;
    let mut jac = 0.0;
    for &seed in seeds {
        let cfg = RunConfig {
            seed,
            k,
            num_pred: Some(n_pred),
            ..Default::default()
        };
        let out = run_trial(&graph, &truths, &cfg).unwrap();
        println!(
            "  seed {seed}: f1 {:.4} jaccard {:.4} ({} preds vs {} held-out)",
            out.metrics.f1, out.metrics.jaccard, out.n_pred, out.m_heldout
        );
        f1 += out.metrics.f1;
        jac += out.metrics.jaccard;
    }
    (f1 / seeds.len() as f64, jac / seeds.len() as f64)
}

/// Criterion 1: Amazon reproduction (requires the SNAP-derived files).
#[test]
fn criterion_01_amazon_reproduction() {
    let Some((edges, cmty)) = find_dataset(&[
        ("amazon.edges", "amazon.cmty"),
        ("com-amazon.ungraph.txt", "com-amazon.top5000.cmty.txt"),
        ("amazon-1.90.ungraph.txt", "amazon-1.90.cmty.txt"),
    ]) else {
        println!(
            "[SKIP] criterion 1: Amazon dataset not found under {} (set PROCOM_DATA_DIR)",
            data_dir().display()
        );
        return;
    };
    let started = Instant::now();
    let (f1, jac) = dataset_trials(&edges, &cmty, 5000, 2, &[1, 2, 3]);
    let mins = started.elapsed().as_secs_f64() / 60.0;
    if f1 >= 0.80 && jac >= 0.70 && mins <= 15.0 {
        pass(1, &format!("amazon mean f1 {f1:.4}, jaccard {jac:.4}, {mins:.1} min"));
    } else {
        fail(1, &format!("amazon mean f1 {f1:.4} (need >= 0.80), jaccard {jac:.4} (need >= 0.70), {mins:.1} min (need <= 15)"));
    }
}

/// Criterion 2: Facebook reproduction with structural features.
#[test]
fn criterion_02_facebook_reproduction() {
    let Some((edges, cmty)) = find_dataset(&[
        ("facebook.edges", "facebook.cmty"),
        ("facebook-1.90.ungraph.txt", "facebook-1.90.cmty.txt"),
    ]) else {
        println!(
            "[SKIP] criterion 2: Facebook dataset not found under {} (set PROCOM_DATA_DIR)",
            data_dir().display()
        );
        return;
    };
    let (f1, _) = dataset_trials(&edges, &cmty, 200, 1, &[1, 2, 3]);
    if f1 >= 0.33 {
        pass(2, &format!("facebook mean f1 {f1:.4}"));
    } else {
        fail(2, &format!("facebook mean f1 {f1:.4} (need >= 0.33)"));
    }
}

fn random_toy_batch(
    rng: &mut ChaCha8Rng,
) -> (Graph, Vec<u32>, PretrainConfig) {
    let bcfg = BenchConfig {
        background_nodes: rng.random_range(30..60),
        background_p: 0.05,
        num_targeted: 2,
        num_distractors: 2,
        targeted_size: (3, 5),
        distractor_size: (3, 5),
        feature_contrast: false,
        seed: rng.random(),
        ..Default::default()
    };
    let (graph, _, _) = gen_planted(&bcfg).unwrap();
    let graph = graph.augment_features();
    let k = rng.random_range(1..3);
    let cfg = PretrainConfig {
        batch_size: 2,
        epochs: 1,
        k,
        dim: rng.random_range(3..7),
        tau: 0.1,
        rho: 0.85,
        lambda: 0.1,
        seed: rng.random(),
        ..Default::default()
    };
    let n = graph.num_nodes();
    let b = rng.random_range(2..6);
    let batch: Vec<u32> = rand::seq::index::sample(rng, n, b)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    (graph, batch, cfg)
}

/// Criterion 3: sum- vs mean-pooling leave losses and gradients unchanged.
#[test]
fn criterion_03_pooling_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x300);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (graph, batch, mut cfg) = random_toy_batch(&mut rng);
        let params = EncoderParams::<f64>::glorot(
            &cfg.encoder_dims(graph.feat_dim()),
            rng.random(),
        )
        .unwrap();
        cfg.pool_mode = PoolMode::Sum;
        let (l_sum, g_sum, _) =
            batch_loss_and_grads(&params, &graph, &batch, &cfg, 0).unwrap();
        cfg.pool_mode = PoolMode::Mean;
        let (l_mean, g_mean, _) =
            batch_loss_and_grads(&params, &graph, &batch, &cfg, 0).unwrap();

        let tol = 1e-6 * l_sum.abs().max(1.0);
        let dl = (l_sum - l_mean).abs();
        if dl > tol {
            fail(3, &format!("loss changed by {dl:.2e} (tol {tol:.2e})"));
        }
        worst = worst.max(dl / tol.max(1e-300));
        for (a, b) in g_sum.flatten().iter().zip(g_mean.flatten().iter()) {
            let gtol = 1e-6 * a.abs().max(1.0);
            if (a - b).abs() > gtol {
                fail(3, &format!("gradient changed by {:.2e}", (a - b).abs()));
            }
        }
    }
    pass(3, "sum/mean pooling identical within 1e-6 over 50 random batches (losses and gradients)");
}

/// Criterion 4: analytic gradients match central finite differences.
#[test]
fn criterion_04_gradient_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x400);
    let mut worst = 0.0f64;

    // (a) L_n2c and (b) L_c2c w.r.t. their embedding inputs
    for loss_kind in 0..2 {
        for _ in 0..20 {
            let b = rng.random_range(2..5);
            let d = rng.random_range(3..6);
            let flat: Vec<f64> = (0..2 * b * d)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let tau = 0.1;
            let eval = |p: &[f64]| -> f64 {
                let q: Vec<Vec<f64>> = p[..b * d].chunks(d).map(|c| c.to_vec()).collect();
                let k: Vec<Vec<f64>> = p[b * d..].chunks(d).map(|c| c.to_vec()).collect();
                if loss_kind == 0 {
                    loss_n2c(&q, &k, tau).unwrap()
                } else {
                    loss_c2c(&q, &k, tau).unwrap()
                }
            };
            // analytic gradient through the shared tape builder
            let mut tape = procom::autodiff::Tape::new();
            let ids: Vec<_> = flat
                .chunks(d)
                .map(|c| tape.leaf(procom::tensor::Tensor::row(c)))
                .collect();
            let (q_ids, k_ids) = ids.split_at(b);
            let l = procom::pretrain::build_infonce(&mut tape, q_ids, k_ids, tau).unwrap();
            tape.backward(l).unwrap();
            let analytic: Vec<f64> = ids
                .iter()
                .flat_map(|&id| {
                    tape.grad(id)
                        .map(|g| g.to_vec())
                        .unwrap_or_else(|| vec![0.0; d])
                })
                .collect();
            let err = procom::autodiff::grad_check(eval, &flat, &analytic, 1e-6);
            worst = worst.max(err);
            if err > 1e-4 {
                fail(4, &format!("infonce loss {loss_kind}: fd error {err:.2e}"));
            }
        }
    }

    // (c) L_pretrain w.r.t. encoder parameters through the staged pipeline.
    // Biases are jittered off zero: with all-zero features (isolated
    // nodes) a zero-bias encoder emits exactly-zero embeddings, which sit
    // on the guarded branch of the cosine where the loss is by design
    // discontinuous and finite differences are meaningless.
    for _ in 0..20 {
        let (graph, batch, cfg) = random_toy_batch(&mut rng);
        let mut params = EncoderParams::<f64>::glorot(
            &cfg.encoder_dims(graph.feat_dim()),
            rng.random(),
        )
        .unwrap();
        for slice in params.param_slices_mut() {
            for v in slice {
                *v += rng.random_range(-0.05..0.05);
            }
        }
        let (_, grads, _) = batch_loss_and_grads(&params, &graph, &batch, &cfg, 0).unwrap();
        let analytic = grads.flatten();
        let flat: Vec<f64> = params.param_slices().iter().flat_map(|s| s.iter().copied()).collect();
        let lens = params.param_lens();
        let rebuild = |p: &[f64]| -> EncoderParams<f64> {
            let mut out = params.clone();
            let mut off = 0;
            for (slot, slice) in out.param_slices_mut().into_iter().enumerate() {
                slice.copy_from_slice(&p[off..off + lens[slot]]);
                off += lens[slot];
            }
            out
        };
        let err = procom::autodiff::grad_check(
            |p| batch_loss(&rebuild(p), &graph, &batch, &cfg, 0).unwrap(),
            &flat,
            &analytic,
            1e-6,
        );
        worst = worst.max(err);
        if err > 1e-4 {
            fail(4, &format!("pretrain loss: fd error {err:.2e}"));
        }
    }

    // (d) prompt BCE w.r.t. the MLP parameters
    for _ in 0..20 {
        let (graph, _, cfg) = random_toy_batch(&mut rng);
        let params = EncoderParams::<f64>::glorot(
            &cfg.encoder_dims(graph.feat_dim()),
            rng.random(),
        )
        .unwrap();
        let z = encode_all(&params, &graph).unwrap();
        let anchor = rng.random_range(0..graph.num_nodes()) as u32;
        let ctx = graph.ego_net(anchor, cfg.k, None).unwrap();
        let mut members: Vec<u32> = ctx
            .nodes
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.5))
            .collect();
        members.push(anchor);
        let truth = Community::new(members).unwrap();
        let phi = PromptParams::<f64>::glorot(z.dim(), 4, 0.1, rng.random()).unwrap();
        let (_, grads) = bce_loss_and_grads(&phi, &z, anchor, &ctx, &truth, true).unwrap();
        let analytic = grads.flatten();
        let flat: Vec<f64> = [
            phi.w1.data(),
            phi.b1.as_slice(),
            phi.w2.data(),
            phi.b2.as_slice(),
        ]
        .concat();
        let rebuild = |p: &[f64]| -> PromptParams<f64> {
            let mut out = phi.clone();
            let mut off = 0;
            for slice in out.param_slices_mut() {
                let l = slice.len();
                slice.copy_from_slice(&p[off..off + l]);
                off += l;
            }
            out
        };
        let err = procom::autodiff::grad_check(
            |p| {
                bce_loss_and_grads(&rebuild(p), &z, anchor, &ctx, &truth, false)
                    .unwrap()
                    .0
            },
            &flat,
            &analytic,
            1e-6,
        );
        worst = worst.max(err);
        if err > 1e-4 {
            fail(4, &format!("prompt BCE: fd error {err:.2e}"));
        }
    }
    pass(4, &format!("gradients match finite differences (worst rel err {worst:.2e} <= 1e-4)"));
}

/// Criterion 5: batch of one yields exactly zero InfoNCE loss.
#[test]
fn criterion_05_infonce_degenerate_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x500);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = rng.random_range(2..8);
        let q = vec![(0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>()];
        let k = vec![(0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>()];
        let l1 = loss_n2c(&q, &q, 0.1).unwrap().abs();
        let l2 = loss_c2c(&q, &k, 0.25).unwrap().abs();
        worst = worst.max(l1).max(l2);
    }
    if worst <= 1e-9 {
        pass(5, &format!("batch-of-one loss magnitude {worst:.1e} <= 1e-9"));
    } else {
        fail(5, &format!("batch-of-one loss magnitude {worst:.1e} > 1e-9"));
    }
}

/// Criterion 6: bimatch equals an independently coded naive double loop.
#[test]
fn criterion_06_metric_oracle() {
    // naive oracle, written independently of the library implementation
    fn oracle(preds: &[Community], truths: &[Community], use_f1: bool) -> f64 {
        let delta = |a: &Community, b: &Community| -> f64 {
            let mut inter = 0usize;
            for u in a.members() {
                if b.members().contains(u) {
                    inter += 1;
                }
            }
            if inter == 0 {
                return 0.0;
            }
            if use_f1 {
                let p = inter as f64 / a.len() as f64;
                let r = inter as f64 / b.len() as f64;
                2.0 * p * r / (p + r)
            } else {
                inter as f64 / (a.len() + b.len() - inter) as f64
            }
        };
        let mut pred_side = 0.0;
        for p in preds {
            let mut best = f64::NEG_INFINITY;
            for t in truths {
                best = best.max(delta(p, t));
            }
            pred_side += best;
        }
        let mut truth_side = 0.0;
        for t in truths {
            let mut best = f64::NEG_INFINITY;
            for p in preds {
                best = best.max(delta(p, t));
            }
            truth_side += best;
        }
        0.5 * (pred_side / preds.len() as f64 + truth_side / truths.len() as f64)
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x600);
    for case in 0..100 {
        let mk = |rng: &mut ChaCha8Rng| -> Vec<Community> {
            (0..rng.random_range(1..8))
                .map(|_| {
                    Community::new(
                        (0..rng.random_range(1..7))
                            .map(|_| rng.random_range(0..25))
                            .collect(),
                    )
                    .unwrap()
                })
                .collect()
        };
        let preds = mk(&mut rng);
        let truths = mk(&mut rng);
        let f = bimatch(&preds, &truths, Delta::F1).unwrap();
        let j = bimatch(&preds, &truths, Delta::Jaccard).unwrap();
        if f != oracle(&preds, &truths, true) || j != oracle(&preds, &truths, false) {
            fail(6, &format!("case {case}: bimatch differs from the naive oracle"));
        }
        // spot-check the pairwise scores too
        let a = &preds[0];
        let b = &truths[0];
        assert_eq!(score_f1(a, b), oracle(std::slice::from_ref(a), std::slice::from_ref(b), true));
        assert_eq!(score_jaccard(a, b), oracle(std::slice::from_ref(a), std::slice::from_ref(b), false));
    }
    pass(6, "bimatch equals the naive double-loop oracle exactly on 100 random instances");
}

fn bench_run_config(seed: u64, m: usize) -> RunConfig {
    // The benchmark preset: k = 1 contexts (search set {1, 2}), alpha 0.3
    // (search set {0.1, 0.2, 0.3}), and a longer prompt-tuning schedule;
    // one anchor per prompt per epoch yields only one optimizer step per
    // epoch, so 300 epochs at lr 0.01 gives the MLP enough steps.
    RunConfig {
        seed,
        m,
        k: 1,
        alpha: 0.3,
        prompt_epochs: 300,
        prompt_lr: 0.01,
        ..Default::default()
    }
}

/// Criterion 7: the synthetic targeted benchmark beats the no-prompt
/// baseline by at least 10 F1 points and exceeds 0.60 absolute.
#[test]
fn criterion_07_synthetic_benchmark() {
    for seed in [1u64, 2, 3] {
        let bcfg = BenchConfig {
            seed,
            ..Default::default()
        };
        let rcfg = bench_run_config(seed, 10);
        let started = Instant::now();
        let out = run_synthetic_bench(&bcfg, &rcfg).unwrap();
        let secs = started.elapsed().as_secs_f64();
        println!(
            "  seed {seed}: f1 {:.4} vs baseline {:.4} ({} nodes, {:.1}s)",
            out.procom.f1, out.baseline.f1, out.nodes, secs
        );
        if out.procom.f1 <= 0.60 {
            fail(7, &format!("seed {seed}: f1 {:.4} <= 0.60", out.procom.f1));
        }
        if out.procom.f1 - out.baseline.f1 < 0.10 {
            fail(
                7,
                &format!(
                    "seed {seed}: margin {:.4} < 0.10 over the raw-ego-net baseline",
                    out.procom.f1 - out.baseline.f1
                ),
            );
        }
        if secs > 120.0 {
            fail(7, &format!("seed {seed}: runtime {secs:.0}s > 2 min"));
        }
    }
    pass(7, "synthetic benchmark exceeds 0.60 F1 and the baseline by >= 10 points on all seeds");
}

/// Criterion 8: candidate generation + matching scale linearly in nodes.
#[test]
fn criterion_08_linear_scaling() {
    let mut points = Vec::new();
    for bg in [10_000usize, 20_000, 40_000] {
        let bcfg = BenchConfig {
            background_nodes: bg,
            background_p: 6.0 / bg as f64,
            num_targeted: bg / 200,
            num_distractors: bg / 200,
            seed: 5,
            ..Default::default()
        };
        let (graph, targeted, _) = gen_planted(&bcfg).unwrap();
        let dims = [graph.feat_dim(), 64];
        let params = EncoderParams::<f32>::glorot(&dims, 5).unwrap();
        let z = encode_all(&params, &graph).unwrap();
        let phi = PromptParams::<f32>::glorot(64, 64, 0.0, 6).unwrap();
        let (prompts, heldout) = split_prompts(&targeted, 10, 5).unwrap();
        let prompt_embs: Vec<Vec<f32>> = prompts
            .iter()
            .map(|c| community_embedding(&z, c).unwrap())
            .collect();
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t = Instant::now();
            let cands = generate_candidates(&graph, &z, &phi, 0.0, 1, None).unwrap();
            let preds = select_top_n(&prompt_embs, &prompts, &cands, heldout.len()).unwrap();
            assert!(!preds.is_empty());
            best = best.min(t.elapsed().as_secs_f64());
        }
        println!("  n = {}: {:.3}s", graph.num_nodes(), best);
        points.push((graph.num_nodes() as f64, best));
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let b = (sy - a * sx) / n;
    let mean = sy / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - (a * p.0 + b)).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    if r2 >= 0.95 {
        pass(8, &format!("candidate generation + matching linear fit R^2 = {r2:.4} >= 0.95"));
    } else {
        fail(8, &format!("linear fit R^2 = {r2:.4} < 0.95 over {points:?}"));
    }
}

/// Criterion 9: every subcommand is byte-identical across reruns.
#[test]
fn criterion_09_subcommand_determinism() {
    let bin = env!("CARGO_BIN_EXE_procom");
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();
    let args = |list: &[&str]| -> Vec<String> { list.iter().map(|s| s.to_string()).collect() };

    let run = |args: &[String]| -> Vec<u8> {
        let out = std::process::Command::new(bin)
            .args(args)
            .env("RUST_LOG", "error")
            .output()
            .expect("spawn procom");
        if !out.status.success() {
            fail(
                9,
                &format!(
                    "subcommand {args:?} failed: {}",
                    String::from_utf8_lossy(&out.stderr)
                ),
            );
        }
        out.stdout
    };
    let reruns_match = |name: &str, args: &[String], files: &[&str]| {
        let out1 = run(args);
        let snap1: Vec<Vec<u8>> =
            files.iter().map(|f| std::fs::read(path(f)).unwrap()).collect();
        let out2 = run(args);
        let snap2: Vec<Vec<u8>> =
            files.iter().map(|f| std::fs::read(path(f)).unwrap()).collect();
        if out1 != out2 || snap1 != snap2 {
            fail(9, &format!("{name} reruns produce different outputs"));
        }
    };

    let small = args(&[
        "--seed", "9", "--k", "1", "--dim", "12", "--epochs", "4", "--batch-size", "16",
        "--prompt-epochs", "6",
    ]);

    let mut gen = args(&["gen-synthetic", "--out"]);
    gen.push(path("syn"));
    gen.extend(args(&[
        "--nodes", "220", "--targeted", "8", "--distractors", "4", "--seed", "9",
    ]));
    reruns_match(
        "gen-synthetic",
        &gen,
        &["syn.edges", "syn.targeted.cmty", "syn.distractors.cmty"],
    );

    let mut pretrain = args(&["pretrain", "--edges"]);
    pretrain.push(path("syn.edges"));
    pretrain.push("--checkpoint".into());
    pretrain.push(path("enc.ckpt"));
    pretrain.extend(small.clone());
    reruns_match("pretrain", &pretrain, &["enc.ckpt"]);

    let mut tune = args(&["prompt-tune", "--edges"]);
    tune.push(path("syn.edges"));
    tune.push("--communities".into());
    tune.push(path("syn.targeted.cmty"));
    tune.push("--checkpoint".into());
    tune.push(path("enc.ckpt"));
    tune.push("--out".into());
    tune.push(path("tuned.ckpt"));
    tune.extend(args(&["--m", "4"]));
    tune.extend(small.clone());
    reruns_match("prompt-tune", &tune, &["tuned.ckpt"]);

    let mut predict = args(&["predict", "--edges"]);
    predict.push(path("syn.edges"));
    predict.push("--communities".into());
    predict.push(path("syn.targeted.cmty"));
    predict.push("--checkpoint".into());
    predict.push(path("tuned.ckpt"));
    predict.push("--out".into());
    predict.push(path("preds.txt"));
    predict.push("--report".into());
    predict.push(path("preds.report"));
    predict.extend(args(&["--m", "4", "--num-pred", "4"]));
    predict.extend(small.clone());
    reruns_match("predict", &predict, &["preds.txt", "preds.report"]);

    let mut eval = args(&["eval", "--pred"]);
    eval.push(path("preds.txt"));
    eval.push("--communities".into());
    eval.push(path("syn.targeted.cmty"));
    eval.push("--out".into());
    eval.push(path("eval.report"));
    eval.extend(args(&["--m", "4", "--seed", "9"]));
    reruns_match("eval", &eval, &["eval.report"]);

    let mut bench = args(&["bench", "--out"]);
    bench.push(path("bench.report"));
    bench.extend(args(&[
        "--nodes", "220", "--targeted", "8", "--distractors", "4", "--m", "4",
    ]));
    bench.extend(small.clone());
    reruns_match("bench", &bench, &["bench.report"]);

    pass(9, "all six subcommands produce byte-identical outputs across reruns");
}

/// Criterion 10: F1 at m = 5 is within 10 points of F1 at m = 50.
#[test]
fn criterion_10_prompt_count_robustness() {
    for seed in [1u64, 2, 3] {
        let bcfg = BenchConfig {
            num_targeted: 500,
            seed,
            ..Default::default()
        };
        let mut scores = Vec::new();
        for m in [5usize, 50] {
            let rcfg = bench_run_config(seed, m);
            let out = run_synthetic_bench(&bcfg, &rcfg).unwrap();
            scores.push(out.procom.f1);
        }
        let gap = (scores[0] - scores[1]).abs();
        println!(
            "  seed {seed}: f1(m=5) {:.4}, f1(m=50) {:.4}, gap {gap:.4}",
            scores[0], scores[1]
        );
        if gap > 0.10 {
            fail(10, &format!("seed {seed}: gap {gap:.4} > 0.10"));
        }
    }
    pass(10, "F1 at m=5 within 10 points of F1 at m=50 on all seeds");
}
