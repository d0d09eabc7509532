//! Dual-level context-aware pre-training.
//!
//! Each epoch samples a batch of nodes, encodes every node's k-ego net and
//! a corrupted copy, and minimizes an InfoNCE pair: node-to-context
//! proximity (a node against its own context embedding, with in-batch
//! negatives) plus `lambda` times context distinction (a context against
//! its corrupted view).
//!
//! Training is staged so batches parallelize without changing results:
//! (A) untaped context forwards on workers, (B) a single-threaded loss
//! tape over the collected embeddings, (C) per-context taped re-forwards
//! seeded with the loss cotangents on workers, (D) an in-order gradient
//! fold and one optimizer step. Reduction order is fixed, so outputs are
//! bitwise independent of worker count.

use crate::autodiff::{ops, Tape, ValueId};
use crate::encoder::{
    gcn_forward, gcn_forward_tape, register_params, EncoderGrads, EncoderParams, PoolMode,
};
use crate::error::{Error, Result};
use crate::graph::{corrupt_context, Graph};
use crate::optim::AdamState;
use crate::parallel;
use crate::rng::{domain, stream};
use crate::tensor::{real, Real, Tensor};
use std::sync::Arc;

/// Pre-training hyperparameters. Defaults follow the small-dataset recipe:
/// batch 256, 30 epochs, lr 1e-3, k = layers = 2, d = 128, tau 0.1,
/// rho 0.85, lambda 0.1.
#[derive(Debug, Clone)]
pub struct PretrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Optimizer steps per epoch; the literal loop does one batch per epoch.
    pub batches_per_epoch: usize,
    pub lr: f64,
    /// Context radius; also the encoder depth (the two are coupled).
    pub k: usize,
    pub dim: usize,
    pub tau: f64,
    pub rho: f64,
    pub lambda: f64,
    pub seed: u64,
    /// Per-hop neighbor cap for very dense hubs; off for acceptance runs.
    pub hop_cap: Option<usize>,
    pub pool_mode: PoolMode,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            batch_size: 256,
            epochs: 30,
            batches_per_epoch: 1,
            lr: 1e-3,
            k: 2,
            dim: 128,
            tau: 0.1,
            rho: 0.85,
            lambda: 0.1,
            seed: 0,
            hop_cap: None,
            pool_mode: PoolMode::Sum,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(Error::Usage("tau must be > 0".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Usage("lambda must be >= 0".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Usage("rho must be in (0, 1]".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Usage(
                "batch_size must be >= 2 for informative negatives".into(),
            ));
        }
        if self.k == 0 || self.dim == 0 || self.epochs == 0 || self.batches_per_epoch == 0 {
            return Err(Error::Usage("k, dim, epochs must be >= 1".into()));
        }
        Ok(())
    }

    /// Encoder layer widths: `[feat_dim, d, ..., d]` with `k` layers.
    pub fn encoder_dims(&self, feat_dim: usize) -> Vec<usize> {
        let mut dims = vec![feat_dim];
        dims.extend(std::iter::repeat_n(self.dim, self.k));
        dims
    }
}

/// Cosine similarity with a degenerate guard: 0 when either norm < 1e-12.
pub fn cosine_sim<F: Real>(a: &[F], b: &[F]) -> F {
    let mut dot = F::zero();
    let mut na = F::zero();
    let mut nb = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    let eps = real::<F>(1e-12);
    if na < eps || nb < eps {
        return F::zero();
    }
    dot / (na * nb)
}

/// Normalize a row vector on the tape; zero-norm rows become the constant
/// zero vector (matching the cosine guard).
fn normalize_row<F: Real>(tape: &mut Tape<F>, v: ValueId) -> Result<ValueId> {
    let n = tape.l2norm(v);
    if tape.item(n) < real::<F>(1e-12) {
        let shape = tape.value(v).shape().to_vec();
        return Ok(tape.constant(Tensor::zeros(shape)));
    }
    let ln = tape.log(n);
    let nln = tape.scale(ln, real::<F>(-1.0));
    let inv = tape.exp(nln);
    tape.mul(v, inv)
}

/// InfoNCE over a batch: `sum_v -log softmax_u(sim(q_v, k_u)/tau)[v]`.
/// The denominator ranges over the whole batch and includes the positive.
pub fn build_infonce<F: Real>(
    tape: &mut Tape<F>,
    queries: &[ValueId],
    keys: &[ValueId],
    tau: f64,
) -> Result<ValueId> {
    if queries.len() != keys.len() || queries.is_empty() {
        return Err(Error::Usage(format!(
            "infonce needs equal non-empty batches, got {} and {}",
            queries.len(),
            keys.len()
        )));
    }
    let inv_tau = real::<F>(1.0 / tau);
    let qn: Vec<ValueId> = queries
        .iter()
        .map(|&q| normalize_row(tape, q))
        .collect::<Result<_>>()?;
    let kn: Vec<ValueId> = keys
        .iter()
        .map(|&k| normalize_row(tape, k))
        .collect::<Result<_>>()?;
    let mut terms = Vec::with_capacity(qn.len());
    for v in 0..qn.len() {
        let mut sims = Vec::with_capacity(kn.len());
        for &key in &kn {
            let d = ops::dot(tape, qn[v], key)?;
            sims.push(tape.scale(d, inv_tau));
        }
        let lse = ops::logsumexp(tape, &sims)?;
        terms.push(ops::sub(tape, lse, sims[v])?);
    }
    let all = tape.concat(&terms, 0)?;
    Ok(tape.sum(all))
}

/// Node-to-context proximity loss over embedding batches (values only).
pub fn loss_n2c<F: Real>(z_nodes: &[Vec<F>], z_contexts: &[Vec<F>], tau: f64) -> Result<F> {
    infonce_value(z_nodes, z_contexts, tau)
}

/// Context-distinction loss between raw and corrupted context embeddings.
pub fn loss_c2c<F: Real>(z_contexts: &[Vec<F>], z_corrupted: &[Vec<F>], tau: f64) -> Result<F> {
    infonce_value(z_contexts, z_corrupted, tau)
}

fn infonce_value<F: Real>(queries: &[Vec<F>], keys: &[Vec<F>], tau: f64) -> Result<F> {
    let mut tape = Tape::new();
    let q: Vec<ValueId> = queries
        .iter()
        .map(|v| tape.constant(Tensor::row(v)))
        .collect();
    let k: Vec<ValueId> = keys.iter().map(|v| tape.constant(Tensor::row(v))).collect();
    let l = build_infonce(&mut tape, &q, &k, tau)?;
    Ok(tape.item(l))
}

/// `L_pretrain = L_n2c + lambda * L_c2c`.
pub fn combined_loss<F: Real>(l_n2c: F, l_c2c: F, lambda: f64) -> F {
    l_n2c + real::<F>(lambda) * l_c2c
}

/// Per-run statistics: average batch loss per epoch and total context edge
/// visits (the work measure that must track batch size, not graph size).
#[derive(Debug, Clone)]
pub struct PretrainStats {
    pub epoch_losses: Vec<f64>,
    pub edge_visits: u64,
    pub clamped_batch: bool,
}

struct ContextViews<F: Real> {
    node: u32,
    ctx: crate::graph::Context,
    corrupted: crate::graph::Context,
    center_vec: Vec<F>,
    pooled_raw: Vec<F>,
    pooled_cor: Vec<F>,
}

/// Stage A: plain (untaped) forwards of one node's raw and corrupted views.
fn forward_views<F: Real>(
    params: &EncoderParams<F>,
    graph: &Graph,
    v: u32,
    cfg: &PretrainConfig,
    step: u64,
) -> Result<ContextViews<F>> {
    let ctx = graph.ego_net(v, cfg.k, cfg.hop_cap)?;
    let mut rng = stream(cfg.seed, domain::CORRUPT, (step << 32) | v as u64);
    let corrupted = corrupt_context(&ctx, cfg.rho, &mut rng)?;
    let x = ctx.features_tensor::<F>(graph);
    let adj = ctx.normalized_adjacency::<F>();
    let cadj = corrupted.normalized_adjacency::<F>();
    let z_raw = gcn_forward(params, &x, &adj)?;
    let z_cor = gcn_forward(params, &x, &cadj)?;
    let local = ctx.local_index(v).expect("center in ball");
    let rows: Vec<usize> = (0..ctx.len()).collect();
    let pooled_raw = crate::encoder::pool(&z_raw, &rows, cfg.pool_mode)?;
    let pooled_cor = crate::encoder::pool(&z_cor, &rows, cfg.pool_mode)?;
    Ok(ContextViews {
        node: v,
        ctx,
        corrupted,
        center_vec: z_raw.row_slice(local).to_vec(),
        pooled_raw,
        pooled_cor,
    })
}

/// Stage B: loss tape over collected embeddings. Returns the loss value
/// and, per context, cotangents for (center, pooled raw, pooled corrupted).
#[allow(clippy::type_complexity)]
fn loss_over_views<F: Real>(
    views: &[ContextViews<F>],
    cfg: &PretrainConfig,
    with_grads: bool,
) -> Result<(F, Vec<(Vec<F>, Vec<F>, Vec<F>)>)> {
    let mut tape = Tape::new();
    let mk = |tape: &mut Tape<F>, v: &Vec<F>, traced: bool| {
        if traced {
            tape.leaf(Tensor::row(v))
        } else {
            tape.constant(Tensor::row(v))
        }
    };
    let zv: Vec<ValueId> = views
        .iter()
        .map(|w| mk(&mut tape, &w.center_vec, with_grads))
        .collect();
    let zn: Vec<ValueId> = views
        .iter()
        .map(|w| mk(&mut tape, &w.pooled_raw, with_grads))
        .collect();
    let zc: Vec<ValueId> = views
        .iter()
        .map(|w| mk(&mut tape, &w.pooled_cor, with_grads))
        .collect();
    let l1 = build_infonce(&mut tape, &zv, &zn, cfg.tau)?;
    let l2 = build_infonce(&mut tape, &zn, &zc, cfg.tau)?;
    let l2w = tape.scale(l2, real::<F>(cfg.lambda));
    let total = tape.add(l1, l2w)?;
    let loss = tape.item(total);
    if !with_grads {
        return Ok((loss, Vec::new()));
    }
    tape.backward(total)?;
    let d = views.first().map(|w| w.center_vec.len()).unwrap_or(0);
    let take = |tape: &Tape<F>, id: ValueId| -> Vec<F> {
        tape.grad(id).map(|g| g.to_vec()).unwrap_or_else(|| vec![F::zero(); d])
    };
    let cots = (0..views.len())
        .map(|i| (take(&tape, zv[i]), take(&tape, zn[i]), take(&tape, zc[i])))
        .collect();
    Ok((loss, cots))
}

/// Stage C: taped re-forward of one context, seeded with loss cotangents.
fn backprop_view<F: Real>(
    params: &EncoderParams<F>,
    graph: &Graph,
    view: &ContextViews<F>,
    cfg: &PretrainConfig,
    cot: &(Vec<F>, Vec<F>, Vec<F>),
) -> Result<EncoderGrads<F>> {
    let mut tape = Tape::new();
    let ids = register_params(&mut tape, params);
    let x = tape.constant(view.ctx.features_tensor::<F>(graph));
    let n = view.ctx.len();
    let adj = Arc::new(view.ctx.normalized_adjacency::<F>());
    let cadj = Arc::new(view.corrupted.normalized_adjacency::<F>());
    let z_raw = gcn_forward_tape(&mut tape, &ids, x, &adj)?;
    let z_cor = gcn_forward_tape(&mut tape, &ids, x, &cadj)?;

    let local = view.ctx.local_index(view.node).expect("center in ball");
    let mut e = vec![F::zero(); n];
    e[local] = F::one();
    let e = tape.constant(Tensor::matrix(1, n, e)?);
    let center = tape.matmul(e, z_raw)?;

    let w = match cfg.pool_mode {
        PoolMode::Sum => F::one(),
        PoolMode::Mean => real::<F>(1.0 / n as f64),
    };
    let ones = tape.constant(Tensor::matrix(1, n, vec![w; n])?);
    let pooled_raw = tape.matmul(ones, z_raw)?;
    let pooled_cor = tape.matmul(ones, z_cor)?;

    tape.backward_seeded(&[
        (center, cot.0.clone()),
        (pooled_raw, cot.1.clone()),
        (pooled_cor, cot.2.clone()),
    ])?;
    Ok(ids.grads(&tape, params))
}

/// Loss and parameter gradients for one batch (stages A-D minus the
/// optimizer step). Exposed so gradient checks exercise the same path.
pub fn batch_loss_and_grads<F: Real>(
    params: &EncoderParams<F>,
    graph: &Graph,
    batch: &[u32],
    cfg: &PretrainConfig,
    step: u64,
) -> Result<(F, EncoderGrads<F>, u64)> {
    let views: Vec<Result<ContextViews<F>>> =
        parallel::map_slice(batch, |&v| forward_views(params, graph, v, cfg, step));
    let views: Vec<ContextViews<F>> = views.into_iter().collect::<Result<_>>()?;
    let edge_visits: u64 = views
        .iter()
        .map(|w| (w.ctx.edge_count() + w.corrupted.edge_count()) as u64)
        .sum();

    let (loss, cots) = loss_over_views(&views, cfg, true)?;

    let per_item: Vec<Result<EncoderGrads<F>>> = parallel::map_range(views.len(), |i| {
        backprop_view(params, graph, &views[i], cfg, &cots[i])
    });
    let mut total = EncoderGrads::zeros_like(params);
    for g in per_item {
        total.add_assign(&g?);
    }
    Ok((loss, total, edge_visits))
}

/// Batch loss only (the finite-difference oracle path).
pub fn batch_loss<F: Real>(
    params: &EncoderParams<F>,
    graph: &Graph,
    batch: &[u32],
    cfg: &PretrainConfig,
    step: u64,
) -> Result<F> {
    let views: Vec<Result<ContextViews<F>>> =
        parallel::map_slice(batch, |&v| forward_views(params, graph, v, cfg, step));
    let views: Vec<ContextViews<F>> = views.into_iter().collect::<Result<_>>()?;
    Ok(loss_over_views(&views, cfg, false)?.0)
}

/// Run the pre-training loop and return the trained encoder.
/// Fully deterministic given the seed.
pub fn run_pretrain<F: Real>(
    graph: &Graph,
    cfg: &PretrainConfig,
) -> Result<(EncoderParams<F>, PretrainStats)> {
    cfg.validate()?;
    if graph.feat_dim() == 0 {
        return Err(Error::data(
            "graph has no features; augment or load a feature matrix first",
        ));
    }
    let n = graph.num_nodes();
    let mut batch_size = cfg.batch_size;
    let mut clamped = false;
    if batch_size > n {
        log::warn!("batch_size {} clamped to {} nodes", batch_size, n);
        batch_size = n;
        clamped = true;
    }

    let dims = cfg.encoder_dims(graph.feat_dim());
    let mut params = EncoderParams::<F>::glorot(&dims, stream_seed(cfg.seed))?;
    let mut adam = AdamState::<F>::new(cfg.lr, &params.param_lens());
    let mut stats = PretrainStats {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        edge_visits: 0,
        clamped_batch: clamped,
    };

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0f64;
        for b in 0..cfg.batches_per_epoch {
            let step = (epoch * cfg.batches_per_epoch + b) as u64;
            let mut rng = stream(cfg.seed, domain::BATCH, step);
            let batch: Vec<u32> = rand::seq::index::sample(&mut rng, n, batch_size)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            let (loss, grads, visits) = batch_loss_and_grads(&params, graph, &batch, cfg, step)?;
            let loss64 = loss.to_f64().unwrap();
            if !loss64.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite pre-training loss at epoch {epoch}"
                )));
            }
            epoch_loss += loss64;
            stats.edge_visits += visits;
            let mut slices = params.param_slices_mut();
            adam.step(&mut slices, &grads.as_slices())?;
        }
        stats
            .epoch_losses
            .push(epoch_loss / cfg.batches_per_epoch as f64);
    }
    Ok((params, stats))
}

fn stream_seed(master: u64) -> u64 {
    use rand::RngCore;
    stream(master, domain::ENCODER_INIT, 0).next_u64()
}
