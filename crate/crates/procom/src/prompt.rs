//! Prompting function: a two-layer MLP that scores how strongly a context
//! member belongs with the context center, plus its few-shot tuning loop.
//!
//! The MLP maps the concatenation `z(u) || z(v)` through a hidden ReLU
//! layer to a sigmoid score. Members scoring at least `alpha` form the
//! distilled community. Tuning uses binary cross-entropy against the
//! prompt communities while the encoder stays frozen; only the embedding
//! matrix is consumed here, never encoder parameters.

use crate::autodiff::{ops, Tape, ValueId};
use crate::encoder::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{Community, Context, Graph};
use crate::optim::AdamState;
use crate::parallel;
use crate::rng::{domain, stream};
use crate::tensor::{matmul, real, Real, Tensor};
use rand::prelude::*;

const PROB_CLAMP: f64 = 1e-7;

/// MLP weights for layers `2d -> h -> 1` and the distillation threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptParams<F> {
    pub w1: Tensor<F>,
    pub b1: Vec<F>,
    pub w2: Tensor<F>,
    pub b2: Vec<F>,
    pub alpha: f64,
}

impl<F: Real> PromptParams<F> {
    pub fn glorot(embed_dim: usize, hidden: usize, alpha: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Usage(format!("alpha must be in [0, 1], got {alpha}")));
        }
        let mut rng = stream(seed, domain::PROMPT_INIT, 0);
        let mut init = |fan_in: usize, fan_out: usize| -> Tensor<F> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| real(rng.random_range(-limit..limit)))
                .collect();
            Tensor::matrix(fan_in, fan_out, data).expect("init shape")
        };
        Ok(PromptParams {
            w1: init(2 * embed_dim, hidden),
            b1: vec![F::zero(); hidden],
            w2: init(hidden, 1),
            b2: vec![F::zero(); 1],
            alpha,
        })
    }

    /// All-zero weights (scores 0.5 everywhere); handy in tests.
    pub fn zeros(embed_dim: usize, hidden: usize, alpha: f64) -> Self {
        PromptParams {
            w1: Tensor::zeros(vec![2 * embed_dim, hidden]),
            b1: vec![F::zero(); hidden],
            w2: Tensor::zeros(vec![hidden, 1]),
            b2: vec![F::zero(); 1],
            alpha,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn param_lens(&self) -> Vec<usize> {
        vec![self.w1.numel(), self.b1.len(), self.w2.numel(), self.b2.len()]
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [F]> {
        vec![
            self.w1.data_mut(),
            self.b1.as_mut_slice(),
            self.w2.data_mut(),
            self.b2.as_mut_slice(),
        ]
    }

    pub fn cast<G: Real>(&self) -> PromptParams<G> {
        PromptParams {
            w1: self.w1.cast(),
            b1: self.b1.iter().map(|&x| real(x.to_f64().unwrap())).collect(),
            w2: self.w2.cast(),
            b2: self.b2.iter().map(|&x| real(x.to_f64().unwrap())).collect(),
            alpha: self.alpha,
        }
    }
}

/// Gradients in `param_lens` order: w1, b1, w2, b2.
#[derive(Debug, Clone)]
pub struct PromptGrads<F> {
    pub arrays: Vec<Vec<F>>,
}

impl<F: Real> PromptGrads<F> {
    fn zeros_like(phi: &PromptParams<F>) -> Self {
        PromptGrads {
            arrays: phi.param_lens().iter().map(|&l| vec![F::zero(); l]).collect(),
        }
    }

    fn add_assign(&mut self, other: &PromptGrads<F>) {
        for (a, b) in self.arrays.iter_mut().zip(&other.arrays) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn as_slices(&self) -> Vec<&[F]> {
        self.arrays.iter().map(|a| a.as_slice()).collect()
    }

    pub fn flatten(&self) -> Vec<F> {
        self.arrays.iter().flatten().copied().collect()
    }
}

/// Raw MLP logits for a stack of `z(u) || z(v)` rows (no sigmoid).
fn mlp_logits<F: Real>(phi: &PromptParams<F>, pairs: &Tensor<F>) -> Result<Vec<F>> {
    if pairs.cols() != phi.in_dim() {
        return Err(Error::shape(
            "prompt_score",
            format!("pair width {} vs MLP input {}", pairs.cols(), phi.in_dim()),
        ));
    }
    let n = pairs.rows();
    let h = phi.hidden();
    let mut hid = vec![F::zero(); n * h];
    matmul(pairs.data(), n, phi.in_dim(), phi.w1.data(), h, &mut hid);
    for r in 0..n {
        for c in 0..h {
            let v = hid[r * h + c] + phi.b1[c];
            hid[r * h + c] = if v < F::zero() { F::zero() } else { v };
        }
    }
    let mut out = vec![F::zero(); n];
    matmul(&hid, n, h, phi.w2.data(), 1, &mut out);
    for o in out.iter_mut() {
        *o = *o + phi.b2[0];
    }
    Ok(out)
}

fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Membership probability for one `(u, v)` pair: `sigma(MLP(z_u || z_v))`.
pub fn prompt_score<F: Real>(phi: &PromptParams<F>, z_u: &[F], z_v: &[F]) -> Result<F> {
    let mut row = Vec::with_capacity(z_u.len() + z_v.len());
    row.extend_from_slice(z_u);
    row.extend_from_slice(z_v);
    let logits = mlp_logits(phi, &Tensor::row(&row))?;
    Ok(sigmoid(logits[0]))
}

/// Scores for every context node against the center, in `ctx.nodes` order.
pub fn score_context<F: Real>(
    phi: &PromptParams<F>,
    z: &EmbeddingMatrix<F>,
    ctx: &Context,
) -> Result<Vec<F>> {
    let d = z.dim();
    let center = z.row(ctx.center);
    let mut pairs = Vec::with_capacity(ctx.len() * 2 * d);
    for &u in &ctx.nodes {
        pairs.extend_from_slice(z.row(u));
        pairs.extend_from_slice(center);
    }
    let logits = mlp_logits(phi, &Tensor::matrix(ctx.len(), 2 * d, pairs)?)?;
    Ok(logits.into_iter().map(sigmoid).collect())
}

/// Members of `ctx` whose score reaches `alpha`; the center gets no special
/// treatment. `None` signals an empty distillation.
pub fn distill_community<F: Real>(
    phi: &PromptParams<F>,
    z: &EmbeddingMatrix<F>,
    ctx: &Context,
    alpha: f64,
) -> Result<Option<Community>> {
    let scores = score_context(phi, z, ctx)?;
    let thr = real::<F>(alpha);
    let members: Vec<u32> = ctx
        .nodes
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s >= thr)
        .map(|(&u, _)| u)
        .collect();
    if members.is_empty() {
        Ok(None)
    } else {
        Ok(Some(Community::new(members)?))
    }
}

struct PromptParamIds {
    w1: ValueId,
    b1: ValueId,
    w2: ValueId,
    b2: ValueId,
}

fn register_phi<F: Real>(tape: &mut Tape<F>, phi: &PromptParams<F>) -> PromptParamIds {
    PromptParamIds {
        w1: tape.leaf(phi.w1.clone()),
        b1: tape.leaf(Tensor::new(vec![phi.b1.len()], phi.b1.clone()).unwrap()),
        w2: tape.leaf(phi.w2.clone()),
        b2: tape.leaf(Tensor::new(vec![phi.b2.len()], phi.b2.clone()).unwrap()),
    }
}

/// Mean binary cross-entropy over the context on a tape. `labels` follow
/// `ctx.nodes` order; probabilities are clamped to `[1e-7, 1 - 1e-7]`.
fn build_bce<F: Real>(
    tape: &mut Tape<F>,
    ids: &PromptParamIds,
    pairs: Tensor<F>,
    labels: &[F],
) -> Result<ValueId> {
    let n = pairs.rows();
    let x = tape.constant(pairs);
    let xw = tape.matmul(x, ids.w1)?;
    let h = tape.add(xw, ids.b1)?;
    let h = tape.relu(h);
    let hw = tape.matmul(h, ids.w2)?;
    let logits = tape.add(hw, ids.b2)?;
    let p = tape.sigmoid(logits);
    let p = ops::clamp(tape, p, PROB_CLAMP, 1.0 - PROB_CLAMP)?;

    let y = tape.constant(Tensor::matrix(n, 1, labels.to_vec())?);
    let ones = tape.constant(Tensor::filled(vec![n, 1], F::one()));
    let log_p = tape.log(p);
    let pos = tape.mul(y, log_p)?;
    let not_y = ops::sub(tape, ones, y)?;
    let not_p = ops::sub(tape, ones, p)?;
    let log_np = tape.log(not_p);
    let neg = tape.mul(not_y, log_np)?;
    let term = tape.add(pos, neg)?;
    let total = tape.sum(term);
    Ok(tape.scale(total, real::<F>(-1.0 / n as f64)))
}

fn context_pairs<F: Real>(z: &EmbeddingMatrix<F>, ctx: &Context, anchor: u32) -> Tensor<F> {
    let d = z.dim();
    let za = z.row(anchor);
    let mut pairs = Vec::with_capacity(ctx.len() * 2 * d);
    for &u in &ctx.nodes {
        pairs.extend_from_slice(z.row(u));
        pairs.extend_from_slice(za);
    }
    Tensor::matrix(ctx.len(), 2 * d, pairs).expect("pair rows")
}

/// Mean BCE of the context against the truth community, with the anchor as
/// the center. Errors if the anchor is not a truth member.
pub fn prompt_bce_loss<F: Real>(
    phi: &PromptParams<F>,
    z: &EmbeddingMatrix<F>,
    anchor: u32,
    ctx: &Context,
    truth: &Community,
) -> Result<F> {
    let (loss, _) = bce_loss_and_grads(phi, z, anchor, ctx, truth, false)?;
    Ok(loss)
}

/// Loss plus gradients w.r.t. the MLP parameters for one anchor context.
pub fn bce_loss_and_grads<F: Real>(
    phi: &PromptParams<F>,
    z: &EmbeddingMatrix<F>,
    anchor: u32,
    ctx: &Context,
    truth: &Community,
    with_grads: bool,
) -> Result<(F, PromptGrads<F>)> {
    if !truth.contains(anchor) {
        return Err(Error::data(format!(
            "anchor {anchor} is not a member of its prompt community"
        )));
    }
    let labels: Vec<F> = ctx
        .nodes
        .iter()
        .map(|&u| if truth.contains(u) { F::one() } else { F::zero() })
        .collect();
    let mut tape = Tape::new();
    let ids = register_phi(&mut tape, phi);
    let loss_id = build_bce(&mut tape, &ids, context_pairs(z, ctx, anchor), &labels)?;
    let loss = tape.item(loss_id);
    let mut grads = PromptGrads::zeros_like(phi);
    if with_grads {
        tape.backward(loss_id)?;
        for (slot, id) in [ids.w1, ids.b1, ids.w2, ids.b2].iter().enumerate() {
            if let Some(g) = tape.grad(*id) {
                grads.arrays[slot].copy_from_slice(g);
            }
        }
    }
    Ok((loss, grads))
}

/// Few-shot tuning hyperparameters (30 epochs, lr 1e-3, hidden 128,
/// alpha 0.1 by default; `k` mirrors the encoder's context radius).
#[derive(Debug, Clone)]
pub struct PromptConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
    pub hop_cap: Option<usize>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            epochs: 30,
            lr: 1e-3,
            hidden: 128,
            alpha: 0.1,
            k: 2,
            seed: 0,
            hop_cap: None,
        }
    }
}

/// Tuning statistics; `supervision_count` tallies every labeled node
/// decision consumed (sum of context sizes across all anchors).
#[derive(Debug, Clone)]
pub struct PromptTuneStats {
    pub epoch_losses: Vec<f64>,
    pub supervision_count: u64,
}

/// Tune the prompting function on `m` prompt communities. Per epoch: one
/// uniformly random anchor per prompt, mean-BCE per context, losses summed,
/// one optimizer step. The encoder is not touched; only `z` is read.
pub fn run_prompt_tune<F: Real>(
    graph: &Graph,
    z: &EmbeddingMatrix<F>,
    prompts: &[Community],
    cfg: &PromptConfig,
) -> Result<(PromptParams<F>, PromptTuneStats)> {
    if prompts.is_empty() {
        return Err(Error::Usage("prompt tuning needs at least one community".into()));
    }
    for (i, c) in prompts.iter().enumerate() {
        if let Some(&bad) = c.members().iter().find(|&&u| u as usize >= graph.num_nodes()) {
            return Err(Error::data(format!(
                "prompt community {i} contains node {bad} absent from the graph"
            )));
        }
    }
    let mut phi = PromptParams::<F>::glorot(z.dim(), cfg.hidden, cfg.alpha, cfg.seed)?;
    let mut adam = AdamState::<F>::new(cfg.lr, &phi.param_lens());
    let mut stats = PromptTuneStats {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        supervision_count: 0,
    };
    for epoch in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, domain::ANCHOR, epoch as u64);
        let anchors: Vec<u32> = prompts
            .iter()
            .map(|c| c.members()[rng.random_range(0..c.len())])
            .collect();
        let contexts: Vec<Context> = anchors
            .iter()
            .map(|&a| graph.ego_net(a, cfg.k, cfg.hop_cap))
            .collect::<Result<_>>()?;
        stats.supervision_count += contexts.iter().map(|c| c.len() as u64).sum::<u64>();

        let results: Vec<Result<(F, PromptGrads<F>)>> =
            parallel::map_range(prompts.len(), |i| {
                bce_loss_and_grads(&phi, z, anchors[i], &contexts[i], &prompts[i], true)
            });
        let mut epoch_loss = F::zero();
        let mut total = PromptGrads::zeros_like(&phi);
        for r in results {
            let (l, g) = r?;
            epoch_loss = epoch_loss + l;
            total.add_assign(&g);
        }
        let loss64 = epoch_loss.to_f64().unwrap();
        if !loss64.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite prompt-tuning loss at epoch {epoch}"
            )));
        }
        stats.epoch_losses.push(loss64);
        let mut slices = phi.param_slices_mut();
        adam.step(&mut slices, &total.as_slices())?;
    }
    Ok((phi, stats))
}
