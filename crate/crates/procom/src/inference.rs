//! Prompt-assisted prediction: candidate generation over all nodes,
//! community embedding, L2 matching, top-n selection per prompt.

use crate::encoder::{encode_all, EmbeddingMatrix, EncoderParams};
use crate::error::{Error, Result};
use crate::graph::{Community, Graph};
use crate::parallel;
use crate::prompt::{distill_community, PromptParams};
use crate::tensor::Real;
use std::collections::HashSet;

/// A distilled community with its generating node and summed embedding.
#[derive(Debug, Clone)]
pub struct Candidate<F> {
    pub center: u32,
    pub members: Community,
    pub embedding: Vec<F>,
}

/// One selected prediction with its matching provenance.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub members: Community,
    pub prompt_idx: usize,
    pub distance: f64,
}

/// Ordered predictions; may hold fewer than `requested` when candidates
/// run out (flagged by [`PredictionSet::is_complete`]).
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub predictions: Vec<Prediction>,
    pub requested: usize,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.predictions.len() == self.requested
    }

    pub fn communities(&self) -> Vec<Community> {
        self.predictions.iter().map(|p| p.members.clone()).collect()
    }
}

/// Sum of the member rows of `z`.
pub fn community_embedding<F: Real>(z: &EmbeddingMatrix<F>, c: &Community) -> Result<Vec<F>> {
    let d = z.dim();
    let mut out = vec![F::zero(); d];
    for &v in c.members() {
        if v as usize >= z.num_nodes() {
            return Err(Error::data(format!(
                "community member {v} outside embedding matrix"
            )));
        }
        for (o, &x) in out.iter_mut().zip(z.row(v)) {
            *o = *o + x;
        }
    }
    Ok(out)
}

/// Distill a candidate from every node's ego-net, drop empties, dedup by
/// member set (first generating node wins), and attach sum-pooled
/// embeddings. Candidates come back ordered by generating node.
pub fn generate_candidates<F: Real>(
    graph: &Graph,
    z: &EmbeddingMatrix<F>,
    phi: &PromptParams<F>,
    alpha: f64,
    k: usize,
    hop_cap: Option<usize>,
) -> Result<Vec<Candidate<F>>> {
    let n = graph.num_nodes();
    let distilled: Vec<Result<Option<Community>>> = parallel::map_range(n, |v| {
        let ctx = graph.ego_net(v as u32, k, hop_cap)?;
        distill_community(phi, z, &ctx, alpha)
    });
    collect_candidates(z, distilled)
}

/// The no-prompt baseline: every node's raw k-ego net as a candidate.
pub fn generate_ego_candidates<F: Real>(
    graph: &Graph,
    z: &EmbeddingMatrix<F>,
    k: usize,
    hop_cap: Option<usize>,
) -> Result<Vec<Candidate<F>>> {
    let n = graph.num_nodes();
    let raw: Vec<Result<Option<Community>>> = parallel::map_range(n, |v| {
        let ctx = graph.ego_net(v as u32, k, hop_cap)?;
        Ok(Some(Community::new(ctx.nodes)?))
    });
    collect_candidates(z, raw)
}

fn collect_candidates<F: Real>(
    z: &EmbeddingMatrix<F>,
    distilled: Vec<Result<Option<Community>>>,
) -> Result<Vec<Candidate<F>>> {
    let mut seen: HashSet<Community> = HashSet::new();
    let mut kept: Vec<(u32, Community)> = Vec::new();
    for (v, r) in distilled.into_iter().enumerate() {
        if let Some(c) = r? {
            if seen.insert(c.clone()) {
                kept.push((v as u32, c));
            }
        }
    }
    let embeddings: Vec<Result<Vec<F>>> =
        parallel::map_slice(&kept, |(_, c)| community_embedding(z, c));
    kept.into_iter()
        .zip(embeddings)
        .map(|((center, members), emb)| {
            Ok(Candidate {
                center,
                members,
                embedding: emb?,
            })
        })
        .collect()
}

fn l2_distance<F: Real>(a: &[F], b: &[F]) -> f64 {
    let mut s = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x.to_f64().unwrap() - y.to_f64().unwrap();
        s += d * d;
    }
    s.sqrt()
}

/// Round-robin top-n selection. Per prompt, candidates are ranked by
/// ascending L2 distance (ties by smaller center id); quotas are
/// `floor(N/m)` plus one extra for the first `N mod m` prompts. Selection
/// skips candidates already taken and candidates identical to any prompt
/// community, stopping at `n_pred` or exhaustion.
pub fn select_top_n<F: Real>(
    prompt_embs: &[Vec<F>],
    prompt_sets: &[Community],
    candidates: &[Candidate<F>],
    n_pred: usize,
) -> Result<PredictionSet> {
    let m = prompt_embs.len();
    if m == 0 || prompt_sets.len() != m {
        return Err(Error::Usage(
            "select_top_n needs matching prompt embeddings and member sets".into(),
        ));
    }
    if n_pred == 0 {
        return Err(Error::Usage("n_pred must be >= 1".into()));
    }
    let excluded: HashSet<&Community> = prompt_sets.iter().collect();

    // Per-prompt candidate order by (distance, center id).
    let orders: Vec<Vec<(usize, f64)>> = parallel::map_slice(prompt_embs, |pe| {
        let mut order: Vec<(usize, f64)> = candidates
            .iter()
            .enumerate()
            .map(|(j, c)| (j, l2_distance(pe, &c.embedding)))
            .collect();
        order.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then_with(|| candidates[a.0].center.cmp(&candidates[b.0].center))
        });
        order
    });

    let base = n_pred / m;
    let extra = n_pred % m;
    let quotas: Vec<usize> = (0..m).map(|i| base + usize::from(i < extra)).collect();

    let mut taken = vec![false; candidates.len()];
    let mut cursors = vec![0usize; m];
    let mut counts = vec![0usize; m];
    let mut predictions = Vec::with_capacity(n_pred);
    'outer: loop {
        let mut progressed = false;
        for i in 0..m {
            if counts[i] >= quotas[i] {
                continue;
            }
            let order = &orders[i];
            while cursors[i] < order.len() {
                let (j, dist) = order[cursors[i]];
                cursors[i] += 1;
                if taken[j] || excluded.contains(&candidates[j].members) {
                    continue;
                }
                taken[j] = true;
                counts[i] += 1;
                predictions.push(Prediction {
                    members: candidates[j].members.clone(),
                    prompt_idx: i,
                    distance: dist,
                });
                progressed = true;
                if predictions.len() == n_pred {
                    break 'outer;
                }
                break;
            }
        }
        if !progressed {
            break;
        }
    }
    if predictions.len() < n_pred {
        log::warn!(
            "selected {} of {} requested predictions (candidates exhausted)",
            predictions.len(),
            n_pred
        );
    }
    Ok(PredictionSet {
        predictions,
        requested: n_pred,
    })
}

/// Full prediction stage: encode, distill candidates, embed prompts, match.
pub fn run_predict<F: Real>(
    graph: &Graph,
    encoder: &EncoderParams<F>,
    phi: &PromptParams<F>,
    prompts: &[Community],
    n_pred: usize,
    k: usize,
    hop_cap: Option<usize>,
) -> Result<(PredictionSet, EmbeddingMatrix<F>)> {
    let z = encode_all(encoder, graph)?;
    let candidates = generate_candidates(graph, &z, phi, phi.alpha, k, hop_cap)?;
    let prompt_embs: Vec<Vec<F>> = prompts
        .iter()
        .map(|c| community_embedding(&z, c))
        .collect::<Result<_>>()?;
    let preds = select_top_n(&prompt_embs, prompts, &candidates, n_pred)?;
    Ok((preds, z))
}
