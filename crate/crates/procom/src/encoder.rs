//! GCN encoder: layered propagation `H' = act(Â H W + b)` plus pooling
//! into context/community embeddings.
//!
//! The same forward is used two ways: pre-training encodes each context
//! subgraph independently on a tape, while the prompt and inference stages
//! encode the whole graph once without a tape.

use crate::autodiff::{Tape, ValueId};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::SparseSym;
use crate::tensor::{matmul, real, Real, Tensor};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// One GCN layer: weight `in×out` and bias `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer<F> {
    pub weight: Tensor<F>,
    pub bias: Vec<F>,
}

/// Trainable encoder weights. Layer shapes chain from the feature width to
/// the embedding dimension; ReLU between layers, identity on the last.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<F> {
    pub layers: Vec<GcnLayer<F>>,
}

impl<F: Real> EncoderParams<F> {
    /// Uniform Glorot-style fan-based init, seeded. Biases start at zero.
    /// `dims` chains layer widths: `[feat_dim, d, ..., d]`.
    pub fn glorot(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Usage("encoder needs at least one layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<F> = (0..fan_in * fan_out)
                .map(|_| real(rng.random_range(-limit..limit)))
                .collect();
            layers.push(GcnLayer {
                weight: Tensor::matrix(fan_in, fan_out, data)?,
                bias: vec![F::zero(); fan_out],
            });
        }
        Ok(EncoderParams { layers })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").weight.cols()
    }

    /// Parameter array lengths, weights then biases per layer (the layout
    /// shared by gradients and the optimizer).
    pub fn param_lens(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.numel(), l.bias.len()])
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[F]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [F]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn cast<G: Real>(&self) -> EncoderParams<G> {
        EncoderParams {
            layers: self
                .layers
                .iter()
                .map(|l| GcnLayer {
                    weight: l.weight.cast(),
                    bias: l.bias.iter().map(|&x| real(x.to_f64().unwrap())).collect(),
                })
                .collect(),
        }
    }

    /// Bitwise equality of all parameter arrays (frozen-encoder checks).
    pub fn bitwise_eq(&self, other: &EncoderParams<F>) -> bool {
        self.param_slices()
            .iter()
            .zip(other.param_slices().iter())
            .all(|(a, b)| {
                a.len() == b.len()
                    && a.iter().zip(b.iter()).all(|(x, y)| {
                        x.to_f64().unwrap().to_bits() == y.to_f64().unwrap().to_bits()
                    })
            })
    }
}

/// Gradient accumulator with the same layout as [`EncoderParams::param_lens`].
#[derive(Debug, Clone)]
pub struct EncoderGrads<F> {
    pub arrays: Vec<Vec<F>>,
}

impl<F: Real> EncoderGrads<F> {
    pub fn zeros_like(params: &EncoderParams<F>) -> Self {
        EncoderGrads {
            arrays: params
                .param_lens()
                .iter()
                .map(|&l| vec![F::zero(); l])
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &EncoderGrads<F>) {
        for (a, b) in self.arrays.iter_mut().zip(&other.arrays) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn as_slices(&self) -> Vec<&[F]> {
        self.arrays.iter().map(|a| a.as_slice()).collect()
    }

    /// Flatten into one vector (gradient-check plumbing).
    pub fn flatten(&self) -> Vec<F> {
        self.arrays.iter().flatten().copied().collect()
    }
}

/// Per-node embeddings produced by a frozen encoder.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix<F> {
    pub data: Tensor<F>,
    /// Which checkpoint (or in-memory run) produced this matrix.
    pub provenance: String,
}

impl<F: Real> EmbeddingMatrix<F> {
    pub fn num_nodes(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn row(&self, v: u32) -> &[F] {
        self.data.row_slice(v as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Sum,
    Mean,
}

/// Elementwise sum (or mean) of the selected rows.
pub fn pool<F: Real>(z: &Tensor<F>, rows: &[usize], mode: PoolMode) -> Result<Vec<F>> {
    if rows.is_empty() {
        return Err(Error::data("pool over empty node set"));
    }
    let d = z.cols();
    let mut out = vec![F::zero(); d];
    for &r in rows {
        for (o, &v) in out.iter_mut().zip(z.row_slice(r)) {
            *o = *o + v;
        }
    }
    if mode == PoolMode::Mean {
        let inv = real::<F>(1.0 / rows.len() as f64);
        for o in out.iter_mut() {
            *o = *o * inv;
        }
    }
    Ok(out)
}

/// Plain (untaped) forward pass over a normalized adjacency.
pub fn gcn_forward<F: Real>(
    params: &EncoderParams<F>,
    features: &Tensor<F>,
    adj: &SparseSym<F>,
) -> Result<Tensor<F>> {
    if features.cols() != params.in_dim() {
        return Err(Error::shape(
            "gcn_forward",
            format!(
                "feature width {} vs layer-1 input {}",
                features.cols(),
                params.in_dim()
            ),
        ));
    }
    if features.rows() != adj.n() {
        return Err(Error::shape(
            "gcn_forward",
            format!("{} feature rows vs {} adjacency rows", features.rows(), adj.n()),
        ));
    }
    let n = features.rows();
    let last = params.layers.len() - 1;
    let mut h = features.clone();
    for (l, layer) in params.layers.iter().enumerate() {
        let din = h.cols();
        let dout = layer.weight.cols();
        let mut prop = vec![F::zero(); n * din];
        adj.spmm(h.data(), din, &mut prop);
        let mut out = vec![F::zero(); n * dout];
        matmul(&prop, n, din, layer.weight.data(), dout, &mut out);
        for r in 0..n {
            for c in 0..dout {
                let v = out[r * dout + c] + layer.bias[c];
                out[r * dout + c] = if l < last && v < F::zero() { F::zero() } else { v };
            }
        }
        h = Tensor::matrix(n, dout, out)?;
    }
    Ok(h)
}

/// Tape handles for encoder parameters registered on a [`Tape`].
pub struct EncoderParamIds {
    pub weights: Vec<ValueId>,
    pub biases: Vec<ValueId>,
}

impl EncoderParamIds {
    /// Gradients in [`EncoderParams::param_lens`] order; zero when a
    /// parameter never received a cotangent.
    pub fn grads<F: Real>(&self, tape: &Tape<F>, params: &EncoderParams<F>) -> EncoderGrads<F> {
        let mut grads = EncoderGrads::zeros_like(params);
        for (i, (&w, &b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if let Some(g) = tape.grad(w) {
                grads.arrays[2 * i].copy_from_slice(g);
            }
            if let Some(g) = tape.grad(b) {
                grads.arrays[2 * i + 1].copy_from_slice(g);
            }
        }
        grads
    }
}

/// Register parameters as traced leaves.
pub fn register_params<F: Real>(tape: &mut Tape<F>, params: &EncoderParams<F>) -> EncoderParamIds {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for layer in &params.layers {
        weights.push(tape.leaf(layer.weight.clone()));
        biases.push(tape.leaf(Tensor::new(vec![layer.bias.len()], layer.bias.clone()).unwrap()));
    }
    EncoderParamIds { weights, biases }
}

/// Traced forward pass; same arithmetic as [`gcn_forward`].
pub fn gcn_forward_tape<F: Real>(
    tape: &mut Tape<F>,
    ids: &EncoderParamIds,
    features: ValueId,
    adj: &Arc<SparseSym<F>>,
) -> Result<ValueId> {
    let last = ids.weights.len() - 1;
    let mut h = features;
    for l in 0..ids.weights.len() {
        let prop = tape.spmm(Arc::clone(adj), h)?;
        let wx = tape.matmul(prop, ids.weights[l])?;
        let with_bias = tape.add(wx, ids.biases[l])?;
        h = if l < last {
            tape.relu(with_bias)
        } else {
            with_bias
        };
    }
    Ok(h)
}

/// Full-graph forward pass with the whole-graph normalized adjacency.
pub fn encode_all<F: Real>(params: &EncoderParams<F>, graph: &Graph) -> Result<EmbeddingMatrix<F>> {
    let adj = graph.normalized_adjacency::<F>();
    let features = graph.features_tensor::<F>();
    let data = gcn_forward(params, &features, &adj)?;
    Ok(EmbeddingMatrix {
        data,
        provenance: "in-memory".into(),
    })
}
