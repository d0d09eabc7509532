//! Few-shot targeted community detection.
//!
//! The pipeline has three stages over an undirected graph:
//!
//! 1. **Pre-train** a small GCN encoder with two contrastive objectives:
//!    node-to-context proximity and context distinction against corrupted
//!    contexts ([`pretrain`]).
//! 2. **Prompt-tune** a two-layer MLP that scores how strongly a context
//!    member belongs with the context center, supervised by a handful of
//!    example communities; the encoder stays frozen ([`prompt`]).
//! 3. **Predict** by distilling a candidate community from every node's
//!    ego-net and matching candidates to the prompt communities by L2
//!    distance between summed member embeddings ([`inference`]).
//!
//! [`eval`] scores predictions with bi-matching F1/Jaccard and generates a
//! synthetic planted benchmark; [`pipeline`] wires the stages together for
//! the CLI.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod inference;
pub mod optim;
pub mod parallel;
pub mod pipeline;
pub mod pretrain;
pub mod prompt;
pub mod rng;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
