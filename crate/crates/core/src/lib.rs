//! Knowledge persistence (KP): evaluating knowledge-graph embeddings through
//! the 0-dimensional persistent homology of sampled score graphs.
//!
//! The pipeline samples a positive graph (known triples) and a negative graph
//! (unknown triples) with O(|E|) edges each, weights edges by model score,
//! summarizes both through sublevel and superlevel persistence diagrams and
//! reports the sliced Wasserstein distance between the diagrams. The ranking
//! module provides the quadratic-cost reference metrics KP is compared with.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod kg_store;
pub mod kge_models;
pub mod persistence;
pub mod ranking;
pub mod sampling;
pub mod stats;
pub mod synth;
pub mod theory;
pub mod transport;

pub use error::{KpError, Result};
pub use kg_store::{load_tsv, KnowledgeGraph, Split, Triple};
pub use kge_models::{init_embeddings, EmbeddingModel, ModelKind, TrainConfig};
pub use persistence::{graph_pd, Frame, PersistenceDiagram};
pub use sampling::ScoredGraph;
pub use transport::{kp_score, SwConfig};
