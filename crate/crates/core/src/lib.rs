//! Knowledge-graph attentive recommender with auxiliary-information fusion.
//!
//! This crate is `no_std` (it needs `alloc`). It holds the whole numerical
//! pipeline: collaborative knowledge graph construction and sampling, TransR
//! scoring, attentive propagation, Hadamard fusion of auxiliary tokens,
//! alternating BPR/KG training with hand-derived gradients, and ranking
//! metrics. File formats, the CLI and threaded evaluation live in the
//! `kgatax` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adam;
pub mod checks;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod gradcheck;
pub mod graph;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod propagation;
pub mod real;
pub mod rng;
pub mod train;
pub mod transr;

pub use config::{AttentionMode, ModelConfig, Precision};
pub use data::{AuxiliaryMap, EntityLayout, InteractionDataset};
pub use error::{Error, Result};
pub use graph::{CollaborativeKG, EntityId, ItemId, RelationId, Triple, UserId};
pub use kernel::Matrix;
pub use model::ModelParameters;
pub use real::Real;
pub use train::TrainedModel;
