//! Learn the physical plausibility of subject-verb-object events from text.
//!
//! The pipeline runs from dependency parses ([`conllu`]) through triple
//! extraction ([`extract`]) and counting ([`store`]), to self-supervised
//! datasets built by pseudo-negative sampling ([`sampling`]), a two-layer
//! classifier over static word vectors ([`embeddings`], [`mlp`]), and the
//! cross-validation and grid-search protocols in [`eval`].

pub mod classifier;
pub mod cli;
pub mod config;
pub mod conllu;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod extract;
pub mod mlp;
pub mod rng;
pub mod sampling;
pub mod store;
pub mod triple;

pub use error::{Error, Result};
pub use triple::{normalize_lemma, Triple};
