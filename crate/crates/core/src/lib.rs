//! Experimental machinery for Ancient Greek dependency parsing.
//!
//! The crate covers the full evaluation loop around a parser: treebank
//! ingestion and normalization, cross-validation splits, a CoNLL-2018 style
//! scorer, maximum spanning arborescence decoding, the Bayesian correlated
//! t-test for comparing cross-validated models, and a small character-level
//! arc-scoring network trained with hand-derived gradients.

pub mod bayes;
pub mod eval;
pub mod ingest;
pub mod mini;
pub mod mst;
pub mod normalize;
pub mod rng;
pub mod split;
pub mod stats;
pub mod treebank;

pub use eval::{evaluate, mean_and_sd, EvalMode, EvalReport};
pub use ingest::ScoreMatrix;
pub use mst::{brute_force_decode, decode, DecodedTree};
pub use normalize::{normalize_pipeline, NormalizationConfig, NormalizationReport};
pub use split::{make_splits, materialize_split, RunManifest};
pub use treebank::{validate_tree, DocumentMeta, Sentence, Token, TreeVerdict};
