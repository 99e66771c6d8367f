//! Imbalanced multilingual news classification.
//!
//! The crate covers the full experimental loop for genre (T1, multiclass),
//! framing (T2, multilabel) and persuasion-technique (T3, paragraph-level
//! multilabel) detection:
//!
//! - [`corpus`]: JSON Lines ingestion, text normalisation, label spaces, stratified fold plans
//! - [`features`]: TF-IDF vectors or precomputed encoder embeddings
//! - [`imbalance`]: class weights, sample weights with a weighted batch sampler, under-sampling
//! - [`model`]: trunk + head classifier, weighted cross-entropy / BCE, AdamW, checkpoints
//! - [`pipeline`]: cross-validation with early stopping, task-agnostic and task-dependent
//!   strategies, F1 metrics, confusion matrices, top-3 majority-vote ensembles, ablations
//! - [`synth`]: synthetic corpora with controlled imbalance and task correlation
//! - [`cli`]: the `imbaltext` command line

pub mod cli;
pub mod corpus;
pub mod error;
pub mod features;
pub mod imbalance;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
