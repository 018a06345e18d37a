//! Stance analysis toolkit.
//!
//! The crate covers the full offline pipeline behind the news stance explorer:
//!
//! - [`corpus`]: articles, annotation contexts, vote aggregation, entity-disjoint
//!   splits, the synthetic stance corpus, and the dataset file format.
//! - [`topics`]: knowledge-graph topic curation (URI mapping, type filtering,
//!   out-degree ranking).
//! - [`text`]: tokenization, vocabularies, and pretrained embedding ingestion.
//! - [`nn`]: LSTM cells, bidirectional encoding, softmax/cross-entropy, Adam,
//!   gradient checking, and checkpoints.
//! - [`model`]: the conditional BiLSTM stance classifier, its training loop,
//!   and the bag-of-n-grams baseline.
//! - [`metrics`]: confusion matrices, accuracy, macro-F1.
//! - [`ingest`]: boolean news queries, news providers, outlet prominence.

pub mod corpus;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod text;
pub mod topics;

mod error;

pub use error::{Error, Result};
