//! Headline-guided extractive summarization.
//!
//! The pipeline turns abstractive references into extractive labels with a
//! greedy ROUGE oracle, trains a small transformer sentence scorer from
//! scratch, reranks sentences by their similarity to the encoded headline
//! and evaluates selections with ROUGE, BLEU and precision/recall/F1.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod jsonl;
pub mod metrics;
pub mod oracle;
pub mod rerank;
pub mod synthetic;

pub use corpus::{Document, RawArticle, TokenSeq};
pub use encoder::{ModelConfig, Parameters, TrainConfig};
pub use error::{Error, ErrorKind, Result};
pub use oracle::{oracle_labels, ExtractiveLabels, OracleConfig};
pub use rerank::{Aggregation, AggregationConfig, SentenceScores, SummarySelection};
