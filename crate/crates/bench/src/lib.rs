//! Fixtures shared by the benchmarks.

use headsum_core::corpus::{CorpusFilter, Document};
use headsum_core::harness::{prepare, ExperimentConfig, PreparedCorpus, RawSplits};
use headsum_core::synthetic::{generate, SyntheticConfig};

/// A prepared synthetic corpus of `documents` training articles.
pub fn corpus(
    documents: usize,
    sentences: usize,
    sentence_len: usize,
) -> (ExperimentConfig, PreparedCorpus) {
    let mut cfg = ExperimentConfig::default();
    cfg.corpus.filter = CorpusFilter {
        min_sentences: 1,
        max_sentences: 64,
        min_tokens: 1,
        max_tokens: 4096,
    };
    let articles = generate(&SyntheticConfig {
        documents,
        sentences,
        sentence_len,
        ..SyntheticConfig::separable(documents, 7)
    })
    .into_iter()
    .map(|s| s.article)
    .collect();
    let prepared = prepare(&cfg, RawSplits::from_articles(articles, vec![], vec![]))
        .expect("synthetic corpus prepares");
    (cfg, prepared)
}

pub fn first_document(prepared: &PreparedCorpus) -> &Document {
    &prepared.train.documents[0]
}
