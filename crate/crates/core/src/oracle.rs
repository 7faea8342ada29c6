//! Greedy extractive label generation from an abstractive reference.
//!
//! Each round adds the unselected sentence that maximises ROUGE-1 F1 +
//! ROUGE-2 F1 of the selection against the summary; selection stops when no
//! candidate strictly improves the score or `tau` sentences are chosen.

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::metrics::{ngrams, rouge_n, NgramBag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Maximum number of selected sentences.
    pub tau: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { tau: 4 }
    }
}

/// Ascending 1-based sentence indices chosen for a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractiveLabels {
    #[serde(rename = "documentId")]
    pub document_id: String,
    pub indices: Vec<usize>,
}

impl ExtractiveLabels {
    /// One 0/1 flag per sentence.
    pub fn to_binary(&self, sentence_count: usize) -> Vec<f64> {
        let mut y = vec![0.0; sentence_count];
        for &i in &self.indices {
            if (1..=sentence_count).contains(&i) {
                y[i - 1] = 1.0;
            }
        }
        y
    }
}

/// Per-sentence unigram and bigram bags plus the reference bags.
pub struct OracleBags {
    pub body: Vec<(NgramBag, NgramBag)>,
    pub reference: (NgramBag, NgramBag),
}

impl OracleBags {
    pub fn new(doc: &Document) -> Self {
        let mut r1 = NgramBag::empty(1);
        let mut r2 = NgramBag::empty(2);
        for s in &doc.summary_sentences {
            r1.merge(&ngrams(s, 1));
            r2.merge(&ngrams(s, 2));
        }
        Self {
            body: doc
                .sentences
                .iter()
                .map(|s| (ngrams(s, 1), ngrams(s, 2)))
                .collect(),
            reference: (r1, r2),
        }
    }

    /// ROUGE-1 F1 + ROUGE-2 F1 of the union of the given sentences
    /// (0-based positions).
    pub fn score(&self, selection: &[usize]) -> f64 {
        let mut c1 = NgramBag::empty(1);
        let mut c2 = NgramBag::empty(2);
        for &k in selection {
            c1.merge(&self.body[k].0);
            c2.merge(&self.body[k].1);
        }
        let r1 = rouge_n(&c1, &self.reference.0).expect("orders match");
        let r2 = rouge_n(&c2, &self.reference.1).expect("orders match");
        r1 + r2
    }
}

pub fn oracle_labels(doc: &Document, config: &OracleConfig) -> Result<ExtractiveLabels> {
    if doc.sentences.is_empty() || doc.summary_sentences.is_empty() {
        return Err(Error::contract(format!(
            "oracle on document `{}` needs body and summary sentences",
            doc.id
        )));
    }
    if config.tau == 0 {
        return Err(Error::contract("oracle tau must be at least 1"));
    }
    let bags = OracleBags::new(doc);
    let n = doc.sentences.len();
    let mut selected: Vec<usize> = Vec::new();
    let mut best_total = 0.0;

    while selected.len() < config.tau {
        let mut round_best: Option<(usize, f64)> = None;
        let mut trial = selected.clone();
        trial.push(0);
        for i in (0..n).filter(|i| !selected.contains(i)) {
            *trial.last_mut().unwrap() = i;
            let total = bags.score(&trial);
            // strict comparison keeps the lowest index on ties
            if total > round_best.map_or(best_total, |(_, t)| t) {
                round_best = Some((i, total));
            }
        }
        match round_best {
            Some((i, total)) => {
                selected.push(i);
                best_total = total;
            }
            None => break,
        }
    }

    let mut indices: Vec<usize> = selected.into_iter().map(|i| i + 1).collect();
    indices.sort_unstable();
    Ok(ExtractiveLabels {
        document_id: doc.id.clone(),
        indices,
    })
}
