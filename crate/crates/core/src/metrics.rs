//! Summary evaluation: ROUGE-N, ROUGE-L, a brevity-penalised BLEU and
//! precision/recall/F1 with document- and sentence-level aggregation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};

/// Multiset of n-token windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramBag {
    n: usize,
    counts: HashMap<Vec<String>, usize>,
    total: usize,
}

impl NgramBag {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            counts: HashMap::new(),
            total: 0,
        }
    }

    /// Windows over `tokens`, taken as already marker-free.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S], n: usize) -> Self {
        let mut bag = Self::empty(n);
        bag.add_tokens(tokens);
        bag
    }

    fn add_tokens<S: AsRef<str>>(&mut self, tokens: &[S]) {
        if self.n == 0 || tokens.len() < self.n {
            return;
        }
        for w in tokens.windows(self.n) {
            let key = w.iter().map(|s| s.as_ref().to_string()).collect();
            *self.counts.entry(key).or_default() += 1;
            self.total += 1;
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Sum of multiplicities.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, gram: &[&str]) -> usize {
        let key: Vec<String> = gram.iter().map(|s| s.to_string()).collect();
        self.counts.get(&key).copied().unwrap_or(0)
    }

    /// Additive union: multiplicities are summed.
    pub fn merge(&mut self, other: &NgramBag) {
        debug_assert_eq!(self.n, other.n);
        for (k, &c) in &other.counts {
            *self.counts.entry(k.clone()).or_default() += c;
        }
        self.total += other.total;
    }

    /// Clipped intersection size: sum over grams of min(multiplicities).
    pub fn overlap(&self, other: &NgramBag) -> usize {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .map(|(k, &c)| c.min(large.counts.get(k).copied().unwrap_or(0)))
            .sum()
    }
}

/// N-gram bag of a token sequence with sentence markers removed.
pub fn ngrams(seq: &TokenSeq, n: usize) -> NgramBag {
    let content: Vec<&str> = seq.content().collect();
    NgramBag::from_tokens(&content, n)
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// ROUGE-N F1 over clipped n-gram overlap. Zero when either side is empty.
pub fn rouge_n(pred: &NgramBag, target: &NgramBag) -> Result<f64> {
    if pred.n != target.n {
        return Err(Error::contract(format!(
            "rouge_n over mismatched orders {} and {}",
            pred.n, target.n
        )));
    }
    if pred.is_empty() || target.is_empty() {
        return Ok(0.0);
    }
    let overlap = pred.overlap(target) as f64;
    Ok(f1(
        overlap / pred.total as f64,
        overlap / target.total as f64,
    ))
}

fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence.
pub fn rouge_l(pred: &TokenSeq, target: &TokenSeq) -> f64 {
    let p: Vec<&str> = pred.content().collect();
    let t: Vec<&str> = target.content().collect();
    if p.is_empty() || t.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&p, &t) as f64;
    f1(lcs / p.len() as f64, lcs / t.len() as f64)
}

/// min(1, |pred|/|target|) times the plain geometric mean of clipped n-gram
/// precisions for n = 1..=max_n. No smoothing: any zero precision, or a
/// prediction shorter than `max_n`, scores 0.
pub fn bleu(pred: &TokenSeq, target: &TokenSeq, max_n: usize) -> Result<f64> {
    if max_n == 0 {
        return Err(Error::contract("bleu requires max_n >= 1"));
    }
    let p: Vec<&str> = pred.content().collect();
    let t: Vec<&str> = target.content().collect();
    if t.is_empty() {
        return Err(Error::contract("bleu is undefined for an empty target"));
    }
    if p.len() < max_n {
        return Ok(0.0);
    }
    let mut product = 1.0;
    for n in 1..=max_n {
        let pb = NgramBag::from_tokens(&p, n);
        let tb = NgramBag::from_tokens(&t, n);
        let precision = pb.overlap(&tb) as f64 / pb.total() as f64;
        if precision == 0.0 {
            return Ok(0.0);
        }
        product *= precision;
    }
    let penalty = (p.len() as f64 / t.len() as f64).min(1.0);
    Ok(penalty * product.powf(1.0 / max_n as f64))
}

/// Precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion counts for one article.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Self { tp, fp, fn_ }
    }

    /// Counts for a predicted index set against a reference set.
    pub fn from_sets(predicted: &[usize], reference: &[usize]) -> Self {
        let tp = predicted.iter().filter(|i| reference.contains(i)).count();
        Self {
            tp,
            fp: predicted.len() - tp,
            fn_: reference.len() - tp,
        }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// Precision is 1 on an empty prediction only when nothing was missed;
/// recall is 1 whenever there was nothing to find.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = if tp + fp == 0 {
        if fn_ == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    Prf {
        precision,
        recall,
        f1: f1(precision, recall),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationLevel {
    /// Macro average of per-article scores.
    Document,
    /// Scores of the pooled counts.
    Sentence,
}

pub fn aggregate_prf(per_doc: &[Counts], level: AggregationLevel) -> Result<Prf> {
    if per_doc.is_empty() {
        return Err(Error::contract("aggregate_prf over an empty list"));
    }
    Ok(match level {
        AggregationLevel::Document => {
            let n = per_doc.len() as f64;
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for c in per_doc {
                let s = prf(c.tp, c.fp, c.fn_);
                p += s.precision;
                r += s.recall;
                f += s.f1;
            }
            Prf {
                precision: p / n,
                recall: r / n,
                f1: f / n,
            }
        }
        AggregationLevel::Sentence => {
            let mut total = Counts::default();
            for &c in per_doc {
                total += c;
            }
            prf(total.tp, total.fp, total.fn_)
        }
    })
}
