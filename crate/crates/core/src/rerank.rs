//! Headline-guided reranking: combine each sentence's selection score with
//! its (rectified) cosine similarity to the headline state, then threshold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TokenSeq};
use crate::encoder::{encode_with_headline, selection_scores, Parameters};
use crate::error::{Error, Result};

/// Cosine similarity clamped to [-1, 1]; a zero-norm input yields 0.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        log::warn!("cosine of a zero-norm embedding; using 0");
        return 0.0;
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

/// How selection and similarity scores are combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregation {
    SimpleAverage,
    HarmonicMean,
    /// `alpha * sel + (1 - alpha) * sim`.
    Weighted(f64),
    SelectionOnly,
    SimilarityOnly,
}

impl Aggregation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Aggregation::Weighted(a) if !(0.0..=1.0).contains(&a) => {
                Err(Error::Config(format!("alpha {a} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregation::SimpleAverage => f.write_str("sa"),
            Aggregation::HarmonicMean => f.write_str("hm"),
            Aggregation::Weighted(a) => write!(f, "weighted:{a}"),
            Aggregation::SelectionOnly => f.write_str("sel-only"),
            Aggregation::SimilarityOnly => f.write_str("sim-only"),
        }
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let rule = match lower.as_str() {
            "sa" => Aggregation::SimpleAverage,
            "hm" => Aggregation::HarmonicMean,
            "sel-only" | "sel_only" => Aggregation::SelectionOnly,
            "sim-only" | "sim_only" => Aggregation::SimilarityOnly,
            other => match other.strip_prefix("weighted:") {
                Some(a) => Aggregation::Weighted(
                    a.parse()
                        .map_err(|_| Error::Config(format!("bad alpha in `{s}`")))?,
                ),
                None => return Err(Error::Config(format!("unknown aggregation `{s}`"))),
            },
        };
        rule.validate()?;
        Ok(rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationConfig {
    pub rule: Aggregation,
    pub threshold: f64,
}

impl AggregationConfig {
    pub fn new(rule: Aggregation) -> Self {
        Self {
            rule,
            threshold: 0.5,
        }
    }
}

/// Combined probability for one sentence. Inputs must lie in [0, 1].
pub fn aggregate(sel: f64, sim: f64, rule: Aggregation) -> Result<f64> {
    if !(0.0..=1.0).contains(&sel) || !(0.0..=1.0).contains(&sim) {
        return Err(Error::contract(format!(
            "aggregate inputs outside [0, 1]: sel = {sel}, sim = {sim}"
        )));
    }
    let (lo, hi) = if sel <= sim { (sel, sim) } else { (sim, sel) };
    let p = match rule {
        Aggregation::SimpleAverage => (sel + sim) / 2.0,
        Aggregation::HarmonicMean => {
            if sel + sim == 0.0 {
                0.0
            } else {
                // rounding can leave the quotient an ulp above the mean
                (2.0 * sel * sim / (sel + sim)).min((sel + sim) / 2.0)
            }
        }
        Aggregation::Weighted(alpha) => alpha * sel + (1.0 - alpha) * sim,
        Aggregation::SelectionOnly => return Ok(sel),
        Aggregation::SimilarityOnly => return Ok(sim),
    };
    Ok(p.clamp(lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    /// 1-based sentence index.
    pub index: usize,
    pub sel_score: f64,
    pub raw_sim: f64,
    /// max(0, raw_sim).
    pub sim_score: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScores {
    pub document_id: String,
    pub per_sentence: Vec<SentenceScore>,
}

/// Ascending, unique 1-based sentence indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarySelection {
    pub document_id: String,
    pub indices: Vec<usize>,
}

/// Model outputs for one document before aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentScores {
    pub document_id: String,
    pub sel: Vec<f64>,
    pub raw_sim: Vec<f64>,
    pub cls_states: Vec<Vec<f64>>,
    pub headline_state: Vec<f64>,
}

impl DocumentScores {
    pub fn compute(doc: &Document, params: &Parameters) -> Result<Self> {
        let enc = encode_with_headline(doc, params)?;
        let sel = selection_scores(&enc, params);
        let headline_state = enc.headline_state.expect("headline encoded");
        let raw_sim = enc
            .cls_states
            .iter()
            .map(|z| cosine(&headline_state, z))
            .collect();
        Ok(Self {
            document_id: doc.id.clone(),
            sel,
            raw_sim,
            cls_states: enc.cls_states,
            headline_state,
        })
    }

    pub fn aggregate(&self, rule: Aggregation) -> Result<SentenceScores> {
        let per_sentence = self
            .sel
            .iter()
            .zip(&self.raw_sim)
            .enumerate()
            .map(|(i, (&sel, &raw))| {
                let sim = raw.max(0.0);
                Ok(SentenceScore {
                    index: i + 1,
                    sel_score: sel,
                    raw_sim: raw,
                    sim_score: sim,
                    prob: aggregate(sel, sim, rule)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SentenceScores {
            document_id: self.document_id.clone(),
            per_sentence,
        })
    }
}

/// Indices whose probability is at least `threshold`.
pub fn select_summary(scores: &SentenceScores, threshold: f64) -> SummarySelection {
    SummarySelection {
        document_id: scores.document_id.clone(),
        indices: scores
            .per_sentence
            .iter()
            .filter(|s| s.prob >= threshold)
            .map(|s| s.index)
            .collect(),
    }
}

/// First `n` sentences, capped at the sentence count.
pub fn lead_n(doc: &Document, n: usize) -> Result<SummarySelection> {
    if n == 0 {
        return Err(Error::contract("lead_n requires n >= 1"));
    }
    Ok(SummarySelection {
        document_id: doc.id.clone(),
        indices: (1..=n.min(doc.sentences.len())).collect(),
    })
}

/// Rectified headline cosine as the probability (the HL-COS baseline).
pub fn hl_cos_scores(doc: &Document, params: &Parameters) -> Result<SentenceScores> {
    DocumentScores::compute(doc, params)?.aggregate(Aggregation::SimilarityOnly)
}

/// Headline content used verbatim as the predicted summary (the HL
/// baseline).
pub fn headline_summary(doc: &Document) -> TokenSeq {
    TokenSeq::concat([&doc.headline])
}

/// Content of the selected sentences, in document order.
pub fn selection_text(doc: &Document, indices: &[usize]) -> TokenSeq {
    TokenSeq::concat(indices.iter().filter_map(|&i| doc.sentences.get(i - 1)))
}

/// One line of the per-sentence score dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreRecord {
    pub document_id: String,
    pub index: usize,
    pub sel_score: f64,
    pub raw_sim: f64,
    pub prob: f64,
    pub selected: bool,
    pub label: bool,
}
