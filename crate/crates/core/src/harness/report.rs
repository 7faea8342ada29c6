use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::System;
use crate::corpus::{Document, TokenSeq};
use crate::encoder::Parameters;
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate_prf, bleu, ngrams, rouge_l, rouge_n, AggregationLevel, Counts, Prf,
};
use crate::oracle::ExtractiveLabels;
use crate::rerank::{
    headline_summary, lead_n, select_summary, selection_text, DocumentScores, ScoreRecord,
    SentenceScores,
};

pub const ALL_GROUP: &str = "all";

/// Test documents with their oracle labels and, when a model is
/// available, cached model outputs.
pub struct EvalSet<'a> {
    pub documents: &'a [Document],
    pub labels: &'a [ExtractiveLabels],
    pub scores: Option<Vec<DocumentScores>>,
}

impl<'a> EvalSet<'a> {
    pub fn new(
        documents: &'a [Document],
        labels: &'a [ExtractiveLabels],
        params: Option<&Parameters>,
    ) -> Result<Self> {
        if documents.len() != labels.len() {
            return Err(Error::contract("documents and labels differ in length"));
        }
        let scores = params
            .map(|p| {
                documents
                    .iter()
                    .map(|d| DocumentScores::compute(d, p))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Ok(Self {
            documents,
            labels,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    fn model_scores(&self, system: System) -> Result<&[DocumentScores]> {
        self.scores
            .as_deref()
            .ok_or_else(|| Error::contract(format!("system `{system}` needs trained parameters")))
    }

    /// Per-sentence probabilities for a model-backed system.
    pub fn sentence_scores(&self, system: System) -> Result<Vec<SentenceScores>> {
        let rule = system
            .aggregation()
            .ok_or_else(|| Error::contract(format!("system `{system}` has no probabilities")))?;
        self.model_scores(system)?
            .iter()
            .map(|s| s.aggregate(rule))
            .collect()
    }

    /// Selected indices per document, or `None` for the headline baseline.
    pub fn selections(&self, system: System, threshold: f64) -> Result<Option<Vec<Vec<usize>>>> {
        Ok(Some(match system {
            System::Headline => return Ok(None),
            System::Oracle => self.labels.iter().map(|l| l.indices.clone()).collect(),
            System::Lead(n) => self
                .documents
                .iter()
                .map(|d| lead_n(d, n).map(|s| s.indices))
                .collect::<Result<_>>()?,
            System::HeadlineCos | System::Model(_) => self
                .sentence_scores(system)?
                .iter()
                .map(|s| select_summary(s, threshold).indices)
                .collect(),
        }))
    }

    /// Score dump lines for a model-backed system.
    pub fn score_records(&self, system: System, threshold: f64) -> Result<Vec<ScoreRecord>> {
        let mut out = Vec::new();
        for (scores, labels) in self.sentence_scores(system)?.iter().zip(self.labels) {
            for s in &scores.per_sentence {
                out.push(ScoreRecord {
                    document_id: scores.document_id.clone(),
                    index: s.index,
                    sel_score: s.sel_score,
                    raw_sim: s.raw_sim,
                    prob: s.prob,
                    selected: s.prob >= threshold,
                    label: labels.indices.contains(&s.index),
                });
            }
        }
        Ok(out)
    }
}

/// ROUGE and BLEU of a predicted text against one reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextScores {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub bleu: f64,
}

impl TextScores {
    fn compute(pred: &TokenSeq, target: &TokenSeq, bleu_max_n: usize) -> Result<Self> {
        Ok(Self {
            rouge1: rouge_n(&ngrams(pred, 1), &ngrams(target, 1))?,
            rouge2: rouge_n(&ngrams(pred, 2), &ngrams(target, 2))?,
            rouge_l: rouge_l(pred, target),
            bleu: bleu(pred, target, bleu_max_n)?,
        })
    }

    fn mean(items: &[TextScores]) -> Self {
        let n = items.len().max(1) as f64;
        let sum = |f: fn(&TextScores) -> f64| items.iter().map(f).sum::<f64>() / n;
        Self {
            rouge1: sum(|s| s.rouge1),
            rouge2: sum(|s| s.rouge2),
            rouge_l: sum(|s| s.rouge_l),
            bleu: sum(|s| s.bleu),
        }
    }

    fn values(&self) -> [f64; 4] {
        [self.rouge1, self.rouge2, self.rouge_l, self.bleu]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    /// Against the human-written summary.
    pub abstractive: TextScores,
    /// Against the text of the oracle-selected sentences.
    pub extractive: TextScores,
    /// Macro average over articles. Absent for the headline baseline.
    pub document: Option<Prf>,
    /// Pooled over all sentences.
    pub sentence: Option<Prf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub articles: usize,
    pub rows: Vec<SystemRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub systems: Vec<String>,
    pub threshold: f64,
    /// "all" plus one entry per source tag.
    pub groups: BTreeMap<String, GroupReport>,
}

struct DocResult {
    abstractive: TextScores,
    extractive: TextScores,
    counts: Option<Counts>,
}

fn row(system: System, results: &[&DocResult]) -> Result<SystemRow> {
    let abstractive: Vec<TextScores> = results.iter().map(|r| r.abstractive).collect();
    let extractive: Vec<TextScores> = results.iter().map(|r| r.extractive).collect();
    let counts: Option<Vec<Counts>> = results.iter().map(|r| r.counts).collect();
    let (document, sentence) = match counts {
        Some(c) if !c.is_empty() => (
            Some(aggregate_prf(&c, AggregationLevel::Document)?),
            Some(aggregate_prf(&c, AggregationLevel::Sentence)?),
        ),
        _ => (None, None),
    };
    Ok(SystemRow {
        system: system.to_string(),
        abstractive: TextScores::mean(&abstractive),
        extractive: TextScores::mean(&extractive),
        document,
        sentence,
    })
}

/// Scores every system on every document, per group.
pub fn evaluate(
    set: &EvalSet<'_>,
    systems: &[System],
    threshold: f64,
    bleu_max_n: usize,
) -> Result<MetricsReport> {
    if set.is_empty() {
        return Err(Error::Data("no test documents survived preparation".into()));
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, d) in set.documents.iter().enumerate() {
        groups.entry(ALL_GROUP.to_string()).or_default().push(i);
        if let Some(src) = &d.source {
            groups.entry(src.clone()).or_default().push(i);
        }
    }
    let references: Vec<(TokenSeq, TokenSeq)> = set
        .documents
        .iter()
        .zip(set.labels)
        .map(|(d, l)| {
            (
                TokenSeq::concat(&d.summary_sentences),
                selection_text(d, &l.indices),
            )
        })
        .collect();

    let mut per_system: Vec<Vec<DocResult>> = Vec::with_capacity(systems.len());
    for &system in systems {
        let selections = set.selections(system, threshold)?;
        let mut results = Vec::with_capacity(set.len());
        for (i, doc) in set.documents.iter().enumerate() {
            let (pred, counts) = match &selections {
                None => (headline_summary(doc), None),
                Some(sel) => (
                    selection_text(doc, &sel[i]),
                    Some(Counts::from_sets(&sel[i], &set.labels[i].indices)),
                ),
            };
            let (abs_ref, ext_ref) = &references[i];
            let scored = |target| {
                TextScores::compute(&pred, target, bleu_max_n)
                    .map_err(|e| Error::Data(format!("document `{}`: {e}", doc.id)))
            };
            results.push(DocResult {
                abstractive: scored(abs_ref)?,
                extractive: scored(ext_ref)?,
                counts,
            });
        }
        per_system.push(results);
    }

    let mut out = BTreeMap::new();
    for (name, members) in groups {
        let rows = systems
            .iter()
            .zip(&per_system)
            .map(|(&system, results)| {
                let picked: Vec<&DocResult> = members.iter().map(|&i| &results[i]).collect();
                row(system, &picked)
            })
            .collect::<Result<_>>()?;
        out.insert(
            name,
            GroupReport {
                articles: members.len(),
                rows,
            },
        );
    }
    Ok(MetricsReport {
        systems: systems.iter().map(System::to_string).collect(),
        threshold,
        groups: out,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn row(&self, group: &str, system: &str) -> Option<&SystemRow> {
        self.groups
            .get(group)?
            .rows
            .iter()
            .find(|r| r.system == system)
    }

    /// Aligned plain-text tables, one per group, systems in request order.
    pub fn to_text(&self) -> String {
        let width = self
            .systems
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("system".len());
        let mut out = String::new();
        for (name, group) in &self.groups {
            let _ = writeln!(out, "[{name}] articles={}", group.articles);
            let _ = writeln!(
                out,
                "{:<width$} | {:^31} | {:^31} | {:^20} | {:^20}",
                "", "abstractive", "oracle-extractive", "document", "sentence"
            );
            let head4 = format!("{:>7} {:>7} {:>7} {:>7}", "R-1", "R-2", "R-L", "BLEU");
            let head3 = format!("{:>6} {:>6} {:>6}", "P", "R", "F1");
            let _ = writeln!(
                out,
                "{:<width$} | {head4} | {head4} | {head3} | {head3}",
                "system"
            );
            for r in &group.rows {
                let four = |t: &TextScores| {
                    t.values()
                        .iter()
                        .map(|v| format!("{v:>7.4}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                let three = |p: &Option<Prf>| match p {
                    Some(p) => format!("{:>6.4} {:>6.4} {:>6.4}", p.precision, p.recall, p.f1),
                    None => format!("{:>6} {:>6} {:>6}", "-", "-", "-"),
                };
                let _ = writeln!(
                    out,
                    "{:<width$} | {} | {} | {} | {}",
                    r.system,
                    four(&r.abstractive),
                    four(&r.extractive),
                    three(&r.document),
                    three(&r.sentence)
                );
            }
            out.push('\n');
        }
        out
    }
}
