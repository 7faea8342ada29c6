use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::System;
use super::report::EvalSet;
use crate::error::{Error, Result};
use crate::metrics::{aggregate_prf, prf, AggregationLevel, Counts, Prf};
use crate::rerank::{aggregate, Aggregation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub document_f1: f64,
    pub sentence_f1: f64,
}

/// Median and quartiles of one label class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimDistribution {
    /// `None` when the class has no sentences.
    pub positive: Option<ClassSummary>,
    pub negative: Option<ClassSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sel: f64,
    pub sim: f64,
    pub sa: f64,
    pub hm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexPrf {
    /// 1-based sentence position.
    pub index: usize,
    /// Documents having a sentence at this position.
    pub documents: usize,
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub alpha_sweep: Vec<AlphaPoint>,
    pub sim_distribution: Option<SimDistribution>,
    pub aggregation_grid: Vec<GridPoint>,
    /// Keyed by system name.
    pub per_index: BTreeMap<String, Vec<IndexPrf>>,
}

impl AnalysisBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("analysis serializes");
        s.push('\n');
        s
    }
}

fn f1_pair(selections: &[Vec<usize>], set: &EvalSet<'_>) -> Result<(f64, f64)> {
    let counts: Vec<Counts> = selections
        .iter()
        .zip(set.labels)
        .map(|(s, l)| Counts::from_sets(s, &l.indices))
        .collect();
    Ok((
        aggregate_prf(&counts, AggregationLevel::Document)?.f1,
        aggregate_prf(&counts, AggregationLevel::Sentence)?.f1,
    ))
}

/// Grid sorted ascending with both endpoints present.
pub fn normalized_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::contract("alpha sweep over an empty grid"));
    }
    if let Some(a) = grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::contract(format!("alpha {a} outside [0, 1]")));
    }
    let mut g = grid.to_vec();
    g.push(0.0);
    g.push(1.0);
    g.sort_by(f64::total_cmp);
    g.dedup();
    if g.len() != grid.len() {
        log::info!("alpha grid extended to include both endpoints");
    }
    Ok(g)
}

/// F1 of the weighted rule at each alpha. Endpoints are always included.
pub fn alpha_sweep(set: &EvalSet<'_>, grid: &[f64], threshold: f64) -> Result<Vec<AlphaPoint>> {
    let grid = normalized_grid(grid)?;
    grid.into_iter()
        .map(|alpha| {
            let selections = set
                .selections(System::Model(Aggregation::Weighted(alpha)), threshold)?
                .expect("model systems select");
            let (document_f1, sentence_f1) = f1_pair(&selections, set)?;
            Ok(AlphaPoint {
                alpha,
                document_f1,
                sentence_f1,
            })
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(mut values: Vec<f64>) -> Option<ClassSummary> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(ClassSummary {
        count: values.len(),
        min: values[0],
        q1: quantile(&values, 0.25),
        median: quantile(&values, 0.5),
        q3: quantile(&values, 0.75),
        max: values[values.len() - 1],
    })
}

/// Raw headline cosine per sentence, split by oracle label.
pub fn sim_distribution(set: &EvalSet<'_>) -> Result<SimDistribution> {
    let scores = set
        .scores
        .as_deref()
        .ok_or_else(|| Error::contract("similarity analysis needs trained parameters"))?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (s, l) in scores.iter().zip(set.labels) {
        for (i, &raw) in s.raw_sim.iter().enumerate() {
            if l.indices.contains(&(i + 1)) {
                pos.push(raw);
            } else {
                neg.push(raw);
            }
        }
    }
    Ok(SimDistribution {
        positive: summarize(pos),
        negative: summarize(neg),
    })
}

/// SA and HM sampled on a (steps + 1)² grid over [0, 1]².
pub fn aggregation_grid(steps: usize) -> Vec<GridPoint> {
    let mut out = Vec::with_capacity((steps + 1) * (steps + 1));
    for i in 0..=steps {
        for j in 0..=steps {
            let sel = i as f64 / steps as f64;
            let sim = j as f64 / steps as f64;
            out.push(GridPoint {
                sel,
                sim,
                sa: aggregate(sel, sim, Aggregation::SimpleAverage).expect("grid in range"),
                hm: aggregate(sel, sim, Aggregation::HarmonicMean).expect("grid in range"),
            });
        }
    }
    out
}

/// PRF pooled over the sentences at each position.
pub fn per_index_prf(set: &EvalSet<'_>, selections: &[Vec<usize>]) -> Vec<IndexPrf> {
    let longest = set
        .documents
        .iter()
        .map(|d| d.sentences.len())
        .max()
        .unwrap_or(0);
    let mut counts = vec![Counts::default(); longest];
    let mut docs = vec![0usize; longest];
    for ((doc, sel), l) in set.documents.iter().zip(selections).zip(set.labels) {
        for i in 1..=doc.sentences.len() {
            let predicted = sel.contains(&i);
            let actual = l.indices.contains(&i);
            let c = &mut counts[i - 1];
            match (predicted, actual) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
            docs[i - 1] += 1;
        }
    }
    counts
        .into_iter()
        .zip(docs)
        .enumerate()
        .map(|(i, (c, documents))| IndexPrf {
            index: i + 1,
            documents,
            prf: prf(c.tp, c.fp, c.fn_),
        })
        .collect()
}

/// Similarity analysis: class distributions, aggregation surfaces and,
/// when asked, per-index PRF for every selecting system.
pub fn analyze_similarity(
    set: &EvalSet<'_>,
    systems: &[System],
    threshold: f64,
    per_index: bool,
) -> Result<AnalysisBundle> {
    let mut bundle = AnalysisBundle {
        sim_distribution: Some(sim_distribution(set)?),
        aggregation_grid: aggregation_grid(100),
        ..AnalysisBundle::default()
    };
    if per_index {
        for &system in systems {
            if let Some(sel) = set.selections(system, threshold)? {
                bundle
                    .per_index
                    .insert(system.to_string(), per_index_prf(set, &sel));
            }
        }
    }
    Ok(bundle)
}

pub fn grid_tsv(grid: &[GridPoint]) -> String {
    let mut out = String::from("sel\tsim\tsa\thm\n");
    for p in grid {
        let _ = writeln!(
            out,
            "{:.2}\t{:.2}\t{:.12}\t{:.12}",
            p.sel, p.sim, p.sa, p.hm
        );
    }
    out
}

pub fn alpha_tsv(points: &[AlphaPoint]) -> String {
    let mut out = String::from("alpha\tdocument_f1\tsentence_f1\n");
    for p in points {
        let _ = writeln!(
            out,
            "{}\t{:.9}\t{:.9}",
            p.alpha, p.document_f1, p.sentence_f1
        );
    }
    out
}

/// Sentence and headline states with class labels, one row each, for
/// external projection tools.
pub fn embedding_tsv(set: &EvalSet<'_>) -> Result<String> {
    let scores = set
        .scores
        .as_deref()
        .ok_or_else(|| Error::contract("embedding dump needs trained parameters"))?;
    let mut out = String::from("document_id\tindex\tclass\tstate\n");
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    for (s, l) in scores.iter().zip(set.labels) {
        let _ = writeln!(
            out,
            "{}\t0\theadline\t{}",
            s.document_id,
            join(&s.headline_state)
        );
        for (i, state) in s.cls_states.iter().enumerate() {
            let class = if l.indices.contains(&(i + 1)) {
                "positive"
            } else {
                "negative"
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{class}\t{}",
                s.document_id,
                i + 1,
                join(state)
            );
        }
    }
    Ok(out)
}
