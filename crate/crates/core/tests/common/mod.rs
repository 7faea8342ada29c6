//! Independent oracles used by the integration suites. Nothing here calls
//! the implementation path it checks.

#![allow(dead_code)]

use headsum_core::corpus::{Document, TokenSeq};
use headsum_core::encoder::{loss_and_gradient, Parameters};

/// Naive n-gram windows as owned vectors, in order of appearance.
pub fn windows(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].to_vec())
        .collect()
}

/// Clipped overlap by repeated linear scans: every predicted window consumes
/// one matching unused target window.
pub fn naive_overlap(pred: &[Vec<String>], target: &[Vec<String>]) -> usize {
    let mut used = vec![false; target.len()];
    let mut hits = 0;
    for p in pred {
        if let Some(j) = (0..target.len()).find(|&j| !used[j] && &target[j] == p) {
            used[j] = true;
            hits += 1;
        }
    }
    hits
}

pub fn naive_f1(overlap: usize, pred_total: usize, target_total: usize) -> f64 {
    if pred_total == 0 || target_total == 0 || overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred_total as f64;
    let r = overlap as f64 / target_total as f64;
    2.0 * p * r / (p + r)
}

pub fn naive_rouge_n(pred: &[String], target: &[String], n: usize) -> f64 {
    let pw = windows(pred, n);
    let tw = windows(target, n);
    naive_f1(naive_overlap(&pw, &tw), pw.len(), tw.len())
}

fn content(seq: &TokenSeq) -> Vec<String> {
    seq.tokens
        .iter()
        .zip(&seq.surfaces)
        .filter(|(&id, _)| id != 1 && id != 2)
        .map(|(_, s)| s.clone())
        .collect()
}

/// ROUGE-1 + ROUGE-2 of a sentence set (0-based) against the summary, with
/// per-sentence windows pooled additively.
pub fn naive_oracle_score(doc: &Document, selection: &[usize]) -> f64 {
    let mut total = 0.0;
    for n in 1..=2 {
        let pred: Vec<Vec<String>> = selection
            .iter()
            .flat_map(|&k| windows(&content(&doc.sentences[k]), n))
            .collect();
        let target: Vec<Vec<String>> = doc
            .summary_sentences
            .iter()
            .flat_map(|s| windows(&content(s), n))
            .collect();
        total += naive_f1(naive_overlap(&pred, &target), pred.len(), target.len());
    }
    total
}

/// Per-tensor relative error ||analytic - numeric|| / max(||analytic||,
/// ||numeric||) from central differences on every scalar.
pub fn gradient_check(
    doc: &Document,
    labels: &[f64],
    params: &Parameters,
    step: f32,
) -> Vec<(String, f64)> {
    let (_, analytic) = loss_and_gradient(doc, labels, params).unwrap();
    let loss_at = |p: &Parameters| loss_and_gradient(doc, labels, p).unwrap().0;
    let mut out = Vec::new();
    let n_tensors = params.tensors().len();
    for ti in 0..n_tensors {
        let len = params.tensors()[ti].data.len();
        let name = params.tensors()[ti].name.clone();
        let grad = &analytic.tensors()[ti].data;
        let (mut diff2, mut a2, mut n2) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..len {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let base = params.tensors()[ti].data[i];
            plus.tensors_mut()[ti].data[i] = base + step;
            minus.tensors_mut()[ti].data[i] = base - step;
            // the stored values are f32; divide by the step actually taken
            let taken = f64::from(base + step) - f64::from(base - step);
            let numeric = (loss_at(&plus) - loss_at(&minus)) / taken;
            diff2 += (grad[i] - numeric).powi(2);
            a2 += grad[i].powi(2);
            n2 += numeric.powi(2);
        }
        let denom = a2.sqrt().max(n2.sqrt());
        let rel = if denom == 0.0 {
            0.0
        } else {
            diff2.sqrt() / denom
        };
        out.push((name, rel));
    }
    out
}
