//! Transformer sentence scorer: additive word/position/segment embeddings,
//! a stack of self-attention + feed-forward layers with post-residual layer
//! norm, and a sigmoid head over the sentence-start states.

mod checkpoint;
mod mat;
mod network;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TokenSeq, SEP_ID};
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, VocabularyRef};
pub use mat::{dot, Mat};
pub use network::{forward, ForwardPass, SequenceInput};
pub use params::{Gradients, LayerParams, ParamSet, Parameters, Tensor};
pub use train::{train, EpochStats, OptimizerKind, TrainConfig, Trained, Trainer};

/// Dimensional hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Embedding width.
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub ln_epsilon: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 16,
            heads: 2,
            layers: 1,
            vocab_size: 3,
            max_positions: 512,
            ln_epsilon: 1e-5,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.d / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("model: {msg} ({self:?})")));
        if self.d == 0 || self.heads == 0 || self.d % self.heads != 0 {
            return bad("d must be a positive multiple of heads");
        }
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        if self.vocab_size < 3 {
            return bad("vocab_size must cover the reserved tokens");
        }
        if self.max_positions < 3 {
            return bad("max_positions must be at least 3");
        }
        if !(self.ln_epsilon > 0.0) {
            return bad("ln_epsilon must be positive");
        }
        Ok(())
    }
}

/// Encoder states for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDocument {
    pub token_states: Mat,
    /// One state per sentence, taken at its sentence-start marker.
    pub cls_states: Vec<Vec<f64>>,
    pub headline_state: Option<Vec<f64>>,
}

/// Flattened body: sentence `i` (1-based) uses segment row 0 when odd and
/// row 1 when even.
pub fn document_input(doc: &Document) -> SequenceInput {
    let mut tokens = Vec::with_capacity(doc.body_len());
    let mut segments = Vec::with_capacity(doc.body_len());
    for (i, s) in doc.sentences.iter().enumerate() {
        tokens.extend_from_slice(&s.tokens);
        segments.extend(std::iter::repeat(i % 2).take(s.len()));
    }
    SequenceInput { tokens, segments }
}

/// Headline as its own sequence from position 0 with the odd segment,
/// truncated to `max_positions` (boundary marker kept).
pub fn headline_input(headline: &TokenSeq, max_positions: usize) -> SequenceInput {
    let mut tokens = headline.tokens.clone();
    if tokens.len() > max_positions {
        log::warn!(
            "headline of {} tokens truncated to {max_positions}",
            tokens.len()
        );
        tokens.truncate(max_positions.saturating_sub(1));
        tokens.push(SEP_ID);
    }
    let segments = vec![0; tokens.len()];
    SequenceInput { tokens, segments }
}

/// Embedding-layer output for the document body.
pub fn embed(doc: &Document, params: &Parameters) -> Result<Mat> {
    network::embed_sequence(&document_input(doc), params)
}

pub fn encode(doc: &Document, params: &Parameters) -> Result<EncodedDocument> {
    let pass = forward(&document_input(doc), params)?;
    let states = pass.into_output();
    let cls_states = doc
        .cls_positions()
        .into_iter()
        .map(|p| states.row(p).to_vec())
        .collect();
    Ok(EncodedDocument {
        token_states: states,
        cls_states,
        headline_state: None,
    })
}

/// State of the headline's start marker after the full stack.
pub fn encode_headline(doc: &Document, params: &Parameters) -> Result<Vec<f64>> {
    let input = headline_input(&doc.headline, params.config.max_positions);
    if input.is_empty() {
        return Err(Error::contract(format!(
            "document `{}` has an empty headline sequence",
            doc.id
        )));
    }
    let pass = forward(&input, params)?;
    Ok(pass.output().row(0).to_vec())
}

/// Body and headline encoding in one call.
pub fn encode_with_headline(doc: &Document, params: &Parameters) -> Result<EncodedDocument> {
    let mut enc = encode(doc, params)?;
    enc.headline_state = Some(encode_headline(doc, params)?);
    Ok(enc)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn head_logit(state: &[f64], params: &Parameters) -> f64 {
    let w = &params.head_w.data;
    state
        .iter()
        .zip(w)
        .map(|(z, &w)| z * f64::from(w))
        .sum::<f64>()
        + f64::from(params.head_b.data[0])
}

/// sigmoid(Wo z + bo) for every sentence state.
pub fn selection_scores(enc: &EncodedDocument, params: &Parameters) -> Vec<f64> {
    enc.cls_states
        .iter()
        .map(|z| sigmoid(head_logit(z, params)))
        .collect()
}

pub const BCE_CLAMP: f64 = 1e-7;

/// Mean negative log-likelihood with scores clamped to [1e-7, 1 - 1e-7].
pub fn bce_loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::contract(format!(
            "bce_loss over {} scores and {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::contract("bce_loss over an empty sentence list"));
    }
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / scores.len() as f64)
}

/// Loss of one labelled document and its gradient for every tensor.
pub fn loss_and_gradient(
    doc: &Document,
    labels: &[f64],
    params: &Parameters,
) -> Result<(f64, Gradients)> {
    if labels.len() != doc.sentences.len() {
        return Err(Error::contract(format!(
            "document `{}`: {} labels for {} sentences",
            doc.id,
            labels.len(),
            doc.sentences.len()
        )));
    }
    let pass = forward(&document_input(doc), params)?;
    let states = pass.output();
    let positions = doc.cls_positions();
    let n = positions.len() as f64;
    let mut grads = Gradients::filled(&params.config, 0.0);
    let mut d_states = Mat::zeros(states.rows(), states.cols());
    let mut scores = Vec::with_capacity(positions.len());
    for (&pos, &y) in positions.iter().zip(labels) {
        let z = states.row(pos);
        let p = sigmoid(head_logit(z, params));
        scores.push(p);
        // d(loss)/d(logit); zero where the clamp is active
        let dlogit = if (BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
            (p - y) / n
        } else {
            0.0
        };
        grads.head_b.data[0] += dlogit;
        for (j, (&zj, &wj)) in z.iter().zip(&params.head_w.data).enumerate() {
            grads.head_w.data[j] += dlogit * zj;
            d_states.row_mut(pos)[j] += dlogit * f64::from(wj);
        }
    }
    let loss = bce_loss(&scores, labels)?;
    network::backward(&pass, &d_states, &mut grads);
    Ok((loss, grads))
}
