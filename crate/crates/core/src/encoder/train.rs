use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Gradients, Parameters};
use super::{loss_and_gradient, ModelConfig};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::oracle::ExtractiveLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Optimizer settings. One update per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Visit documents in a seeded random order each epoch.
    pub shuffle: bool,
    /// Linear ramp of the step size over the first updates; 0 disables it.
    pub warmup_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle: true,
            warmup_steps: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("train: learning_rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("train: betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("train: epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Single-writer optimisation loop over a parameter set.
pub struct Trainer {
    params: Parameters,
    cfg: TrainConfig,
    first_moment: Gradients,
    second_moment: Gradients,
    steps: u64,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(params: Parameters, cfg: TrainConfig) -> Self {
        let first_moment = Gradients::filled(&params.config, 0.0);
        let second_moment = first_moment.clone();
        // separate stream from the initialiser
        let rng = ChaCha8Rng::seed_from_u64(params.config.seed ^ 0x5eed_5eed_0000_0001);
        Self {
            params,
            cfg,
            first_moment,
            second_moment,
            steps: 0,
            rng,
        }
    }

    /// Step size for the current update.
    fn learning_rate(&self) -> f64 {
        let w = self.cfg.warmup_steps as f64;
        if w > 0.0 && (self.steps as f64) < w {
            self.cfg.learning_rate * self.steps as f64 / w
        } else {
            self.cfg.learning_rate
        }
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn into_params(self) -> Parameters {
        self.params
    }

    /// One gradient update on one document; returns the loss before the
    /// update.
    pub fn step(&mut self, doc: &Document, labels: &[f64]) -> Result<f64> {
        let (loss, grads) = loss_and_gradient(doc, labels, &self.params)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch: 0,
                document: doc.id.clone(),
                loss,
            });
        }
        self.apply(&grads);
        Ok(loss)
    }

    fn apply(&mut self, grads: &Gradients) {
        self.steps += 1;
        let lr = self.learning_rate();
        match self.cfg.optimizer {
            OptimizerKind::Sgd => {
                for (p, g) in self.params.tensors_mut().into_iter().zip(grads.tensors()) {
                    for (pv, gv) in p.data.iter_mut().zip(&g.data) {
                        *pv = (f64::from(*pv) - lr * gv) as f32;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.cfg.beta1, self.cfg.beta2, self.cfg.epsilon);
                let c1 = 1.0 - b1.powf(self.steps as f64);
                let c2 = 1.0 - b2.powf(self.steps as f64);
                let tensors = self
                    .params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors())
                    .zip(self.first_moment.tensors_mut())
                    .zip(self.second_moment.tensors_mut());
                for (((p, g), m), v) in tensors {
                    for i in 0..p.data.len() {
                        let gi = g.data[i];
                        m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
                        v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
                        let update = lr * (m.data[i] / c1) / ((v.data[i] / c2).sqrt() + eps);
                        p.data[i] = (f64::from(p.data[i]) - update) as f32;
                    }
                }
            }
        }
    }

    /// One pass over `examples`; returns the mean pre-update loss.
    pub fn epoch(
        &mut self,
        epoch: usize,
        examples: &[(&Document, Vec<f64>)],
    ) -> Result<EpochStats> {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        if self.cfg.shuffle {
            order.shuffle(&mut self.rng);
        }
        let mut total = 0.0;
        for &i in &order {
            let (doc, labels) = &examples[i];
            let loss = self.step(doc, labels).map_err(|e| match e {
                Error::Diverged { document, loss, .. } => Error::Diverged {
                    epoch,
                    document,
                    loss,
                },
                e => e,
            })?;
            total += loss;
        }
        let mean_loss = total / examples.len().max(1) as f64;
        log::info!("epoch {epoch}: mean loss {mean_loss:.6}");
        Ok(EpochStats { epoch, mean_loss })
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: Parameters,
    pub epochs: Vec<EpochStats>,
}

/// Pairs documents with their label vectors, checking every document is
/// labelled with valid indices.
pub(crate) fn label_vectors<'a>(
    corpus: &'a [Document],
    labels: &[ExtractiveLabels],
) -> Result<Vec<(&'a Document, Vec<f64>)>> {
    let by_id: HashMap<&str, &ExtractiveLabels> =
        labels.iter().map(|l| (l.document_id.as_str(), l)).collect();
    corpus
        .iter()
        .map(|doc| {
            let l = by_id
                .get(doc.id.as_str())
                .ok_or_else(|| Error::contract(format!("document `{}` has no labels", doc.id)))?;
            let n = doc.sentences.len();
            if l.indices.iter().any(|&i| i == 0 || i > n) {
                return Err(Error::contract(format!(
                    "document `{}`: label indices {:?} outside 1..={n}",
                    doc.id, l.indices
                )));
            }
            Ok((doc, l.to_binary(n)))
        })
        .collect()
}

/// Trains from a seeded initialisation.
pub fn train(
    corpus: &[Document],
    labels: &[ExtractiveLabels],
    config: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Trained> {
    train_from(Parameters::init(config), corpus, labels, train_cfg)
}

pub fn train_from(
    params: Parameters,
    corpus: &[Document],
    labels: &[ExtractiveLabels],
    train_cfg: &TrainConfig,
) -> Result<Trained> {
    params.config.validate()?;
    train_cfg.validate()?;
    let examples = label_vectors(corpus, labels)?;
    let mut trainer = Trainer::new(params, train_cfg.clone());
    let mut epochs = Vec::with_capacity(train_cfg.epochs);
    for e in 0..train_cfg.epochs {
        epochs.push(trainer.epoch(e, &examples)?);
    }
    Ok(Trained {
        params: trainer.into_params(),
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenSeq;

    fn cfg() -> ModelConfig {
        ModelConfig {
            d: 8,
            heads: 2,
            layers: 1,
            vocab_size: 10,
            max_positions: 24,
            seed: 3,
            ..ModelConfig::default()
        }
    }

    fn doc(id: &str) -> Document {
        let seq = |ids: &[u32]| TokenSeq {
            tokens: ids.to_vec(),
            surfaces: ids.iter().map(|i| format!("w{i}")).collect(),
        };
        Document {
            id: id.into(),
            source: None,
            headline: seq(&[3]).wrapped(),
            sentences: vec![
                seq(&[3, 4]).wrapped(),
                seq(&[5, 6]).wrapped(),
                seq(&[7]).wrapped(),
            ],
            summary_sentences: vec![seq(&[3, 4])],
        }
    }

    fn labels(id: &str) -> ExtractiveLabels {
        ExtractiveLabels {
            document_id: id.into(),
            indices: vec![1],
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let start = Parameters::init(&cfg());
        for optimizer in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let tc = TrainConfig {
                epochs: 3,
                learning_rate: 0.0,
                optimizer,
                ..TrainConfig::default()
            };
            let out = train_from(start.clone(), &[doc("a")], &[labels("a")], &tc).unwrap();
            assert!(out.params.bitwise_eq(&start));
        }
    }

    #[test]
    fn single_step_decreases_loss() {
        let start = Parameters::init(&cfg());
        let d = doc("a");
        let y = labels("a").to_binary(3);
        for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut t = Trainer::new(
                start.clone(),
                TrainConfig {
                    learning_rate: 1e-3,
                    optimizer,
                    ..TrainConfig::default()
                },
            );
            let before = t.step(&d, &y).unwrap();
            let (after, _) = loss_and_gradient(&d, &y, t.params()).unwrap();
            assert!(after < before, "{optimizer:?}: {after} !< {before}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let docs = [doc("a"), doc("b")];
        let ls = [labels("a"), labels("b")];
        let tc = TrainConfig {
            epochs: 4,
            ..TrainConfig::default()
        };
        let a = train(&docs, &ls, &cfg(), &tc).unwrap();
        let b = train(&docs, &ls, &cfg(), &tc).unwrap();
        assert!(a.params.bitwise_eq(&b.params));
        assert_eq!(a.epochs, b.epochs);
    }

    #[test]
    fn missing_or_invalid_labels_rejected() {
        let tc = TrainConfig::default();
        assert!(train(&[doc("a")], &[], &cfg(), &tc).is_err());
        let bad = ExtractiveLabels {
            document_id: "a".into(),
            indices: vec![4],
        };
        assert!(train(&[doc("a")], &[bad], &cfg(), &tc).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mut p = Parameters::init(&cfg());
        p.head_w.data[0] = f32::NAN;
        let err = train_from(p, &[doc("a")], &[labels("a")], &TrainConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::Diverged { .. } | Error::Numeric { .. }
        ));
    }
}
