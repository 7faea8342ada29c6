use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, System};
use crate::corpus::{
    load_corpus, split_and_tokenize, write_corpus, Document, RawArticle, RecordError, TokenSeq,
    Tokenizer, Vocabulary, WordTokenizer, CLS_ID, SEP_ID,
};
use crate::encoder::{
    bce_loss, encode, load_checkpoint_expecting, save_checkpoint, selection_scores, EpochStats,
    Parameters, Trainer, VocabularyRef,
};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::oracle::{oracle_labels, ExtractiveLabels};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// A document left out of training and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub split: String,
    pub id: String,
    pub reason: String,
}

/// One split after tokenization, filtering, truncation and labelling.
#[derive(Debug, Clone, Default)]
pub struct PreparedSplit {
    pub name: String,
    pub documents: Vec<Document>,
    /// Parallel to `documents`; never empty.
    pub labels: Vec<ExtractiveLabels>,
    pub excluded: Vec<Exclusion>,
    pub record_errors: Vec<RecordError>,
    pub duplicates: usize,
    pub truncated: usize,
}

#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub vocab: Vocabulary,
    pub train: PreparedSplit,
    pub validation: PreparedSplit,
    pub test: PreparedSplit,
}

impl PreparedCorpus {
    pub fn splits(&self) -> [&PreparedSplit; 3] {
        [&self.train, &self.validation, &self.test]
    }
}

/// Raw articles for the three splits.
#[derive(Debug, Clone, Default)]
pub struct RawSplits {
    pub train: Vec<RawArticle>,
    pub validation: Vec<RawArticle>,
    pub test: Vec<RawArticle>,
    pub record_errors: [Vec<RecordError>; 3],
    pub duplicates: [usize; 3],
}

impl RawSplits {
    pub fn from_articles(
        train: Vec<RawArticle>,
        validation: Vec<RawArticle>,
        test: Vec<RawArticle>,
    ) -> Self {
        Self {
            train,
            validation,
            test,
            ..Self::default()
        }
    }

    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.require_splits()?;
        let mut out = Self::default();
        for (i, path) in [&cfg.corpus.train, &cfg.corpus.validation, &cfg.corpus.test]
            .into_iter()
            .enumerate()
        {
            let loaded = load_corpus(path)?;
            for e in &loaded.errors {
                log::warn!("{}: line {}: {}", path.display(), e.line, e.reason);
            }
            out.record_errors[i] = loaded.errors;
            out.duplicates[i] = loaded.duplicates;
            match i {
                0 => out.train = loaded.articles,
                1 => out.validation = loaded.articles,
                _ => out.test = loaded.articles,
            }
        }
        Ok(out)
    }
}

fn remap(seq: &mut TokenSeq, vocab: &Vocabulary) {
    for (id, s) in seq.tokens.iter_mut().zip(&seq.surfaces) {
        if *id != CLS_ID && *id != SEP_ID {
            *id = vocab.id(s);
        }
    }
}

fn remap_document(doc: &mut Document, vocab: &Vocabulary) {
    remap(&mut doc.headline, vocab);
    for s in doc
        .sentences
        .iter_mut()
        .chain(doc.summary_sentences.iter_mut())
    {
        remap(s, vocab);
    }
}

/// Tokenizes with an empty vocabulary; ids are fixed up once the real
/// vocabulary is known.
fn tokenize_split(
    name: &str,
    articles: &[RawArticle],
    cfg: &ExperimentConfig,
) -> Result<(Vec<Document>, Vec<Exclusion>)> {
    let tokenizer = WordTokenizer::new(Vocabulary::build(std::iter::empty(), 3, 1));
    let splitter = cfg.corpus.splitter()?;
    let mut docs = Vec::new();
    let mut excluded = Vec::new();
    for article in articles {
        let exclude = |reason: String| Exclusion {
            split: name.to_string(),
            id: article.id.clone(),
            reason,
        };
        match split_and_tokenize(
            article,
            &tokenizer as &dyn Tokenizer,
            &splitter,
            &cfg.corpus.filter,
        ) {
            Ok(t) => match t.violation {
                Some(v) => excluded.push(exclude(v.to_string())),
                None => docs.push(t.document),
            },
            Err(Error::Data(msg)) => excluded.push(exclude(msg)),
            Err(e) => return Err(e),
        }
    }
    Ok((docs, excluded))
}

/// Surfaces counted towards the vocabulary.
fn vocab_surfaces(docs: &[Document]) -> impl Iterator<Item = &str> {
    docs.iter().flat_map(|d| {
        d.headline
            .content()
            .chain(d.sentences.iter().flat_map(TokenSeq::content))
            .chain(d.summary_sentences.iter().flat_map(TokenSeq::content))
    })
}

fn label_split(
    name: &str,
    docs: Vec<Document>,
    excluded: &mut Vec<Exclusion>,
    cfg: &ExperimentConfig,
) -> Result<(Vec<Document>, Vec<ExtractiveLabels>, usize)> {
    let mut kept = Vec::with_capacity(docs.len());
    let mut labels = Vec::with_capacity(docs.len());
    let mut truncated = 0;
    for mut doc in docs {
        if doc.truncate_to(cfg.model.max_positions) {
            log::warn!(
                "document `{}` truncated to {} body tokens",
                doc.id,
                cfg.model.max_positions
            );
            truncated += 1;
        }
        let l = oracle_labels(&doc, &cfg.oracle)?;
        if l.indices.is_empty() {
            excluded.push(Exclusion {
                split: name.to_string(),
                id: doc.id.clone(),
                reason: "oracle selected no sentence".into(),
            });
            continue;
        }
        labels.push(l);
        kept.push(doc);
    }
    Ok((kept, labels, truncated))
}

/// Tokenizes, filters, truncates and labels every split. The vocabulary is
/// read from `corpus.vocab` when set and otherwise built from the kept
/// training documents.
pub fn prepare(cfg: &ExperimentConfig, raw: RawSplits) -> Result<PreparedCorpus> {
    let names = ["train", "validation", "test"];
    let mut tokenized = Vec::with_capacity(3);
    for (name, articles) in names.iter().zip([&raw.train, &raw.validation, &raw.test]) {
        tokenized.push(tokenize_split(name, articles, cfg)?);
    }
    let vocab = match &cfg.corpus.vocab {
        Some(path) => Vocabulary::load(path)?,
        None => Vocabulary::build(
            vocab_surfaces(&tokenized[0].0),
            cfg.corpus.vocab_size,
            cfg.corpus.min_count,
        ),
    };

    let mut splits = Vec::with_capacity(3);
    for (i, (mut docs, mut excluded)) in tokenized.into_iter().enumerate() {
        for d in &mut docs {
            remap_document(d, &vocab);
        }
        let (documents, labels, truncated) = label_split(names[i], docs, &mut excluded, cfg)?;
        splits.push(PreparedSplit {
            name: names[i].to_string(),
            documents,
            labels,
            excluded,
            record_errors: raw.record_errors[i].clone(),
            duplicates: raw.duplicates[i],
            truncated,
        });
    }
    let test = splits.pop().expect("three splits");
    let validation = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    log::info!(
        "prepared corpus: vocab {} / train {} / validation {} / test {} ({} excluded)",
        vocab.len(),
        train.documents.len(),
        validation.documents.len(),
        test.documents.len(),
        train.excluded.len() + validation.excluded.len() + test.excluded.len()
    );
    Ok(PreparedCorpus {
        vocab,
        train,
        validation,
        test,
    })
}

/// Writes the vocabulary, per-split labels and exclusion list.
pub fn write_prepared(out_dir: &Path, prepared: &PreparedCorpus) -> Result<()> {
    fs::create_dir_all(out_dir.join("labels")).map_err(|e| Error::io(out_dir, e))?;
    prepared.vocab.save(&out_dir.join(VOCAB_FILE))?;
    let mut tsv = String::from("split\tid\treason\n");
    for split in prepared.splits() {
        jsonl::write(
            &out_dir.join("labels").join(format!("{}.jsonl", split.name)),
            &split.labels,
        )?;
        for e in &split.excluded {
            tsv.push_str(&format!("{}\t{}\t{}\n", e.split, e.id, e.reason));
        }
        for e in &split.record_errors {
            tsv.push_str(&format!("{}\tline:{}\t{}\n", split.name, e.line, e.reason));
        }
    }
    write_text(&out_dir.join("excluded.tsv"), &tsv)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Mean loss of the current parameters on a labelled split, without
/// updating anything.
pub fn split_loss(params: &Parameters, split: &PreparedSplit) -> Result<Option<f64>> {
    if split.documents.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for (doc, l) in split.documents.iter().zip(&split.labels) {
        let enc = encode(doc, params)?;
        total += bce_loss(
            &selection_scores(&enc, params),
            &l.to_binary(doc.sentences.len()),
        )?;
    }
    Ok(Some(total / split.documents.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: Parameters,
    pub log: Vec<EpochLog>,
}

/// Trains on the prepared training split from the config's seed.
pub fn train_model(cfg: &ExperimentConfig, prepared: &PreparedCorpus) -> Result<TrainedModel> {
    let train = &prepared.train;
    if train.documents.is_empty() {
        return Err(Error::Data(
            "no training documents survived preparation".into(),
        ));
    }
    let model_cfg = cfg.model_config(prepared.vocab.len());
    model_cfg.validate()?;
    cfg.train.validate()?;
    let examples: Vec<(&Document, Vec<f64>)> = train
        .documents
        .iter()
        .zip(&train.labels)
        .map(|(d, l)| (d, l.to_binary(d.sentences.len())))
        .collect();
    let mut trainer = Trainer::new(Parameters::init(&model_cfg), cfg.train.clone());
    let mut log = Vec::with_capacity(cfg.train.epochs);
    for epoch in 1..=cfg.train.epochs {
        let EpochStats { mean_loss, .. } = trainer.epoch(epoch, &examples)?;
        let validation_loss = split_loss(trainer.params(), &prepared.validation)?;
        log.push(EpochLog {
            epoch,
            train_loss: mean_loss,
            validation_loss,
        });
    }
    Ok(TrainedModel {
        params: trainer.into_params(),
        log,
    })
}

pub fn train_log_tsv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch\ttrain_loss\tvalidation_loss\n");
    for e in log {
        let v = e
            .validation_loss
            .map_or_else(|| "-".to_string(), |v| format!("{v:.9}"));
        out.push_str(&format!("{}\t{:.9}\t{}\n", e.epoch, e.train_loss, v));
    }
    out
}

pub fn save_model(out_dir: &Path, params: &Parameters, vocab: &Vocabulary) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&path, params, Some(&VocabularyRef::new(VOCAB_FILE, vocab)))?;
    Ok(path)
}

/// Loads the run's checkpoint and checks it was trained with `vocab`.
pub fn load_model(cfg: &ExperimentConfig, vocab: &Vocabulary) -> Result<Parameters> {
    let path = cfg.out_dir.join(CHECKPOINT_FILE);
    if !path.is_file() {
        return Err(Error::Config(format!(
            "no trained checkpoint at {}; run `train` first",
            path.display()
        )));
    }
    let ckpt = load_checkpoint_expecting(&path, &cfg.model_config(vocab.len()))?;
    if let Some(r) = &ckpt.vocabulary {
        let expected = VocabularyRef::new(r.file.clone(), vocab);
        if r.sha256 != expected.sha256 {
            return Err(Error::CheckpointIncompatible(format!(
                "checkpoint was trained with a different vocabulary (sha256 {})",
                r.sha256
            )));
        }
    }
    Ok(ckpt.params)
}

/// Save then load; returns the reloaded parameters.
pub fn checkpoint_roundtrip(params: &Parameters, path: &Path) -> Result<Parameters> {
    save_checkpoint(path, params, None)?;
    Ok(crate::encoder::load_checkpoint(path)?.params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub dropped: usize,
}

/// Seeded partition of `split.input` into the three `[corpus]` files.
/// File order is kept within each split.
pub fn split_corpus(cfg: &ExperimentConfig) -> Result<SplitCounts> {
    let loaded = load_corpus(&cfg.split.input)?;
    let dropped = loaded.dropped();
    let (train, validation, test) = partition(
        loaded.articles,
        cfg.split.validation_fraction,
        cfg.split.test_fraction,
        cfg.seed,
    );
    write_corpus(&cfg.corpus.train, &train)?;
    write_corpus(&cfg.corpus.validation, &validation)?;
    write_corpus(&cfg.corpus.test, &test)?;
    Ok(SplitCounts {
        train: train.len(),
        validation: validation.len(),
        test: test.len(),
        dropped,
    })
}

pub fn partition(
    articles: Vec<RawArticle>,
    validation_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> (Vec<RawArticle>, Vec<RawArticle>, Vec<RawArticle>) {
    let n = articles.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let n_val = ((n as f64 * validation_fraction).round() as usize).min(n - n_test);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_set: HashSet<usize> = order[..n_test].iter().copied().collect();
    let val_set: HashSet<usize> = order[n_test..n_test + n_val].iter().copied().collect();
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (i, a) in articles.into_iter().enumerate() {
        if test_set.contains(&i) {
            test.push(a);
        } else if val_set.contains(&i) {
            validation.push(a);
        } else {
            train.push(a);
        }
    }
    (train, validation, test)
}

/// Whether any requested system needs trained parameters.
pub fn needs_model(systems: &[System]) -> bool {
    systems.iter().any(System::needs_model)
}
