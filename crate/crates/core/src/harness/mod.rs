//! End-to-end orchestration: corpus preparation, oracle labelling,
//! training, scoring, evaluation reports and score analyses. Every stage
//! writes its artifacts under the configured output directory.

mod analysis;
mod config;
mod pipeline;
mod report;

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::jsonl;

pub use analysis::{
    aggregation_grid, alpha_sweep, alpha_tsv, analyze_similarity, embedding_tsv, grid_tsv,
    normalized_grid, per_index_prf, quantile, sim_distribution, summarize, AlphaPoint,
    AnalysisBundle, ClassSummary, GridPoint, IndexPrf, SimDistribution,
};
pub use config::{
    parse_alpha_grid, parse_systems, CorpusSection, EvalSection, ExperimentConfig, ModelSection,
    Overrides, SplitSection, System,
};
pub use pipeline::{
    checkpoint_roundtrip, load_model, needs_model, partition, prepare, save_model, split_corpus,
    split_loss, train_log_tsv, train_model, write_prepared, EpochLog, Exclusion, PreparedCorpus,
    PreparedSplit, RawSplits, SplitCounts, TrainedModel, CHECKPOINT_FILE, VOCAB_FILE,
};
pub use report::{evaluate, EvalSet, GroupReport, MetricsReport, SystemRow, TextScores, ALL_GROUP};

use pipeline::write_text;

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn checked(cfg: &ExperimentConfig) -> Result<()> {
    stage("config", cfg.validate())
}

fn ingest(cfg: &ExperimentConfig) -> Result<PreparedCorpus> {
    let raw = stage("ingest", RawSplits::load(cfg))?;
    let prepared = stage("oracle", prepare(cfg, raw))?;
    stage("oracle", write_prepared(&cfg.out_dir, &prepared))?;
    Ok(prepared)
}

/// `split`: seeded partition of the input corpus.
pub fn run_split(cfg: &ExperimentConfig) -> Result<SplitCounts> {
    checked(cfg)?;
    stage("split", split_corpus(cfg))
}

/// `oracle`: preparation and labelling only.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<PreparedCorpus> {
    checked(cfg)?;
    ingest(cfg)
}

fn train_and_save(cfg: &ExperimentConfig, prepared: &PreparedCorpus) -> Result<TrainedModel> {
    let trained = stage("train", train_model(cfg, prepared))?;
    stage(
        "train",
        save_model(&cfg.out_dir, &trained.params, &prepared.vocab),
    )?;
    stage(
        "train",
        write_text(
            &cfg.out_dir.join("train_log.tsv"),
            &train_log_tsv(&trained.log),
        ),
    )?;
    Ok(trained)
}

/// `train`: preparation, labelling and training; writes the checkpoint.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainedModel> {
    checked(cfg)?;
    let prepared = ingest(cfg)?;
    train_and_save(cfg, &prepared)
}

fn model_for(
    cfg: &ExperimentConfig,
    prepared: &PreparedCorpus,
    required: bool,
) -> Result<Option<crate::Parameters>> {
    if required {
        stage("score", load_model(cfg, &prepared.vocab)).map(Some)
    } else {
        Ok(None)
    }
}

fn score_file_name(system: System) -> String {
    format!("{}.jsonl", system.to_string().replace(':', "_"))
}

fn write_scores(
    cfg: &ExperimentConfig,
    set: &EvalSet<'_>,
    systems: &[System],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &system in systems.iter().filter(|s| s.needs_model()) {
        let path = cfg.out_dir.join("scores").join(score_file_name(system));
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        jsonl::write(&path, &set.score_records(system, cfg.eval.threshold)?)?;
        written.push(path);
    }
    Ok(written)
}

/// `score`: per-sentence score dumps for every model-backed system.
pub fn run_score(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    checked(cfg)?;
    let systems = cfg.systems()?;
    let prepared = ingest(cfg)?;
    let params = model_for(cfg, &prepared, true)?;
    let set = stage(
        "score",
        EvalSet::new(
            &prepared.test.documents,
            &prepared.test.labels,
            params.as_ref(),
        ),
    )?;
    stage("score", write_scores(cfg, &set, &systems))
}

fn write_report(cfg: &ExperimentConfig, report: &MetricsReport) -> Result<()> {
    write_text(&cfg.out_dir.join("report.json"), &report.to_json())?;
    write_text(&cfg.out_dir.join("report.txt"), &report.to_text())
}

/// `eval`: metric report for the requested systems using the trained
/// checkpoint when any system needs one.
pub fn run_eval(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    checked(cfg)?;
    let systems = cfg.systems()?;
    let prepared = ingest(cfg)?;
    let params = model_for(cfg, &prepared, needs_model(&systems))?;
    let set = stage(
        "score",
        EvalSet::new(
            &prepared.test.documents,
            &prepared.test.labels,
            params.as_ref(),
        ),
    )?;
    let report = stage(
        "evaluate",
        evaluate(&set, &systems, cfg.eval.threshold, cfg.eval.bleu_max_n),
    )?;
    stage("evaluate", write_report(cfg, &report))?;
    Ok(report)
}

/// Full pipeline: prepare, label, train (only when a model-backed system
/// is requested), score and evaluate.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    checked(cfg)?;
    let systems = cfg.systems()?;
    let prepared = ingest(cfg)?;
    let params = if needs_model(&systems) {
        Some(train_and_save(cfg, &prepared)?.params)
    } else {
        None
    };
    let set = stage(
        "score",
        EvalSet::new(
            &prepared.test.documents,
            &prepared.test.labels,
            params.as_ref(),
        ),
    )?;
    stage("score", write_scores(cfg, &set, &systems))?;
    let report = stage(
        "evaluate",
        evaluate(&set, &systems, cfg.eval.threshold, cfg.eval.bleu_max_n),
    )?;
    stage("evaluate", write_report(cfg, &report))?;
    Ok(report)
}

/// `sweep-alpha`: F1 of the weighted rule across `eval.alpha_grid`.
pub fn run_alpha_sweep(cfg: &ExperimentConfig) -> Result<Vec<AlphaPoint>> {
    checked(cfg)?;
    let prepared = ingest(cfg)?;
    let params = model_for(cfg, &prepared, true)?;
    let set = stage(
        "score",
        EvalSet::new(
            &prepared.test.documents,
            &prepared.test.labels,
            params.as_ref(),
        ),
    )?;
    let points = stage(
        "sweep",
        alpha_sweep(&set, &cfg.eval.alpha_grid, cfg.eval.threshold),
    )?;
    stage(
        "sweep",
        write_text(&cfg.out_dir.join("alpha_sweep.tsv"), &alpha_tsv(&points)),
    )?;
    Ok(points)
}

/// `analyze`: similarity distributions, aggregation surfaces, per-index
/// PRF, the alpha sweep and optionally an embedding dump.
pub fn run_analyze(cfg: &ExperimentConfig) -> Result<AnalysisBundle> {
    checked(cfg)?;
    let systems = cfg.systems()?;
    let prepared = ingest(cfg)?;
    let params = model_for(cfg, &prepared, true)?;
    let set = stage(
        "score",
        EvalSet::new(
            &prepared.test.documents,
            &prepared.test.labels,
            params.as_ref(),
        ),
    )?;
    let mut bundle = stage(
        "analyze",
        analyze_similarity(&set, &systems, cfg.eval.threshold, cfg.eval.per_index),
    )?;
    if !cfg.eval.alpha_grid.is_empty() {
        bundle.alpha_sweep = stage(
            "analyze",
            alpha_sweep(&set, &cfg.eval.alpha_grid, cfg.eval.threshold),
        )?;
    }
    let out = &cfg.out_dir;
    stage(
        "analyze",
        write_text(&out.join("analysis.json"), &bundle.to_json()),
    )?;
    stage(
        "analyze",
        write_text(
            &out.join("aggregation_grid.tsv"),
            &grid_tsv(&bundle.aggregation_grid),
        ),
    )?;
    if cfg.eval.embedding_dump {
        stage(
            "analyze",
            write_text(&out.join("embeddings.tsv"), &embedding_tsv(&set)?),
        )?;
    }
    Ok(bundle)
}
