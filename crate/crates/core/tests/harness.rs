use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use headsum_core::corpus::{write_corpus, CorpusFilter, Document, TokenSeq};
use headsum_core::encoder::{ModelConfig, Parameters};
use headsum_core::harness::{
    self, aggregation_grid, alpha_sweep, evaluate, normalized_grid, prepare, sim_distribution,
    EvalSet, ExperimentConfig, RawSplits, System, ALL_GROUP,
};
use headsum_core::oracle::ExtractiveLabels;
use headsum_core::rerank::Aggregation;
use headsum_core::synthetic::{generate, SyntheticConfig};
use headsum_core::RawArticle;

fn small_config(dir: &Path, train: &[RawArticle], test: &[RawArticle]) -> ExperimentConfig {
    write_corpus(&dir.join("train.jsonl"), train).unwrap();
    write_corpus(&dir.join("validation.jsonl"), &train[..train.len().min(3)]).unwrap();
    write_corpus(&dir.join("test.jsonl"), test).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.corpus.train = dir.join("train.jsonl");
    cfg.corpus.validation = dir.join("validation.jsonl");
    cfg.corpus.test = dir.join("test.jsonl");
    cfg.corpus.filter = CorpusFilter {
        min_sentences: 1,
        max_sentences: 30,
        min_tokens: 1,
        max_tokens: 512,
    };
    cfg.out_dir = dir.join("out");
    cfg.model.max_positions = 64;
    cfg.train.epochs = 3;
    cfg
}

fn articles(cfg: SyntheticConfig) -> Vec<RawArticle> {
    generate(&cfg).into_iter().map(|s| s.article).collect()
}

#[test]
fn lead_only_on_three_articles() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = articles(SyntheticConfig::separable(3, 1));
    let mut cfg = small_config(dir.path(), &corpus, &corpus);
    cfg.eval.systems = vec!["lead-2".into()];
    let start = Instant::now();
    let report = harness::run_pipeline(&cfg).unwrap();
    assert!(
        start.elapsed() < Duration::from_secs(1),
        "{:?}",
        start.elapsed()
    );
    let all = &report.groups[ALL_GROUP];
    assert_eq!(all.articles, 3);
    assert_eq!(all.rows.len(), 1);
    assert_eq!(all.rows[0].system, "lead-2");
}

#[test]
fn report_cells_are_complete_and_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        &articles(SyntheticConfig::separable(10, 2)),
        &articles(SyntheticConfig::headline_signal(6, 3)),
    );
    let report = harness::run_pipeline(&cfg).unwrap();
    for group in report.groups.values() {
        assert_eq!(group.rows.len(), cfg.eval.systems.len());
        for row in &group.rows {
            for t in [row.abstractive, row.extractive] {
                for v in [t.rouge1, t.rouge2, t.rouge_l, t.bleu] {
                    assert!((0.0..=1.0).contains(&v), "{}: {v}", row.system);
                }
            }
            if row.system != "hl" {
                let p = row.sentence.unwrap();
                for v in [p.precision, p.recall, p.f1] {
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
    let oracle = report.row(ALL_GROUP, "oracle").unwrap();
    assert_eq!(oracle.sentence.unwrap().f1, 1.0);
}

#[test]
fn sweep_matches_system_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(
        dir.path(),
        &articles(SyntheticConfig::separable(10, 4)),
        &articles(SyntheticConfig::headline_signal(8, 5)),
    );
    cfg.eval.alpha_grid = vec![0.0, 0.5, 1.0];
    let report = harness::run_pipeline(&cfg).unwrap();
    let sweep = harness::run_alpha_sweep(&cfg).unwrap();
    assert_eq!(sweep.len(), 3);
    let row = |s: &str| report.row(ALL_GROUP, s).unwrap();
    for (point, system) in sweep.iter().zip(["hl-cos", "sa", "sel-only"]) {
        assert_eq!(
            point.document_f1,
            row(system).document.unwrap().f1,
            "{system}"
        );
        assert_eq!(
            point.sentence_f1,
            row(system).sentence.unwrap().f1,
            "{system}"
        );
    }
    let best = sweep.iter().map(|p| p.sentence_f1).fold(0.0, f64::max);
    assert!(best >= sweep[0].sentence_f1 && best >= sweep[2].sentence_f1);
    assert!(dir.path().join("out/alpha_sweep.tsv").exists());
}

#[test]
fn sweep_grid_contract() {
    assert!(normalized_grid(&[]).is_err());
    assert!(normalized_grid(&[1.2]).is_err());
    assert!(normalized_grid(&[f64::NAN]).is_err());
    assert_eq!(normalized_grid(&[0.5]).unwrap(), vec![0.0, 0.5, 1.0]);
    assert_eq!(
        normalized_grid(&[1.0, 0.25, 0.25]).unwrap(),
        vec![0.0, 0.25, 1.0]
    );
}

#[test]
fn aggregation_surface() {
    let grid = aggregation_grid(100);
    assert_eq!(grid.len(), 101 * 101);
    for p in &grid {
        assert!(p.hm <= p.sa, "{p:?}");
        if p.sel == p.sim {
            assert!(
                (p.sa - p.sel).abs() < 1e-12 && (p.hm - p.sel).abs() < 1e-12,
                "{p:?}"
            );
        }
    }
}

fn seq(ids: &[u32]) -> TokenSeq {
    TokenSeq {
        tokens: ids.to_vec(),
        surfaces: ids.iter().map(|i| format!("w{i}")).collect(),
    }
}

#[test]
fn headline_copy_has_unit_similarity() {
    let params = Parameters::init(&ModelConfig {
        d: 16,
        heads: 2,
        layers: 2,
        vocab_size: 20,
        max_positions: 32,
        seed: 11,
        ..ModelConfig::default()
    });
    let docs: Vec<Document> = (0..5u32)
        .map(|i| {
            let body = seq(&[4 + i, 5 + i, 6 + 2 * i]);
            Document {
                id: format!("d{i}"),
                source: None,
                headline: body.clone().wrapped(),
                sentences: vec![body.clone().wrapped()],
                summary_sentences: vec![body],
            }
        })
        .collect();
    let labels: Vec<ExtractiveLabels> = docs
        .iter()
        .map(|d| ExtractiveLabels {
            document_id: d.id.clone(),
            indices: vec![1],
        })
        .collect();
    let set = EvalSet::new(&docs, &labels, Some(&params)).unwrap();
    let dist = sim_distribution(&set).unwrap();
    let pos = dist.positive.unwrap();
    assert!((pos.median - 1.0).abs() < 1e-9, "{pos:?}");
    assert!(dist.negative.is_none());
}

#[test]
fn analysis_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(
        dir.path(),
        &articles(SyntheticConfig::separable(8, 6)),
        &articles(SyntheticConfig::headline_signal(6, 7)),
    );
    cfg.eval.embedding_dump = true;
    harness::run_train(&cfg).unwrap();
    let bundle = harness::run_analyze(&cfg).unwrap();
    assert_eq!(bundle.aggregation_grid.len(), 101 * 101);
    assert_eq!(bundle.alpha_sweep.first().unwrap().alpha, 0.0);
    assert_eq!(bundle.alpha_sweep.last().unwrap().alpha, 1.0);
    let dist = bundle.sim_distribution.unwrap();
    assert!(dist.positive.unwrap().count >= 1 && dist.negative.unwrap().count >= 1);
    assert!(bundle.per_index.contains_key("sa"));
    assert!(!bundle.per_index.contains_key("hl"));
    for f in ["analysis.json", "aggregation_grid.tsv", "embeddings.tsv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let grid = fs::read_to_string(dir.path().join("out/aggregation_grid.tsv")).unwrap();
    assert_eq!(grid.lines().count(), 101 * 101 + 1);
}

#[test]
fn evaluation_without_model_rejects_model_systems() {
    let corpus = articles(SyntheticConfig::separable(4, 8));
    let mut cfg = ExperimentConfig::default();
    cfg.corpus.filter.min_tokens = 1;
    cfg.model.max_positions = 64;
    let prepared = prepare(&cfg, RawSplits::from_articles(vec![], vec![], corpus)).unwrap();
    let set = EvalSet::new(&prepared.test.documents, &prepared.test.labels, None).unwrap();
    assert!(evaluate(&set, &[System::Lead(2), System::Headline], 0.5, 4).is_ok());
    assert!(evaluate(&set, &[System::Model(Aggregation::SimpleAverage)], 0.5, 4).is_err());
    assert!(alpha_sweep(&set, &[0.5], 0.5).is_err());
}

#[test]
fn missing_checkpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = articles(SyntheticConfig::separable(4, 9));
    let cfg = small_config(dir.path(), &corpus, &corpus);
    let err = harness::run_eval(&cfg).unwrap_err();
    assert_eq!(err.kind(), headsum_core::ErrorKind::Config, "{err}");
}
