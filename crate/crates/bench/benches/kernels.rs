use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use headsum_core::encoder::{
    encode, loss_and_gradient, ModelConfig, Parameters, TrainConfig, Trainer,
};
use headsum_core::metrics::{ngrams, rouge_n};
use headsum_core::oracle::{oracle_labels, OracleConfig};
use headsum_core::rerank::{Aggregation, DocumentScores};
use headsum_core::TokenSeq;

fn seq(len: usize, vocab: usize, salt: usize) -> TokenSeq {
    let words: Vec<String> = (0..len)
        .map(|i| format!("w{}", (i * 7 + salt * 13) % vocab))
        .collect();
    TokenSeq::from_surfaces(&words)
}

fn bench_rouge(c: &mut Criterion) {
    let mut group = c.benchmark_group("rouge_n");
    for len in [20usize, 200, 2000] {
        let pred = seq(len, 50, 1);
        let target = seq(len, 50, 2);
        group.bench_with_input(BenchmarkId::new("rouge2", len), &len, |b, _| {
            b.iter(|| {
                rouge_n(&ngrams(black_box(&pred), 2), &ngrams(black_box(&target), 2)).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let (_, prepared) = headsum_bench::corpus(1, 30, 15);
    let doc = headsum_bench::first_document(&prepared);
    c.bench_function("oracle_labels/30x15", |b| {
        b.iter(|| oracle_labels(black_box(doc), &OracleConfig::default()).unwrap())
    });
}

fn model(vocab: usize, d: usize, layers: usize) -> Parameters {
    Parameters::init(&ModelConfig {
        d,
        heads: 2,
        layers,
        vocab_size: vocab,
        max_positions: 512,
        ..ModelConfig::default()
    })
}

fn bench_encoder(c: &mut Criterion) {
    let (_, prepared) = headsum_bench::corpus(1, 12, 10);
    let doc = headsum_bench::first_document(&prepared);
    let vocab = prepared.vocab.len();
    let mut group = c.benchmark_group("encoder");
    for (d, layers) in [(16usize, 1usize), (32, 2)] {
        let params = model(vocab, d, layers);
        let labels = prepared.train.labels[0].to_binary(doc.sentences.len());
        let id = format!("d{d}_l{layers}");
        group.bench_function(BenchmarkId::new("forward", &id), |b| {
            b.iter(|| encode(black_box(doc), &params).unwrap())
        });
        group.bench_function(BenchmarkId::new("scores", &id), |b| {
            b.iter(|| {
                DocumentScores::compute(black_box(doc), &params)
                    .unwrap()
                    .aggregate(Aggregation::SimpleAverage)
                    .unwrap()
            })
        });
        group.bench_function(BenchmarkId::new("loss_and_gradient", &id), |b| {
            b.iter(|| loss_and_gradient(black_box(doc), &labels, &params).unwrap())
        });
        let mut trainer = Trainer::new(params.clone(), TrainConfig::default());
        group.bench_function(BenchmarkId::new("adam_step", &id), |b| {
            b.iter(|| trainer.step(black_box(doc), &labels).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_rouge, bench_oracle, bench_encoder);
criterion_main!(benches);
