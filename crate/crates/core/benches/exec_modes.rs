//! Sequential against rayon-parallel execution on the two hot loops: the
//! forward pass over a batch of sentences and the metric reduction.
//!
//! `cargo bench -p headscope` compares both; building with
//! `--no-default-features` makes the parallel arm fall back to sequential.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use headscope::exec::Execution;
use headscope::exemplars::{rank_exemplars, RankMode};
use headscope::metrics::{analyze, FilterPolicy};
use headscope::model::synthetic;
use headscope::pipeline::{run, Source};
use headscope_testkit::{corpus_attention, fixture_corpus, RowStyle};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn metrics(c: &mut Criterion) {
    let corpus = fixture_corpus(100);
    let attention = corpus_attention(1, &corpus, 12, 12, RowStyle::Mixed);
    let mut g = c.benchmark_group("analyze_100_sentences_144_heads");
    g.sample_size(10);
    for exec in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| analyze(exec, &corpus, &attention, 12, 12, FilterPolicy::default(), "bench").unwrap())
        });
    }
    g.finish();
}

fn forward(c: &mut Criterion) {
    let corpus = fixture_corpus(32);
    let bundle = synthetic::seeded_bundle(synthetic::tiny_config(), 1);
    let mut g = c.benchmark_group("stream_32_sentences_tiny_model");
    g.sample_size(10);
    for exec in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| run(exec, &corpus, Source::Model(&bundle), FilterPolicy::default(), "bench", true, None).unwrap())
        });
    }
    g.finish();
}

fn exemplars(c: &mut Criterion) {
    let corpus = fixture_corpus(100);
    let attention = corpus_attention(2, &corpus, 1, 1, RowStyle::Mixed);
    c.bench_function("rank_exemplars_100_sentences_k10", |b| {
        b.iter(|| rank_exemplars(&corpus, &attention, 0, 0, 10, &FilterPolicy::default(), RankMode::MaxEdge).unwrap())
    });
}

criterion_group!(benches, metrics, forward, exemplars);
criterion_main!(benches);
