use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use inquiry_core::batch::{load_corpus, run_batch};
use inquiry_core::par::Execution;
use inquiry_core::runtime::PolicyKind;
use inquiry_core::Engine;

fn batch(c: &mut Criterion) {
    let corpus = load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/batch_corpus.jsonl")).unwrap();
    let mut group = c.benchmark_group("batch_corpus");
    group.sample_size(10);
    for (name, mode) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        let engine = Engine::offline().with_execution(mode);
        group.bench_with_input(BenchmarkId::from_parameter(name), &engine, |b, engine| {
            b.iter(|| black_box(run_batch(engine, &corpus, &PolicyKind::AlwaysCorrect)))
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
