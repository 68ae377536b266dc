use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use pmlsim::inference::pair_similarity;
use pmlsim::*;

fn corpus(count: usize) -> LabeledCorpus {
    generate_corpus(&CorpusSpec {
        count,
        duplicate_fraction: 0.2,
        perturbation: Perturbation::CharEdits(1),
        seed: 42,
        ..CorpusSpec::default()
    })
    .unwrap()
}

fn sweep(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let mut group = c.benchmark_group("pairwise_matrix");
    group.sample_size(10);
    for count in [50, 150] {
        let docs = corpus(count);
        group.throughput(Throughput::Elements((count * (count - 1) / 2) as u64));
        for (name, execution) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel(None)),
        ] {
            let opts = EvalOptions {
                execution,
                ..EvalOptions::default()
            };
            group.bench_with_input(BenchmarkId::new(name, count), &docs, |b, docs| {
                b.iter(|| pairwise_matrix(black_box(docs), &cfg, &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn single_pair(c: &mut Criterion) {
    let docs = corpus(2);
    let a = reduce_pml(&docs.documents[0]);
    let b = reduce_pml(&docs.documents[1]);
    let mut group = c.benchmark_group("pair");
    for (name, cfg) in [
        ("edit", SimConfig::default()),
        ("exact", SimConfig::default().with_similarity(SimilarityMode::Exact)),
    ] {
        group.bench_function(name, |bench| {
            bench.iter(|| pair_similarity(black_box(&a), black_box(&b), &cfg).unwrap())
        });
    }
    group.bench_function("reduce", |bench| {
        bench.iter(|| reduce_pml(black_box(&docs.documents[0])))
    });
    group.finish();
}

criterion_group!(benches, sweep, single_pair);
criterion_main!(benches);
