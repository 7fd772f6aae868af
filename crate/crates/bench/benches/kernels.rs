use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensekit::kernel::{build_gram, log_kernel_exact};
use sensekit::svm::{train_binary, TrainConfig};
use sensekit::{CountVector, Document, KernelSpec};

fn random_doc(rng: &mut ChaCha8Rng, vocab: usize, words: usize) -> CountVector {
    let ids: Vec<u32> = (0..words)
        .map(|_| rng.random_range(0..vocab as u32))
        .collect();
    CountVector::from_words(vocab, ids).unwrap()
}

fn corpus(m: usize, vocab: usize, words: usize) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..m)
        .map(|i| Document::new(format!("d{i}"), random_doc(&mut rng, vocab, words)))
        .collect()
}

fn bench_log_kernel(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_kernel_exact");
    for words in [100, 1000, 10000] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_doc(&mut rng, 20000, words);
        let b = random_doc(&mut rng, 20000, words);
        g.bench_with_input(BenchmarkId::from_parameter(words), &words, |bench, _| {
            bench.iter(|| log_kernel_exact(&a, &b).unwrap())
        });
    }
    g.finish();
}

fn bench_gram(c: &mut Criterion) {
    let docs = corpus(200, 5000, 300);
    let mut g = c.benchmark_group("gram_200");
    g.sample_size(10);
    for spec in [
        KernelSpec::sensing0(),
        KernelSpec::sensing1(500),
        KernelSpec::sensing2(500, 3),
        KernelSpec::rbf(0.1),
    ] {
        g.bench_function(spec.to_string(), |bench| {
            bench.iter(|| build_gram(&docs, &spec).unwrap())
        });
    }
    g.finish();
}

fn bench_smo(c: &mut Criterion) {
    let docs = corpus(400, 2000, 200);
    let gram = build_gram(&docs, &KernelSpec::sensing1(500)).unwrap();
    let labels: Vec<i8> = (0..docs.len())
        .map(|i| if i % 2 == 0 { 1 } else { -1 })
        .collect();
    let mut g = c.benchmark_group("smo_400");
    g.sample_size(10);
    for cval in [0.1, 10.0] {
        let cfg = TrainConfig::with_c(cval);
        g.bench_with_input(BenchmarkId::from_parameter(cval), &cfg, |bench, cfg| {
            bench.iter(|| train_binary(&gram, &labels, cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_log_kernel, bench_gram, bench_smo);
criterion_main!(benches);
