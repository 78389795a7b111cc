//! Sequential vs data-parallel execution of the hot paths.
//!
//! With the `parallel` feature each benchmark runs inside a one-thread rayon
//! pool and inside the default pool. Without it only the sequential build is
//! measured, which makes `--no-default-features` runs directly comparable.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semhash::autoencoder::{train, NetworkParams, TrainConfig};
use semhash::eval::{run_experiment, EvalConfig};
use semhash::hashindex::{BinaryCode, HammingIndex};
use semhash::retrieval::{build_index, Engine};
use semhash::synthetic::{class_corpus, SyntheticConfig};
use semhash::textpipe::{VectorStore, VocabConfig};

type Runner = Box<dyn Fn(&mut (dyn FnMut() + Send))>;

fn modes() -> Vec<(&'static str, Runner)> {
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pooled = rayon::ThreadPoolBuilder::new().build().unwrap();
        vec![
            ("1-thread", Box::new(move |f: &mut (dyn FnMut() + Send)| single.install(f))),
            ("pool", Box::new(move |f: &mut (dyn FnMut() + Send)| pooled.install(f))),
        ]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential", Box::new(|f: &mut (dyn FnMut() + Send)| f()))]
    }
}

fn store() -> VectorStore {
    let cfg = SyntheticConfig {
        docs_per_class: 64,
        ..SyntheticConfig::default()
    };
    let train = class_corpus(&cfg, 0, 1).unwrap();
    let test = class_corpus(&SyntheticConfig { docs_per_class: 16, ..cfg }, 1 << 40, 2).unwrap();
    VectorStore::build(&train, &test, &VocabConfig { top_n: 200, ..VocabConfig::default() }).unwrap()
}

fn training_epoch(c: &mut Criterion) {
    let store = store();
    let data = store.network_inputs();
    let dims = NetworkParams::mirrored_dims(&[store.dim(), 64, 64, 12]);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 64,
        noise_sigma: 0.1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("training_epoch");
    group.sample_size(10);
    for (name, run) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                run(&mut || {
                    let net = NetworkParams::init(&dims, 3).unwrap();
                    std::hint::black_box(train(net, &data, &cfg).unwrap());
                })
            })
        });
    }
    group.finish();
}

fn ball_scan(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let width = 32;
    let entries = (0..200_000u64)
        .map(|d| (d, BinaryCode::from_u64(width, rng.random())))
        .collect();
    let index = HammingIndex::build(width, entries).unwrap();
    let center = BinaryCode::from_u64(width, rng.random());
    let mut group = c.benchmark_group("ball_scan_200k");
    for (name, run) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&mut || {
                std::hint::black_box(index.ball_scan(&center, 3).unwrap());
            }))
        });
    }
    group.finish();
}

fn batch_queries(c: &mut Criterion) {
    let store = store();
    let dims = NetworkParams::mirrored_dims(&[store.dim(), 64, 64, 12]);
    let net = NetworkParams::init(&dims, 4).unwrap();
    let index = build_index(&store, &net, 0.5).unwrap();
    let engine = Engine::new(&store, net, index).unwrap();
    let mut cfg = EvalConfig::default();
    cfg.query.preselect.radius = 12;
    cfg.query.preselect.max_radius = 12;
    cfg.query.gsa_sigma = 0.1;
    let mut group = c.benchmark_group("batch_queries");
    group.sample_size(10);
    for (name, run) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&mut || {
                std::hint::black_box(run_experiment(&engine, &store.test, &cfg).unwrap());
            }))
        });
    }
    group.finish();
}

criterion_group!(benches, training_epoch, ball_scan, batch_queries);
criterion_main!(benches);
