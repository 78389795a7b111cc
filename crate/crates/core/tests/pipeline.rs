use std::collections::HashSet;

use semhash::autoencoder::{train, NetworkParams, TrainConfig};
use semhash::eval::{run_experiment, EvalConfig};
use semhash::hashindex::{binarize, HammingIndex};
use semhash::retrieval::{build_index, Engine, QueryConfig, Variant};
use semhash::synthetic::{class_corpus, SyntheticConfig};
use semhash::textpipe::{Corpus, Document, VectorStore, VocabConfig};

fn small_store(classes: usize, seed: u64) -> VectorStore {
    let cfg = SyntheticConfig {
        classes,
        docs_per_class: 30,
        ..SyntheticConfig::default()
    };
    let train = class_corpus(&cfg, 0, seed).unwrap();
    let test = class_corpus(&SyntheticConfig { docs_per_class: 5, ..cfg }, 10_000, seed + 1).unwrap();
    VectorStore::build(&train, &test, &VocabConfig { top_n: 200, ..VocabConfig::default() }).unwrap()
}

fn engine(store: &VectorStore, epochs: usize) -> Engine {
    let dims = NetworkParams::mirrored_dims(&[store.dim(), 16, 8]);
    let cfg = TrainConfig {
        epochs,
        batch_size: 8,
        noise_sigma: 0.1,
        ..TrainConfig::default()
    };
    let net = train(NetworkParams::init(&dims, 7).unwrap(), &store.network_inputs(), &cfg).unwrap().net;
    let index = build_index(store, &net, 0.5).unwrap();
    Engine::new(store, net, index).unwrap()
}

fn wide_config() -> QueryConfig {
    let mut q = QueryConfig {
        gsa_sigma: 0.1,
        ..QueryConfig::default()
    };
    q.preselect.radius = 8;
    q.preselect.max_radius = 8;
    q
}

#[test]
fn query_document_ranks_itself_first() {
    let store = small_store(4, 1);
    let engine = engine(&store, 3);
    let cfg = wide_config();
    for d in store.train.iter().take(20) {
        let r = engine.search_vector(&d.vector, Some(d.id), &cfg).unwrap();
        assert_eq!(r.results[0].doc, d.id);
        assert!((r.results[0].score - 1.0).abs() < 1e-12);
    }
}

#[test]
fn gsa_with_zero_alpha_is_tfidf() {
    let store = small_store(4, 2);
    let engine = engine(&store, 5);
    let mut cfg = wide_config();
    cfg.gsa_alpha = 0.0;
    for q in &store.test {
        let r = engine
            .search_variants(&q.vector, Some(q.id), &cfg, &[Variant::Tfidf, Variant::Gsa, Variant::Prf, Variant::GsaPrf])
            .unwrap();
        assert_eq!(r[0].results, r[1].results);
        assert_eq!(r[2].results, r[3].results);
    }
}

#[test]
fn augmentation_never_changes_the_preselection() {
    let store = small_store(4, 3);
    let engine = engine(&store, 5);
    let mut cfg = QueryConfig {
        gsa_sigma: 0.1,
        ..QueryConfig::default()
    };
    cfg.preselect.radius = 1;
    cfg.preselect.max_radius = 1;
    for q in &store.test {
        let r = engine.search_variants(&q.vector, Some(q.id), &cfg, &Variant::ALL).unwrap();
        for v in &r[1..] {
            assert_eq!(v.preselection, r[0].preselection);
            assert_eq!(v.code, r[0].code);
            let pool: HashSet<_> = r[0].preselection.iter().collect();
            assert!(v.results.iter().all(|s| pool.contains(&s.doc)));
        }
    }
}

#[test]
fn results_are_sorted_with_id_tiebreak() {
    let store = small_store(4, 4);
    let engine = engine(&store, 2);
    let cfg = wide_config();
    for q in &store.test {
        for r in engine.search_variants(&q.vector, Some(q.id), &cfg, &Variant::ALL).unwrap() {
            for w in r.results.windows(2) {
                assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].doc < w[1].doc));
            }
        }
    }
}

#[test]
fn search_from_text_matches_search_from_vector() {
    let store = small_store(4, 5);
    let engine = engine(&store, 2);
    let text = "babe dabe kabe babe";
    let cfg = wide_config();
    let a = engine.search(text, None, &cfg).unwrap();
    let b = engine.search_vector(&store.vectorizer().tfidf(text), None, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_class_corpus_gives_perfect_curves() {
    let docs: Vec<Document> = (0..12)
        .map(|i| Document {
            id: i,
            label: 0,
            text: format!("alpha beta gamma{} delta{}", "x".repeat(i as usize % 3), i % 4),
        })
        .collect();
    let corpus = Corpus::from_documents(docs).unwrap();
    let query = Corpus::from_documents(vec![Document {
        id: 100,
        label: 0,
        text: "alpha delta1".into(),
    }])
    .unwrap();
    let vocab = VocabConfig {
        min_df_frac: 0.0,
        max_df_frac: 1.0,
        top_n: 100,
    };
    let store = VectorStore::build(&corpus, &query, &vocab).unwrap();
    let engine = engine(&store, 1);
    let mut cfg = EvalConfig {
        query: wide_config(),
        ..EvalConfig::default()
    };
    cfg.query.preselect.radius = 0;
    cfg.query.preselect.min_count = 1;
    cfg.query.preselect.max_radius = 8;
    let report = run_experiment(&engine, &store.test, &cfg).unwrap();
    assert_eq!(report.curves.len(), 5);
    for c in &report.curves {
        assert_eq!(c.precision.len(), 100);
        assert!(c.precision.iter().all(|&p| p == 1.0), "{}", c.variant);
        assert_eq!(c.density, 1.0);
    }
}

#[test]
fn experiment_is_deterministic_and_order_free() {
    let store = small_store(3, 6);
    let engine = engine(&store, 3);
    let mut cfg = EvalConfig {
        query: wide_config(),
        ..EvalConfig::default()
    };
    cfg.variants = vec![Variant::Tfidf, Variant::Gsa];
    cfg.query.gsa_alpha = 0.0;
    let a = run_experiment(&engine, &store.test, &cfg).unwrap();
    let b = run_experiment(&engine, &store.test, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.curves[0].precision, a.curves[1].precision);

    let mut reversed = store.test.clone();
    reversed.reverse();
    let c = run_experiment(&engine, &reversed, &cfg).unwrap();
    for (x, y) in a.curves.iter().zip(&c.curves) {
        for (p, q) in x.precision.iter().zip(&y.precision) {
            assert!((p - q).abs() < 1e-12);
        }
    }
    let weighted: f64 = a.queries.iter().map(|q| q.density() * q.preselection_size as f64).sum::<f64>()
        / a.queries.iter().map(|q| q.preselection_size as f64).sum::<f64>();
    assert!((weighted - a.density()).abs() < 1e-12);
}

#[test]
fn empty_preselection_counts_as_zero() {
    let store = small_store(4, 7);
    let trained = engine(&store, 2);
    let net = trained.net().clone();
    let q = &store.test[0];
    let query_code = binarize(&net.encode(&store.scaling.scale(&q.vector)).unwrap(), 0.5);
    let mut far = query_code.clone();
    for bit in 0..far.width() {
        far.flip(bit);
    }
    let index = HammingIndex::build(far.width(), store.train.iter().map(|d| (d.id, far.clone())).collect()).unwrap();
    let engine = Engine::new(&store, net, index).unwrap();

    let mut cfg = EvalConfig {
        query: wide_config(),
        ..EvalConfig::default()
    };
    cfg.query.preselect.radius = 0;
    cfg.query.preselect.max_radius = 0;
    let r = engine.search_vector(&q.vector, Some(q.id), &cfg.query).unwrap();
    assert!(r.preselection.is_empty() && r.results.is_empty());
    assert!(r.diagnostic.is_some());

    let report = run_experiment(&engine, &store.test[..1], &cfg).unwrap();
    assert_eq!(report.empty_preselections, 1);
    assert_eq!(report.query_count, 1);
    assert!(report.curves.iter().all(|c| c.precision.iter().all(|&p| p == 0.0)));
}
