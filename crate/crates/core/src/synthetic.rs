//! Seeded synthetic data: a class-skewed multinomial text corpus and the
//! bars-and-stripes binary patterns.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::autoencoder::{train, NetworkParams, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{run_experiment, EvalConfig, EvalReport};
use crate::retrieval::{build_index, Engine, QueryConfig};
use crate::textpipe::{Corpus, DocId, Document, Tokenizer, VectorStore, VocabConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub docs_per_class: usize,
    pub vocab_size: usize,
    /// Number of words in each class's topic set; sets do not overlap and
    /// are interleaved across frequency ranks.
    pub topic_words: usize,
    /// Background word `r` (0-based rank) has weight `1 / (r + 1 + offset)^exponent`.
    pub zipf_exponent: f64,
    pub zipf_offset: f64,
    /// Probability that a token comes from the class topic block rather than
    /// the uniform background.
    pub skew: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            docs_per_class: 250,
            vocab_size: 200,
            topic_words: 40,
            zipf_exponent: 1.0,
            zipf_offset: 20.0,
            skew: 0.25,
            min_len: 40,
            max_len: 120,
        }
    }
}

/// Distinct lowercase pseudo-words of the form consonant-vowel-consonant-vowel
/// (plus a suffix syllable when more are needed), skipping stopwords.
pub fn pseudo_words(n: usize) -> Vec<String> {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let stop = Tokenizer::english();
    let syllables: Vec<String> = C
        .iter()
        .flat_map(|&c| V.iter().map(move |&v| format!("{}{}", c as char, v as char)))
        .collect();
    let mut words = Vec::with_capacity(n);
    let mut i = 0usize;
    while words.len() < n {
        let s = syllables.len();
        let mut w = format!("{}{}", syllables[i % s], syllables[(i / s) % s]);
        if i >= s * s {
            w.push_str(&syllables[(i / (s * s)) % s]);
        }
        i += 1;
        if !stop.stopwords().contains(&w) {
            words.push(w);
        }
    }
    words
}

/// Topic words of `class`: every `stride`-th word starting at `class`, where
/// `stride = vocab_size / topic_words`.
pub fn topic_set(cfg: &SyntheticConfig, class: usize) -> Vec<usize> {
    let stride = cfg.vocab_size / cfg.topic_words.max(1);
    (0..cfg.topic_words).map(|i| class + i * stride).collect()
}

/// Documents drawn from `(1 - skew)·zipf + skew·uniform(topic set of the
/// class)`. Words outside every topic set are background only. Ids run from
/// `first_id`, classes interleaved so that any prefix is balanced.
pub fn class_corpus(cfg: &SyntheticConfig, first_id: DocId, seed: u64) -> Result<Corpus> {
    if cfg.classes == 0 || cfg.vocab_size == 0 || cfg.docs_per_class == 0 {
        return Err(Error::invalid("synthetic corpus needs classes, words and documents"));
    }
    if cfg.topic_words == 0 || cfg.classes > cfg.vocab_size / cfg.topic_words {
        return Err(Error::invalid("topic sets do not fit the vocabulary"));
    }
    if !(0.0..=1.0).contains(&cfg.skew) || cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::invalid("bad skew or document length range"));
    }
    let words = pseudo_words(cfg.vocab_size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf: Vec<f64> = (0..cfg.vocab_size)
        .map(|r| (r as f64 + 1.0 + cfg.zipf_offset).powf(-cfg.zipf_exponent))
        .collect();
    let zipf_total: f64 = zipf.iter().sum();
    let dists: Vec<WeightedIndex<f64>> = (0..cfg.classes)
        .map(|c| {
            let mut weights: Vec<f64> = zipf.iter().map(|z| (1.0 - cfg.skew) * z / zipf_total).collect();
            for w in topic_set(cfg, c) {
                weights[w] += cfg.skew / cfg.topic_words as f64;
            }
            WeightedIndex::new(weights).map_err(|e| Error::invalid(e.to_string()))
        })
        .collect::<Result<_>>()?;

    let mut docs = Vec::with_capacity(cfg.classes * cfg.docs_per_class);
    for i in 0..cfg.docs_per_class * cfg.classes {
        let label = i % cfg.classes;
        let len = rng.random_range(cfg.min_len..=cfg.max_len);
        let text: Vec<&str> = (0..len).map(|_| words[dists[label].sample(&mut rng)].as_str()).collect();
        docs.push(Document {
            id: first_id + i as DocId,
            label: label as u32,
            text: text.join(" "),
        });
    }
    let mut corpus = Corpus::from_documents(docs)?;
    corpus.label_names = (0..cfg.classes).map(|c| format!("class{c}")).collect();
    Ok(corpus)
}

/// All `2 * 2^n - 2` distinct bars-and-stripes patterns on an `n × n` grid:
/// every subset of rows lit, or every subset of columns lit, with the empty
/// and full grids counted once.
pub fn bars_and_stripes(n: usize) -> Vec<Vec<f64>> {
    assert!((1..=8).contains(&n), "grid side must be in 1..=8");
    let mut out: Vec<Vec<f64>> = Vec::new();
    for horizontal in [true, false] {
        for mask in 0u32..(1 << n) {
            let p: Vec<f64> = (0..n * n)
                .map(|cell| {
                    let line = if horizontal { cell / n } else { cell % n };
                    f64::from((mask >> line) & 1)
                })
                .collect();
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// `count` patterns sampled uniformly with replacement from
/// [`bars_and_stripes`].
pub fn sample_bars_and_stripes(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let all = bars_and_stripes(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| all.choose(&mut rng).expect("non-empty").clone()).collect()
}

/// End-to-end retrieval experiment on [`class_corpus`] data: separate seeded
/// train and query corpora, one network, one report.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExperiment {
    pub corpus: SyntheticConfig,
    pub queries_per_class: usize,
    /// Encoder dims after the input layer, e.g. `[64, 64, 12]`.
    pub encoder: Vec<usize>,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for SyntheticExperiment {
    fn default() -> Self {
        let train = TrainConfig {
            epochs: 50,
            batch_size: 8,
            noise_sigma: 0.1,
            ..TrainConfig::default()
        };
        let mut eval = EvalConfig::default();
        eval.query.gsa_sigma = train.noise_sigma;
        Self {
            corpus: SyntheticConfig::default(),
            queries_per_class: 50,
            encoder: vec![64, 64, 12],
            train,
            eval,
        }
    }
}

pub struct ExperimentRun {
    pub store: VectorStore,
    pub engine: Engine,
    pub epoch_loss: Vec<f64>,
    pub report: EvalReport,
}

/// Query documents get ids from here up, clear of the training ids.
pub const QUERY_ID_BASE: DocId = 1 << 40;

impl SyntheticExperiment {
    pub fn query_config(&self) -> &QueryConfig {
        &self.eval.query
    }

    /// Builds corpora, trains, indexes and evaluates; fully determined by
    /// `seed` and the configuration.
    pub fn run(&self, seed: u64) -> Result<ExperimentRun> {
        let train_docs = class_corpus(&self.corpus, 0, seed)?;
        let query_cfg = SyntheticConfig {
            docs_per_class: self.queries_per_class,
            ..self.corpus
        };
        let queries = class_corpus(&query_cfg, QUERY_ID_BASE, seed ^ 0x5eed_0f9e)?;
        let vocab = VocabConfig {
            top_n: self.corpus.vocab_size,
            ..VocabConfig::default()
        };
        let store = VectorStore::build(&train_docs, &queries, &vocab)?;
        let dims = {
            let mut encoder = vec![store.dim()];
            encoder.extend_from_slice(&self.encoder);
            NetworkParams::mirrored_dims(&encoder)
        };
        let net = NetworkParams::init(&dims, seed)?;
        let tcfg = TrainConfig { seed, ..self.train };
        let outcome = train(net, &store.network_inputs(), &tcfg)?;
        let index = build_index(&store, &outcome.net, self.eval.query.threshold)?;
        let engine = Engine::new(&store, outcome.net, index)?;
        let report = run_experiment(&engine, &store.test, &self.eval)?;
        Ok(ExperimentRun {
            store,
            engine,
            epoch_loss: outcome.epoch_loss,
            report,
        })
    }
}
