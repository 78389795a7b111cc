//! The five pipeline stages plus artifact inspection.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use semhash::autoencoder::{train, AdadeltaConfig, Loss, NetworkParams, TrainConfig};
use semhash::codec::{write_atomic, Artifact, IndexJson, RbmStack};
use semhash::eval::{export_report, run_experiment, EvalConfig};
use semhash::hashindex::{HammingIndex, PreselectConfig, Strategy};
use semhash::rbm::{pretrain_stack, unroll, RbmTrainConfig};
use semhash::retrieval::{build_index, Engine, PrfScope, QueryConfig, RankedResult, Variant};
use semhash::textpipe::{Corpus, DocId, SparseVector, VectorStore, VocabConfig};
use serde_json::json;

use crate::config::PipelineConfig;

pub const STORE_FILE: &str = "store.bin";
pub const NETWORK_FILE: &str = "network.bin";
pub const RBM_FILE: &str = "rbm.bin";
pub const INDEX_FILE: &str = "index.bin";
pub const CONFIG_FILE: &str = "config.resolved";

fn artifact(cfg: &PipelineConfig, file: &str) -> PathBuf {
    cfg.run_dir().join(file)
}

/// Loads a prior stage's artifact, naming the producing command if absent.
fn load<T: Artifact>(cfg: &PipelineConfig, file: &str, producer: &str) -> Result<T> {
    let path = artifact(cfg, file);
    if !path.exists() {
        bail!(
            "missing {}: run `semhash {producer}` first",
            path.display()
        );
    }
    T::load(&path).with_context(|| format!("loading {}", path.display()))
}

fn save<T: Artifact>(cfg: &PipelineConfig, file: &str, value: &T) -> Result<PathBuf> {
    let path = artifact(cfg, file);
    value.save(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Creates the run directory and stores the resolved configuration in it.
pub fn prepare_run_dir(cfg: &PipelineConfig) -> Result<()> {
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join(CONFIG_FILE), cfg.to_string().as_bytes())?;
    Ok(())
}

fn read_corpus(path: &Path, format: &str, first_id: DocId) -> Result<Corpus> {
    let dirs = match format {
        "dirs" => true,
        "jsonl" => false,
        "auto" => path.is_dir(),
        other => bail!("unknown corpus.format {other:?}"),
    };
    let corpus = if dirs {
        Corpus::from_class_dirs(path, first_id)
    } else {
        Corpus::from_jsonl(path)
    };
    corpus.with_context(|| format!("reading corpus {}", path.display()))
}

pub fn ingest(cfg: &PipelineConfig) -> Result<PathBuf> {
    let path = cfg
        .path("corpus.path")
        .ok_or_else(|| anyhow!("corpus.path is not set"))?;
    let format = cfg.raw("corpus.format");
    let corpus = read_corpus(&path, format, 0)?;
    let (train, test) = match cfg.path("corpus.test_path") {
        Some(test_path) => {
            let first = corpus.max_id().map_or(0, |m| m + 1);
            let test = read_corpus(&test_path, format, first)?;
            let train_ids: std::collections::HashSet<DocId> = corpus.docs.iter().map(|d| d.id).collect();
            if let Some(d) = test.docs.iter().find(|d| train_ids.contains(&d.id)) {
                bail!("document id {} appears in both corpus.path and corpus.test_path", d.id);
            }
            if !test.label_names.is_empty() && !corpus.label_names.is_empty() && test.label_names != corpus.label_names {
                bail!("corpus.test_path classes differ from corpus.path classes");
            }
            (corpus, test)
        }
        None => corpus.split(cfg.get("corpus.test_fraction")?, cfg.get("seed")?)?,
    };
    let vocab = VocabConfig {
        min_df_frac: cfg.get("textpipe.min_df_frac")?,
        max_df_frac: cfg.get("textpipe.max_df_frac")?,
        top_n: cfg.get("textpipe.top_n")?,
    };
    let store = VectorStore::build(&train, &test, &vocab)?;
    eprintln!(
        "ingested {} training and {} query documents, {} features",
        store.train.len(),
        store.test.len(),
        store.dim()
    );
    save(cfg, STORE_FILE, &store)
}

fn train_config(cfg: &PipelineConfig) -> Result<TrainConfig> {
    Ok(TrainConfig {
        epochs: cfg.get("train.epochs")?,
        batch_size: cfg.get("train.batch_size")?,
        noise_sigma: cfg.get("train.noise_sigma")?,
        seed: cfg.get("seed")?,
        loss: cfg.get::<Loss>("train.loss")?,
        optimizer: AdadeltaConfig {
            rho: cfg.get("train.rho")?,
            epsilon: cfg.get("train.epsilon")?,
            learning_rate: cfg.get("train.learning_rate")?,
        },
    })
}

pub fn train_stage(cfg: &PipelineConfig) -> Result<PathBuf> {
    let store: VectorStore = load(cfg, STORE_FILE, "ingest")?;
    let mut dims = vec![store.dim()];
    dims.extend(cfg.list::<usize>("train.encoder")?);
    let tcfg = train_config(cfg)?;
    let data = store.network_inputs();
    let net = if cfg.get::<bool>("train.pretrain")? {
        let rbm_cfg = RbmTrainConfig {
            epochs: cfg.get("rbm.epochs")?,
            batch_size: cfg.get("rbm.batch_size")?,
            learning_rate: cfg.get("rbm.learning_rate")?,
            init_scale: cfg.get("rbm.init_scale")?,
            seed: tcfg.seed,
        };
        let stack = RbmStack(pretrain_stack(&dims, &data, &rbm_cfg)?);
        save(cfg, RBM_FILE, &stack)?;
        unroll(&stack.0)?
    } else {
        NetworkParams::init(&NetworkParams::mirrored_dims(&dims), tcfg.seed)?
    };
    let outcome = train(net, &data, &tcfg)?;
    for (epoch, loss) in outcome.epoch_loss.iter().enumerate() {
        eprintln!("epoch {:>3}  loss {loss:.6}", epoch + 1);
    }
    save(cfg, NETWORK_FILE, &outcome.net)
}

pub fn index(cfg: &PipelineConfig) -> Result<PathBuf> {
    let store: VectorStore = load(cfg, STORE_FILE, "ingest")?;
    let net: NetworkParams = load(cfg, NETWORK_FILE, "train")?;
    let index = build_index(&store, &net, cfg.get("hash.threshold")?)?;
    eprintln!(
        "indexed {} documents into {} buckets of {} bits",
        index.len(),
        index.bucket_count(),
        index.width()
    );
    save(cfg, INDEX_FILE, &index)
}

pub fn query_config(cfg: &PipelineConfig) -> Result<QueryConfig> {
    let sigma = match cfg.raw("query.sigma") {
        "" => cfg.get("train.noise_sigma")?,
        _ => cfg.get("query.sigma")?,
    };
    Ok(QueryConfig {
        preselect: PreselectConfig {
            radius: cfg.get("hash.radius")?,
            min_count: cfg.get("hash.min_count")?,
            max_radius: cfg.get("hash.max_radius")?,
            strategy: cfg.get::<Strategy>("hash.strategy")?,
        },
        depth: cfg.get("query.depth")?,
        prf_k: cfg.get("query.prf_k")?,
        gsa_alpha: cfg.get("query.alpha")?,
        gsa_sigma: sigma,
        variant: cfg.get::<Variant>("query.variant")?,
        prf_scope: cfg.get::<PrfScope>("query.prf_scope")?,
        threshold: cfg.get("hash.threshold")?,
    })
}

fn engine(cfg: &PipelineConfig) -> Result<(VectorStore, Engine)> {
    let store: VectorStore = load(cfg, STORE_FILE, "ingest")?;
    let net: NetworkParams = load(cfg, NETWORK_FILE, "train")?;
    let index: HammingIndex = load(cfg, INDEX_FILE, "index")?;
    let engine = Engine::new(&store, net, index)?;
    Ok((store, engine))
}

/// What to search for.
pub enum QueryInput {
    Text(String),
    Doc(DocId),
}

pub fn query(cfg: &PipelineConfig, input: &QueryInput, out: &mut impl Write) -> Result<()> {
    let (store, engine) = engine(cfg)?;
    let qcfg = query_config(cfg)?;
    let (vector, query_id): (SparseVector, Option<DocId>) = match input {
        QueryInput::Text(text) => (store.vectorizer().tfidf(text), None),
        QueryInput::Doc(id) => {
            let doc = store
                .find(*id)
                .ok_or_else(|| anyhow!("document {id} is not in the vector store"))?;
            (doc.vector.clone(), Some(*id))
        }
    };
    let result = engine.search_vector(&vector, query_id, &qcfg)?;
    if let Some(note) = &result.diagnostic {
        eprintln!("{note}");
    }
    writeln!(out, "{}", result_json(&engine, query_id, &result))?;
    Ok(())
}

pub fn result_json(engine: &Engine, query_id: Option<DocId>, r: &RankedResult) -> serde_json::Value {
    json!({
        "query_id": query_id,
        "variant": r.variant.as_str(),
        "radius": r.radius,
        "preselection_size": r.preselection_size(),
        "results": r.results.iter().map(|s| json!({
            "doc_id": s.doc,
            "score": s.score,
            "label": engine.label(s.doc),
        })).collect::<Vec<_>>(),
    })
}

pub fn eval(cfg: &PipelineConfig) -> Result<(PathBuf, PathBuf)> {
    let (store, engine) = engine(cfg)?;
    if store.test.is_empty() {
        bail!("the vector store has no query documents; set corpus.test_fraction or corpus.test_path and rerun `semhash ingest`");
    }
    let ecfg = EvalConfig {
        k: cfg.get("eval.k")?,
        variants: cfg.list::<Variant>("eval.variants")?,
        query: query_config(cfg)?,
    };
    let mut report = run_experiment(&engine, &store.test, &ecfg)?;
    report.config = cfg.entries().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    eprintln!(
        "{} queries, density {:.4}, mean preselection {:.1}, {} empty",
        report.query_count,
        report.density(),
        report.mean_preselection_size,
        report.empty_preselections
    );
    for c in &report.curves {
        let k10 = 10.min(report.k);
        eprintln!("{:>15}  p@{k10} {:.4}", c.variant.as_str(), c.at(k10));
    }
    Ok(export_report(&report, &cfg.run_dir())?)
}

/// JSON dump of one artifact.
pub fn inspect(cfg: &PipelineConfig, what: &str, out: &mut impl Write) -> Result<()> {
    let text = match what {
        "store" => semhash::codec::to_json(&load::<VectorStore>(cfg, STORE_FILE, "ingest")?)?,
        "network" => semhash::codec::to_json(&load::<NetworkParams>(cfg, NETWORK_FILE, "train")?)?,
        "rbm" => semhash::codec::to_json(&load::<RbmStack>(cfg, RBM_FILE, "train (with train.pretrain = true)")?)?,
        "index" => semhash::codec::to_json(&IndexJson::from(&load::<HammingIndex>(cfg, INDEX_FILE, "index")?))?,
        other => bail!("unknown artifact {other:?}; expected store, network, rbm or index"),
    };
    writeln!(out, "{text}")?;
    Ok(())
}
