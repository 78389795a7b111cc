//! Flat `key = value` pipeline configuration.
//!
//! Every key has a documented default. Files may set any subset; unknown
//! keys are errors. Values are validated when a command reads them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// `(key, default, description)` for every recognised key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "seed for splitting, initialization, noise and shuffling"),
    ("threads", "0", "worker threads, 0 = one per core"),
    ("run.dir", "run", "directory holding artifacts and reports"),
    ("corpus.path", "", "class-per-directory tree or a JSON-lines file"),
    ("corpus.format", "auto", "auto | dirs | jsonl"),
    ("corpus.test_path", "", "separate query corpus; empty = split corpus.path"),
    ("corpus.test_fraction", "0.1", "share of corpus.path held out as queries"),
    ("textpipe.min_df_frac", "0.00001", "keep words in more than this share of documents"),
    ("textpipe.max_df_frac", "0.9", "keep words in fewer than this share of documents"),
    ("textpipe.top_n", "10000", "vocabulary size after pruning"),
    ("train.encoder", "500,500,20", "encoder layer sizes after the input; decoder mirrors them"),
    ("train.epochs", "20", "training epochs"),
    ("train.batch_size", "256", "minibatch size"),
    ("train.noise_sigma", "2.0", "std-dev of the Gaussian input corruption"),
    ("train.loss", "bce", "bce | mse"),
    ("train.rho", "0.95", "adadelta decay"),
    ("train.epsilon", "0.000001", "adadelta stabilizer"),
    ("train.learning_rate", "1.0", "multiplier on the adadelta update"),
    ("train.pretrain", "false", "initialize from a stack of CD1-trained RBMs"),
    ("rbm.epochs", "10", "CD1 epochs per RBM"),
    ("rbm.batch_size", "64", "CD1 minibatch size"),
    ("rbm.learning_rate", "0.1", "CD1 learning rate"),
    ("rbm.init_scale", "0.01", "std-dev of initial RBM weights"),
    ("hash.threshold", "0.5", "bottleneck probabilities above this become 1-bits"),
    ("hash.radius", "2", "initial hamming radius"),
    ("hash.min_count", "0", "grow the radius until this many documents are preselected"),
    ("hash.max_radius", "2", "largest radius tried"),
    ("hash.strategy", "auto", "auto | generative | scan"),
    ("query.variant", "tfidf", "tfidf | gsa | prf | gsa+prf | reconstruction"),
    ("query.alpha", "1.0", "GSA step multiplier"),
    ("query.sigma", "", "GSA noise scale; empty = train.noise_sigma"),
    ("query.prf_k", "5", "feedback documents for PRF"),
    ("query.prf_scope", "preselection", "preselection | corpus"),
    ("query.depth", "100", "results returned per query"),
    ("eval.k", "100", "largest precision cutoff"),
    ("eval.variants", "tfidf,gsa,prf,gsa+prf,reconstruction", "variants compared by eval"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    values: BTreeMap<String, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

impl PipelineConfig {
    /// Applies a config file on top of the current values.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.merge_str(&text)
            .with_context(|| format!("in config {}", path.display()))
    }

    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                bail!("line {}: {key} is set twice", n + 1);
            }
            self.set(key, value.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("override {pair:?} is not key=value"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            bail!("unknown config key {key:?}");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("config key {key} is not declared"))
    }

    pub fn get<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| anyhow!("config {key} = {raw:?}: {e}"))
    }

    pub fn list<T>(&self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| anyhow!("config {key}: {s:?}: {e}")))
            .collect()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let raw = self.raw(key);
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    pub fn run_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("run.dir"))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// The resolved configuration in file syntax, keys sorted.
impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_key() {
        let c = PipelineConfig::default();
        assert_eq!(c.entries().count(), KEYS.len());
        assert_eq!(c.get::<usize>("train.epochs").unwrap(), 20);
        assert_eq!(c.get::<usize>("train.batch_size").unwrap(), 256);
        assert_eq!(c.get::<f64>("train.noise_sigma").unwrap(), 2.0);
        assert_eq!(c.list::<usize>("train.encoder").unwrap(), vec![500, 500, 20]);
        assert_eq!(c.get::<usize>("textpipe.top_n").unwrap(), 10000);
    }

    #[test]
    fn file_syntax_and_overrides() {
        let mut c = PipelineConfig::default();
        c.merge_str("# comment\n\ntrain.epochs = 3\n hash.radius=1 \n").unwrap();
        assert_eq!(c.raw("train.epochs"), "3");
        assert_eq!(c.raw("hash.radius"), "1");
        c.set_pair("train.epochs=7").unwrap();
        assert_eq!(c.get::<u32>("train.epochs").unwrap(), 7);
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = PipelineConfig::default();
        assert!(c.merge_str("train.epoch = 3").is_err());
        assert!(c.merge_str("no equals sign").is_err());
        assert!(c.merge_str("seed = 1\nseed = 2").is_err());
        assert!(c.set_pair("seed").is_err());
        c.set("seed", "x").unwrap();
        assert!(c.get::<u64>("seed").is_err());
    }

    #[test]
    fn display_round_trips() {
        let mut c = PipelineConfig::default();
        c.set("query.variant", "gsa+prf").unwrap();
        let mut d = PipelineConfig::default();
        d.merge_str(&c.to_string()).unwrap();
        assert_eq!(c, d);
    }
}
