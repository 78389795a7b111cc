use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::SparseVector;
use crate::error::{Error, Result};

/// Document-frequency bounds and size cap used when building a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabConfig {
    /// Tokens must occur in strictly more than `min_df_frac * |D|` documents.
    pub min_df_frac: f64,
    /// Tokens must occur in strictly fewer than `max_df_frac * |D|` documents.
    pub max_df_frac: f64,
    /// Keep at most this many tokens, by total corpus frequency.
    pub top_n: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            min_df_frac: 0.00001,
            max_df_frac: 0.9,
            top_n: 10_000,
        }
    }
}

/// Token to feature-id mapping together with the document frequencies the
/// TF-IDF weights need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    doc_freq: Vec<u64>,
    num_docs: u64,
    ids: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    num_docs: u64,
    tokens: Vec<String>,
    doc_freq: Vec<u64>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.tokens, r.doc_freq, r.num_docs)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            num_docs: v.num_docs,
            tokens: v.tokens,
            doc_freq: v.doc_freq,
        }
    }
}

impl Vocabulary {
    /// Builds a vocabulary from tokenized documents.
    ///
    /// Retained tokens satisfy `min_df_frac·|D| < |D_w| < max_df_frac·|D|`; of
    /// those the `top_n` most frequent (ties broken lexicographically) are
    /// kept. Feature ids follow lexicographic token order.
    pub fn build<D: AsRef<[String]>>(docs: &[D], cfg: &VocabConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Empty("vocabulary corpus"));
        }
        if !(0.0 <= cfg.min_df_frac && cfg.min_df_frac < cfg.max_df_frac && cfg.max_df_frac <= 1.0)
        {
            return Err(Error::invalid(format!(
                "document frequency bounds must satisfy 0 <= min < max <= 1, got ({}, {})",
                cfg.min_df_frac, cfg.max_df_frac
            )));
        }
        if cfg.top_n == 0 {
            return Err(Error::invalid("top_n must be at least 1"));
        }

        // token -> (document frequency, total frequency)
        let mut stats: HashMap<&str, (u64, u64)> = HashMap::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (d, doc) in docs.iter().enumerate() {
            for tok in doc.as_ref() {
                let e = stats.entry(tok.as_str()).or_insert((0, 0));
                e.1 += 1;
                let last = seen.entry(tok.as_str()).or_insert(usize::MAX);
                if *last != d {
                    *last = d;
                    e.0 += 1;
                }
            }
        }

        let n = docs.len() as f64;
        let lo = cfg.min_df_frac * n;
        let hi = cfg.max_df_frac * n;
        let mut kept: Vec<(&str, u64, u64)> = stats
            .into_iter()
            .filter(|&(_, (df, _))| (df as f64) > lo && (df as f64) < hi)
            .map(|(t, (df, tf))| (t, df, tf))
            .collect();
        if kept.is_empty() {
            return Err(Error::OverPruned {
                documents: docs.len(),
            });
        }
        kept.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(b.0)));
        kept.truncate(cfg.top_n);
        kept.sort_by(|a, b| a.0.cmp(b.0));

        let tokens = kept.iter().map(|k| k.0.to_string()).collect();
        let doc_freq = kept.iter().map(|k| k.1).collect();
        Ok(Self::from_parts(tokens, doc_freq, docs.len() as u64))
    }

    pub(crate) fn from_parts(tokens: Vec<String>, doc_freq: Vec<u64>, num_docs: u64) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            tokens,
            doc_freq,
            num_docs,
            ids,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.doc_freq.len() || self.ids.len() != self.tokens.len() {
            return Err(Error::Format("vocabulary token/frequency lengths differ".into()));
        }
        if self
            .doc_freq
            .iter()
            .any(|&df| df == 0 || df > self.num_docs)
        {
            return Err(Error::Format("vocabulary document frequency out of range".into()));
        }
        Ok(())
    }

    /// Number of features `V`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Corpus size `|D|` the frequencies were counted over.
    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freq(&self, feature: u32) -> u64 {
        self.doc_freq[feature as usize]
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// In-vocabulary occurrence counts of `tokens`.
    pub fn count_vector(&self, tokens: &[String]) -> SparseVector {
        let mut counts: Vec<(u32, f64)> = Vec::new();
        let mut ids: Vec<u32> = tokens.iter().filter_map(|t| self.id(t)).collect();
        ids.sort_unstable();
        for id in ids {
            match counts.last_mut() {
                Some(last) if last.0 == id => last.1 += 1.0,
                _ => counts.push((id, 1.0)),
            }
        }
        SparseVector::from_sorted_unchecked(self.len(), counts)
    }

    /// Inverse document frequency `ln(|D| / |D_w|)`.
    pub fn idf(&self, feature: u32) -> f64 {
        (self.num_docs as f64 / self.doc_freq(feature) as f64).ln()
    }

    /// TF-IDF weights `c(w)/W · ln(|D|/|D_w|)` with `W` the in-vocabulary
    /// token count. Zero weights (ubiquitous features) are dropped; an empty
    /// count vector maps to an empty vector.
    pub fn tfidf(&self, counts: &SparseVector) -> SparseVector {
        let total: f64 = counts.entries().iter().map(|e| e.1).sum();
        if total <= 0.0 {
            return SparseVector::empty(self.len());
        }
        let entries = counts
            .entries()
            .iter()
            .map(|&(id, c)| (id, c / total * self.idf(id)))
            .filter(|e| e.1 > 0.0)
            .collect();
        SparseVector::from_sorted_unchecked(self.len(), entries)
    }
}

/// Per-corpus statistics used to map TF-IDF weights into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub max_weight: f64,
}

impl ScalingStats {
    pub fn new(max_weight: f64) -> Result<Self> {
        if !(max_weight > 0.0) || !max_weight.is_finite() {
            return Err(Error::invalid(format!(
                "scaling maximum must be positive and finite, got {max_weight}"
            )));
        }
        Ok(Self { max_weight })
    }

    /// Largest weight over a set of training vectors.
    pub fn fit<'a>(vectors: impl IntoIterator<Item = &'a SparseVector>) -> Result<Self> {
        let m = vectors
            .into_iter()
            .flat_map(|v| v.entries().iter().map(|e| e.1))
            .fold(0.0_f64, f64::max);
        Self::new(m)
    }

    /// Dense network input: `min(weight / m, 1)`.
    pub fn scale(&self, v: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; v.dim()];
        for &(i, w) in v.entries() {
            out[i as usize] = (w / self.max_weight).clamp(0.0, 1.0);
        }
        out
    }

    /// Maps a network-space vector back to TF-IDF space.
    pub fn unscale(&self, dense: &[f64]) -> SparseVector {
        SparseVector::from_dense_filtered(dense, |v| v > 0.0).scaled(self.max_weight)
    }
}

/// Dense `[0,1]^V` input for the network; errors when `m <= 0`.
pub fn scale_for_network(v: &SparseVector, scale: &ScalingStats) -> Result<Vec<f64>> {
    if !(scale.max_weight > 0.0) {
        return Err(Error::invalid("scaling maximum must be positive"));
    }
    Ok(scale.scale(v))
}
