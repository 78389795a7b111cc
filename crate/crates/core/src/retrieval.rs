//! Query pipeline: hamming preselection followed by cosine ranking, with
//! optional pseudo-relevance feedback (PRF), gradient search augmentation
//! (GSA) and reconstruction search.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autoencoder::NetworkParams;
use crate::error::{Error, Result};
use crate::hashindex::{binarize, BinaryCode, HammingIndex, PreselectConfig, Preselection};
use crate::par;
use crate::textpipe::{DocId, Label, ScalingStats, SparseVector, StoredDoc, VectorStore, Vectorizer};

/// `a·b / (‖a‖‖b‖)`, or 0 when either vector is zero.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub doc: DocId,
    pub score: f64,
}

/// Top `m` candidates by cosine with `q`; ties go to the smaller doc id.
pub fn rank(q: &SparseVector, candidates: &[(DocId, &SparseVector)], m: usize) -> Vec<Scored> {
    if m == 0 {
        return Vec::new();
    }
    let qn = q.norm();
    let mut scored = par::map_slice(candidates, 256, |&(doc, v)| {
        let vn = v.norm();
        let score = if qn == 0.0 || vn == 0.0 {
            0.0
        } else {
            q.dot(v) / (qn * vn)
        };
        Scored { doc, score }
    });
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc.cmp(&b.doc)));
    scored.truncate(m);
    scored
}

/// `q + (1/k) Σ doc_i` over the `k` feedback documents.
pub fn prf_adjust(q: &SparseVector, top_docs: &[&SparseVector]) -> Result<SparseVector> {
    if top_docs.is_empty() {
        return Err(Error::Empty("feedback documents"));
    }
    let weight = 1.0 / top_docs.len() as f64;
    let mut sum = SparseVector::empty(q.dim());
    for d in top_docs {
        sum = sum.add_scaled(d, 1.0);
    }
    Ok(q.add_scaled(&sum, weight))
}

/// `q - α (r(q) - q) / σ²` in network space, clipped below at zero.
pub fn gsa_adjust(q_dense: &[f64], net: &NetworkParams, sigma: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("GSA sigma must be positive, got {sigma}")));
    }
    let r = net.reconstruct(q_dense)?;
    gsa_step(q_dense, &r, sigma, alpha)
}

pub(crate) fn gsa_step(q: &[f64], r: &[f64], sigma: f64, alpha: f64) -> Result<Vec<f64>> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reconstruction"));
    }
    let inv_var = 1.0 / (sigma * sigma);
    Ok(q.iter()
        .zip(r)
        .map(|(&q, &r)| (q - alpha * ((r - q) * inv_var)).max(0.0))
        .collect())
}

/// The reconstruction `r(q)` used verbatim as the ranking vector.
pub fn reconstruction_query(q_dense: &[f64], net: &NetworkParams) -> Result<Vec<f64>> {
    net.reconstruct(q_dense)
}

/// Moves an adjusted network-space query back into TF-IDF space by applying
/// the network-space change, rescaled, to the original sparse query. Entries
/// the adjustment clipped to zero are dropped.
fn reproject(q: &SparseVector, q_dense: &[f64], adjusted: &[f64], scaling: &ScalingStats) -> SparseVector {
    let mut entries = Vec::new();
    for (f, (&before, &after)) in q_dense.iter().zip(adjusted).enumerate() {
        if after <= 0.0 {
            continue;
        }
        let v = q.get(f as u32) + scaling.max_weight * (after - before);
        if v > 0.0 {
            entries.push((f as u32, v));
        }
    }
    SparseVector::from_sorted_unchecked(q.dim(), entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "tfidf")]
    Tfidf,
    #[serde(rename = "gsa")]
    Gsa,
    #[serde(rename = "prf")]
    Prf,
    #[serde(rename = "gsa+prf")]
    GsaPrf,
    #[serde(rename = "reconstruction")]
    Reconstruction,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Tfidf,
        Variant::Gsa,
        Variant::Prf,
        Variant::GsaPrf,
        Variant::Reconstruction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Tfidf => "tfidf",
            Variant::Gsa => "gsa",
            Variant::Prf => "prf",
            Variant::GsaPrf => "gsa+prf",
            Variant::Reconstruction => "reconstruction",
        }
    }

    fn uses_gsa(self) -> bool {
        matches!(self, Variant::Gsa | Variant::GsaPrf)
    }

    fn uses_prf(self) -> bool {
        matches!(self, Variant::Prf | Variant::GsaPrf)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown query variant {s:?}")))
    }
}

/// Documents the second PRF pass scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrfScope {
    Preselection,
    Corpus,
}

impl FromStr for PrfScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "preselection" => Ok(PrfScope::Preselection),
            "corpus" => Ok(PrfScope::Corpus),
            other => Err(Error::invalid(format!("unknown PRF scope {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    pub preselect: PreselectConfig,
    /// Number of ranked results returned.
    pub depth: usize,
    pub prf_k: usize,
    pub gsa_alpha: f64,
    pub gsa_sigma: f64,
    pub variant: Variant,
    pub prf_scope: PrfScope,
    /// Bottleneck probabilities above this become 1-bits.
    pub threshold: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            preselect: PreselectConfig::default(),
            depth: 100,
            prf_k: 5,
            gsa_alpha: 1.0,
            gsa_sigma: 2.0,
            variant: Variant::Tfidf,
            prf_scope: PrfScope::Preselection,
            threshold: 0.5,
        }
    }
}

impl QueryConfig {
    fn validate(&self, variant: Variant) -> Result<()> {
        if variant.uses_prf() && self.prf_k == 0 {
            return Err(Error::invalid("prf_k must be at least 1 when PRF is active"));
        }
        if variant.uses_gsa() && !(self.gsa_sigma > 0.0) {
            return Err(Error::invalid("GSA sigma must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedResult {
    pub variant: Variant,
    pub results: Vec<Scored>,
    /// Preselected documents, nearest code first.
    pub preselection: Vec<DocId>,
    pub radius: usize,
    pub code: BinaryCode,
    /// Set when the ranking is empty because nothing was preselected.
    pub diagnostic: Option<String>,
}

impl RankedResult {
    pub fn preselection_size(&self) -> usize {
        self.preselection.len()
    }

    pub fn doc_ids(&self) -> Vec<DocId> {
        self.results.iter().map(|s| s.doc).collect()
    }
}

/// Everything needed at query time: indexed vectors, trained network and the
/// hamming index over their codes. Immutable once built.
#[derive(Debug, Clone)]
pub struct Engine {
    docs: Vec<StoredDoc>,
    positions: HashMap<DocId, usize>,
    scaling: ScalingStats,
    vectorizer: Vectorizer,
    net: NetworkParams,
    index: HammingIndex,
}

/// Binary codes of the training split.
pub fn encode_corpus(store: &VectorStore, net: &NetworkParams, threshold: f64) -> Result<Vec<(DocId, BinaryCode)>> {
    if net.input_dim() != store.dim() {
        return Err(Error::ShapeMismatch {
            context: "network input vs vocabulary",
            expected: store.dim(),
            found: net.input_dim(),
        });
    }
    let codes = par::map_slice(&store.train, 16, |d| {
        net.encode(&store.scaling.scale(&d.vector))
            .map(|p| (d.id, binarize(&p, threshold)))
    });
    codes.into_iter().collect()
}

/// Encodes the training split and builds its index.
pub fn build_index(store: &VectorStore, net: &NetworkParams, threshold: f64) -> Result<HammingIndex> {
    HammingIndex::build(net.code_width(), encode_corpus(store, net, threshold)?)
}

impl Engine {
    pub fn new(store: &VectorStore, net: NetworkParams, index: HammingIndex) -> Result<Self> {
        if net.input_dim() != store.dim() || net.output_dim() != store.dim() {
            return Err(Error::ShapeMismatch {
                context: "network vs vocabulary",
                expected: store.dim(),
                found: net.input_dim(),
            });
        }
        if index.width() != net.code_width() {
            return Err(Error::ShapeMismatch {
                context: "index code width",
                expected: net.code_width(),
                found: index.width(),
            });
        }
        let docs = store.train.clone();
        let positions: HashMap<DocId, usize> = docs.iter().enumerate().map(|(i, d)| (d.id, i)).collect();
        if index.entries().any(|(_, id)| !positions.contains_key(&id)) {
            return Err(Error::invalid("index refers to documents missing from the store"));
        }
        Ok(Self {
            docs,
            positions,
            scaling: store.scaling,
            vectorizer: store.vectorizer(),
            net,
            index,
        })
    }

    pub fn docs(&self) -> &[StoredDoc] {
        &self.docs
    }

    pub fn net(&self) -> &NetworkParams {
        &self.net
    }

    pub fn index(&self) -> &HammingIndex {
        &self.index
    }

    pub fn scaling(&self) -> &ScalingStats {
        &self.scaling
    }

    pub fn doc(&self, id: DocId) -> Option<&StoredDoc> {
        self.positions.get(&id).map(|&i| &self.docs[i])
    }

    pub fn label(&self, id: DocId) -> Option<Label> {
        self.doc(id).map(|d| d.label)
    }

    /// Vectorizes `text` and runs [`search_vector`](Self::search_vector).
    pub fn search(&self, text: &str, query_id: Option<DocId>, cfg: &QueryConfig) -> Result<RankedResult> {
        self.search_vector(&self.vectorizer.tfidf(text), query_id, cfg)
    }

    pub fn search_vector(&self, q: &SparseVector, query_id: Option<DocId>, cfg: &QueryConfig) -> Result<RankedResult> {
        let mut out = self.search_variants(q, query_id, cfg, &[cfg.variant])?;
        Ok(out.pop().expect("one variant requested"))
    }

    /// Runs several variants over one shared preselection. The code is always
    /// computed from the unaugmented query. `query_id` names the query's own
    /// document, which is never used as feedback.
    pub fn search_variants(
        &self,
        q: &SparseVector,
        query_id: Option<DocId>,
        cfg: &QueryConfig,
        variants: &[Variant],
    ) -> Result<Vec<RankedResult>> {
        if q.dim() != self.scaling_dim() {
            return Err(Error::ShapeMismatch {
                context: "query dimensionality",
                expected: self.scaling_dim(),
                found: q.dim(),
            });
        }
        for &v in variants {
            cfg.validate(v)?;
        }
        let q_dense = self.scaling.scale(q);
        let pass = self.net.forward(&q_dense)?;
        let code = binarize(&pass.post[self.net.bottleneck()], cfg.threshold);
        let reconstruction = pass.reconstruction();
        let pre: Preselection = self.index.preselect(&code, &cfg.preselect)?;
        let preselection = pre.ids();

        let mut results = Vec::with_capacity(variants.len());
        for &variant in variants {
            let mut result = RankedResult {
                variant,
                results: Vec::new(),
                preselection: preselection.clone(),
                radius: pre.radius,
                code: code.clone(),
                diagnostic: None,
            };
            if preselection.is_empty() {
                result.diagnostic = Some(format!(
                    "no documents within hamming radius {} of code {code}",
                    pre.radius
                ));
                results.push(result);
                continue;
            }
            let ranking_vector = match variant {
                Variant::Tfidf | Variant::Prf => q.clone(),
                Variant::Gsa | Variant::GsaPrf => {
                    let adjusted = gsa_step(&q_dense, reconstruction, cfg.gsa_sigma, cfg.gsa_alpha)?;
                    reproject(q, &q_dense, &adjusted, &self.scaling)
                }
                Variant::Reconstruction => {
                    if reconstruction.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite("reconstruction"));
                    }
                    self.scaling.unscale(reconstruction)
                }
            };
            let candidates = self.vectors(&preselection);
            result.results = if variant.uses_prf() {
                self.feedback_rank(&ranking_vector, &candidates, query_id, cfg)?
            } else {
                rank(&ranking_vector, &candidates, cfg.depth)
            };
            results.push(result);
        }
        Ok(results)
    }

    fn scaling_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn vectors(&self, ids: &[DocId]) -> Vec<(DocId, &SparseVector)> {
        ids.iter()
            .filter_map(|id| self.doc(*id).map(|d| (d.id, &d.vector)))
            .collect()
    }

    fn feedback_rank(
        &self,
        q: &SparseVector,
        candidates: &[(DocId, &SparseVector)],
        query_id: Option<DocId>,
        cfg: &QueryConfig,
    ) -> Result<Vec<Scored>> {
        let first = rank(q, candidates, cfg.prf_k + 1);
        let feedback: Vec<&SparseVector> = first
            .iter()
            .filter(|s| Some(s.doc) != query_id)
            .take(cfg.prf_k)
            .filter_map(|s| self.doc(s.doc).map(|d| &d.vector))
            .collect();
        if feedback.is_empty() {
            return Ok(rank(q, candidates, cfg.depth));
        }
        let q_prf = prf_adjust(q, &feedback)?;
        Ok(match cfg.prf_scope {
            PrfScope::Preselection => rank(&q_prf, candidates, cfg.depth),
            PrfScope::Corpus => {
                let all: Vec<(DocId, &SparseVector)> = self.docs.iter().map(|d| (d.id, &d.vector)).collect();
                rank(&q_prf, &all, cfg.depth)
            }
        })
    }
}
