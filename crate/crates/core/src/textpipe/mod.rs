//! Corpus ingestion and TF-IDF vectorization.
//!
//! Text is tokenized into lowercase alphabetic runs, a pruned vocabulary is
//! built from the training split, and each document becomes a sparse TF-IDF
//! vector. [`ScalingStats`] maps those vectors into the `[0, 1]` range the
//! autoencoder consumes.

mod corpus;
mod sparse;
mod tokenize;
mod vocab;

pub use corpus::{Corpus, DocId, Document, Label};
pub use sparse::SparseVector;
pub use tokenize::{tokenize, Tokenizer, MIN_TOKEN_LEN};
pub use vocab::{scale_for_network, ScalingStats, VocabConfig, Vocabulary};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::par;

/// Tokenizer plus vocabulary: turns raw text into TF-IDF vectors.
#[derive(Debug, Clone)]
pub struct Vectorizer {
    pub tokenizer: Tokenizer,
    pub vocab: Vocabulary,
}

impl Vectorizer {
    /// Builds the vocabulary over `docs` with the built-in English stopwords.
    pub fn fit(docs: &[Document], cfg: &VocabConfig) -> Result<Self> {
        let tokenizer = Tokenizer::english();
        let tokenized = par::map_slice(docs, 16, |d| tokenizer.tokenize(&d.text));
        let vocab = Vocabulary::build(&tokenized, cfg)?;
        Ok(Self { tokenizer, vocab })
    }

    pub fn counts(&self, text: &str) -> SparseVector {
        self.vocab.count_vector(&self.tokenizer.tokenize(text))
    }

    pub fn tfidf(&self, text: &str) -> SparseVector {
        self.vocab.tfidf(&self.counts(text))
    }

    /// Vectorizes every document; order follows the input.
    pub fn vectorize_all(&self, docs: &[Document]) -> Vec<StoredDoc> {
        par::map_slice(docs, 16, |d| StoredDoc {
            id: d.id,
            label: d.label,
            vector: self.tfidf(&d.text),
        })
    }
}

/// A vectorized document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDoc {
    pub id: DocId,
    pub label: Label,
    pub vector: SparseVector,
}

/// Output of ingestion: vocabulary, scaling statistics and the TF-IDF
/// vectors of both splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorStore {
    pub vocab: Vocabulary,
    pub scaling: ScalingStats,
    pub label_names: Vec<String>,
    pub train: Vec<StoredDoc>,
    pub test: Vec<StoredDoc>,
}

impl VectorStore {
    /// Fits the vocabulary and scaling on `train` and vectorizes both splits.
    pub fn build(train: &Corpus, test: &Corpus, cfg: &VocabConfig) -> Result<Self> {
        let vectorizer = Vectorizer::fit(&train.docs, cfg)?;
        let train_vecs = vectorizer.vectorize_all(&train.docs);
        let test_vecs = vectorizer.vectorize_all(&test.docs);
        let scaling = ScalingStats::fit(train_vecs.iter().map(|d| &d.vector))?;
        let mut label_names = train.label_names.clone();
        if test.label_names.len() > label_names.len() {
            label_names = test.label_names.clone();
        }
        Ok(Self {
            vocab: vectorizer.vocab,
            scaling,
            label_names,
            train: train_vecs,
            test: test_vecs,
        })
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn vectorizer(&self) -> Vectorizer {
        Vectorizer {
            tokenizer: Tokenizer::english(),
            vocab: self.vocab.clone(),
        }
    }

    /// Network inputs for the training split.
    pub fn network_inputs(&self) -> Vec<Vec<f64>> {
        par::map_slice(&self.train, 64, |d| self.scaling.scale(&d.vector))
    }

    pub fn find(&self, id: DocId) -> Option<&StoredDoc> {
        self.train
            .iter()
            .chain(self.test.iter())
            .find(|d| d.id == id)
    }
}
