//! Semantic hashing retrieval engine.
//!
//! Documents are vectorized with TF-IDF, a denoising autoencoder learns a
//! short binary code for each of them, and queries are answered by collecting
//! the documents whose codes fall in a hamming ball around the query code and
//! ranking those candidates by cosine similarity. Query vectors can be
//! augmented with pseudo-relevance feedback or with a step along the
//! autoencoder's reconstruction residual.

// Validation uses `!(x > 0.0)` style checks so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoencoder;
pub mod codec;
pub mod error;
pub mod eval;
pub mod hashindex;
pub mod par;
pub mod rbm;
pub mod retrieval;
pub mod synthetic;
pub mod textpipe;

pub use error::{Error, Result};
