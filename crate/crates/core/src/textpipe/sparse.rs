use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse real vector with strictly increasing feature ids and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from `(id, weight)` pairs, validating the invariants.
    pub fn new(dim: usize, entries: Vec<(u32, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::invalid("sparse feature ids must be strictly increasing"));
            }
        }
        for &(id, v) in &entries {
            if id as usize >= dim {
                return Err(Error::invalid(format!("feature id {id} out of range {dim}")));
            }
            if v == 0.0 {
                return Err(Error::invalid("sparse vector stores a zero weight"));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse vector"));
            }
        }
        Ok(Self { dim, entries })
    }

    /// Keeps the entries of `dense` that are non-zero.
    pub fn from_dense(dense: &[f64]) -> Self {
        Self::from_dense_filtered(dense, |v| v != 0.0)
    }

    pub(crate) fn from_dense_filtered(dense: &[f64], keep: impl Fn(f64) -> bool) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|&(_, &v)| keep(v) && v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self {
            dim: dense.len(),
            entries,
        }
    }

    /// Caller guarantees the invariants.
    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<(u32, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> f64 {
        match self.entries.binary_search_by_key(&id, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    /// Returns `self + factor * other`, dropping entries that cancel to zero.
    pub fn add_scaled(&self, other: &SparseVector, factor: f64) -> SparseVector {
        let (a, b) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let (id, v) = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                i += 1;
                a[i - 1]
            } else if i >= a.len() || b[j].0 < a[i].0 {
                j += 1;
                (b[j - 1].0, factor * b[j - 1].1)
            } else {
                i += 1;
                j += 1;
                (a[i - 1].0, a[i - 1].1 + factor * b[j - 1].1)
            };
            if v != 0.0 {
                out.push((id, v));
            }
        }
        SparseVector {
            dim: self.dim.max(other.dim),
            entries: out,
        }
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        let entries = self
            .entries
            .iter()
            .map(|&(i, v)| (i, v * factor))
            .filter(|e| e.1 != 0.0)
            .collect();
        SparseVector {
            dim: self.dim,
            entries,
        }
    }
}
