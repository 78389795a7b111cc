use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DocId = u64;
pub type Label = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    pub label: Label,
    pub text: String,
}

/// Labelled documents plus the class names the labels index into.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub docs: Vec<Document>,
    pub label_names: Vec<String>,
}

impl Corpus {
    /// Loads one-directory-per-class layout. Class labels follow sorted
    /// directory names and ids are assigned from `first_id` in sorted path
    /// order.
    pub fn from_class_dirs(root: &Path, first_id: DocId) -> Result<Self> {
        let mut classes = read_sorted_dir(root)?
            .into_iter()
            .filter(|p| p.is_dir())
            .collect::<Vec<_>>();
        classes.sort();
        let mut corpus = Corpus::default();
        let mut next = first_id;
        for (label, dir) in classes.iter().enumerate() {
            let name = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            corpus.label_names.push(name);
            for file in read_sorted_dir(dir)?.into_iter().filter(|p| p.is_file()) {
                let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
                corpus.docs.push(Document {
                    id: next,
                    label: label as Label,
                    text: String::from_utf8_lossy(&bytes).into_owned(),
                });
                next += 1;
            }
        }
        if corpus.docs.is_empty() {
            return Err(Error::Empty("corpus directory has no documents"));
        }
        Ok(corpus)
    }

    /// Loads a JSON-lines file of `{id, label, text}` records.
    pub fn from_jsonl(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut docs = Vec::new();
        for (n, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(line).map_err(|e| {
                Error::invalid(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            docs.push(doc);
        }
        let corpus = Self::from_documents(docs)?;
        Ok(corpus)
    }

    /// Wraps documents, checking id uniqueness. Labels are named by number.
    pub fn from_documents(docs: Vec<Document>) -> Result<Self> {
        let mut ids = HashSet::new();
        for d in &docs {
            if !ids.insert(d.id) {
                return Err(Error::DuplicateDocId(d.id));
            }
        }
        let classes = docs.iter().map(|d| d.label + 1).max().unwrap_or(0);
        Ok(Corpus {
            docs,
            label_names: (0..classes).map(|l| l.to_string()).collect(),
        })
    }

    pub fn max_id(&self) -> Option<DocId> {
        self.docs.iter().map(|d| d.id).max()
    }

    /// Deterministic seeded split into `(train, test)`; each half keeps id order.
    pub fn split(mut self, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::invalid(format!(
                "test fraction must lie in [0, 1), got {test_fraction}"
            )));
        }
        self.docs.sort_by_key(|d| d.id);
        let mut order: Vec<usize> = (0..self.docs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (self.docs.len() as f64 * test_fraction).round() as usize;
        let test_idx: HashSet<usize> = order[..n_test].iter().copied().collect();
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, d) in self.docs.into_iter().enumerate() {
            if test_idx.contains(&i) {
                test.push(d);
            } else {
                train.push(d);
            }
        }
        let names = self.label_names;
        Ok((
            Corpus {
                docs: train,
                label_names: names.clone(),
            },
            Corpus {
                docs: test,
                label_names: names,
            },
        ))
    }
}

fn read_sorted_dir(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}
