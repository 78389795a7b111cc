//! Versioned little-endian binary container for pipeline artifacts, plus a
//! JSON export of the same data.
//!
//! Layout: 8-byte magic, `u16` format version, `u16` artifact kind, `u64`
//! payload length, payload. Strings are `u32` length + UTF-8 bytes; counts of
//! vectors and documents are `u64`, dimensions `u32`, reals `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{Activation, Layer, NetworkParams};
use crate::error::{Error, Result};
use crate::hashindex::HammingIndex;
use crate::rbm::RbmParams;
use crate::textpipe::{ScalingStats, SparseVector, StoredDoc, VectorStore, Vocabulary};

pub const MAGIC: [u8; 8] = *b"SEMHASH\0";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 8 + 2 + 2 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Kind {
    VectorStore = 1,
    Network = 2,
    RbmStack = 3,
    HammingIndex = 4,
}

impl Kind {
    fn from_u16(v: u16) -> Result<Self> {
        Ok(match v {
            1 => Kind::VectorStore,
            2 => Kind::Network,
            3 => Kind::RbmStack,
            4 => Kind::HammingIndex,
            k => return Err(Error::Format(format!("unknown artifact kind {k}"))),
        })
    }
}

/// A value stored as one artifact file.
pub trait Artifact: Sized {
    const KIND: Kind;
    fn encode_payload(&self, w: &mut Writer);
    fn decode_payload(r: &mut Reader<'_>) -> Result<Self>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        self.encode_payload(&mut w);
        let mut out = Vec::with_capacity(HEADER_LEN + w.buf.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(Self::KIND as u16).to_le_bytes());
        out.extend_from_slice(&(w.buf.len() as u64).to_le_bytes());
        out.extend_from_slice(&w.buf);
        out
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || bytes[..8] != MAGIC {
            return Err(Error::Format("not a semhash artifact".into()));
        }
        let mut header = Reader::new(&bytes[8..HEADER_LEN]);
        let version = header.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let kind = Kind::from_u16(header.u16()?)?;
        if kind != Self::KIND {
            return Err(Error::Format(format!("expected a {:?} artifact, found {kind:?}", Self::KIND)));
        }
        let len = header.u64()?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() as u64 != len {
            return Err(Error::Format(format!(
                "payload length {} does not match header {len}",
                payload.len()
            )));
        }
        let mut r = Reader::new(payload);
        let value = Self::decode_payload(&mut r)?;
        if !r.is_done() {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        Ok(value)
    }

    fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Writes via a temporary sibling file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn dim(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("dimension fits in u32"));
    }
    fn str(&mut self, s: &str) {
        self.dim(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated artifact".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn dim(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    /// A count whose items occupy at least `min_item_bytes` each; rejects
    /// counts the remaining input cannot hold before anything is allocated.
    fn count(&mut self, min_item_bytes: usize) -> Result<usize> {
        let n = self.u64()?;
        let room = (self.buf.len() - self.pos) / min_item_bytes.max(1);
        if n > room as u64 {
            return Err(Error::Format(format!("count {n} exceeds remaining input")));
        }
        Ok(n as usize)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.dim()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn write_docs(w: &mut Writer, docs: &[StoredDoc]) {
    w.u64(docs.len() as u64);
    for d in docs {
        w.u64(d.id);
        w.u32(d.label);
        w.dim(d.vector.dim());
        w.dim(d.vector.nnz());
        for &(f, v) in d.vector.entries() {
            w.u32(f);
            w.f64(v);
        }
    }
}

fn read_docs(r: &mut Reader<'_>) -> Result<Vec<StoredDoc>> {
    let n = r.count(20)?;
    let mut docs = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.u64()?;
        let label = r.u32()?;
        let dim = r.dim()?;
        let nnz = r.dim()?;
        let mut entries = Vec::with_capacity(nnz.min(dim));
        for _ in 0..nnz {
            entries.push((r.u32()?, r.f64()?));
        }
        let vector = SparseVector::new(dim, entries).map_err(|e| Error::Format(format!("document {id}: {e}")))?;
        docs.push(StoredDoc { id, label, vector });
    }
    Ok(docs)
}

impl Artifact for VectorStore {
    const KIND: Kind = Kind::VectorStore;

    fn encode_payload(&self, w: &mut Writer) {
        w.u64(self.vocab.num_docs());
        w.u64(self.vocab.len() as u64);
        for (i, t) in self.vocab.tokens().iter().enumerate() {
            w.str(t);
            w.u64(self.vocab.doc_freq(i as u32));
        }
        w.f64(self.scaling.max_weight);
        w.u64(self.label_names.len() as u64);
        for name in &self.label_names {
            w.str(name);
        }
        write_docs(w, &self.train);
        write_docs(w, &self.test);
    }

    fn decode_payload(r: &mut Reader<'_>) -> Result<Self> {
        let num_docs = r.u64()?;
        let n = r.count(12)?;
        let mut tokens = Vec::with_capacity(n);
        let mut doc_freq = Vec::with_capacity(n);
        for _ in 0..n {
            tokens.push(r.str()?);
            doc_freq.push(r.u64()?);
        }
        if tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("vocabulary tokens are not sorted and unique".into()));
        }
        let vocab = Vocabulary::from_parts(tokens, doc_freq, num_docs);
        vocab.validate()?;
        let scaling = ScalingStats::new(r.f64()?).map_err(|e| Error::Format(e.to_string()))?;
        let labels = r.count(4)?;
        let label_names = (0..labels).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let train = read_docs(r)?;
        let test = read_docs(r)?;
        if let Some(d) = train.iter().chain(&test).find(|d| d.vector.dim() != vocab.len()) {
            return Err(Error::Format(format!("document {} has the wrong dimensionality", d.id)));
        }
        Ok(VectorStore {
            vocab,
            scaling,
            label_names,
            train,
            test,
        })
    }
}

impl Artifact for NetworkParams {
    const KIND: Kind = Kind::Network;

    fn encode_payload(&self, w: &mut Writer) {
        w.dim(self.layers().len());
        for l in self.layers() {
            w.dim(l.inputs);
            w.dim(l.outputs);
            w.u8(l.activation.tag());
            w.f64s(&l.weights);
            w.f64s(&l.bias);
        }
    }

    fn decode_payload(r: &mut Reader<'_>) -> Result<Self> {
        let n = r.dim()?;
        let mut layers = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let inputs = r.dim()?;
            let outputs = r.dim()?;
            let activation = Activation::from_tag(r.u8()?)?;
            let weights = r.f64s(inputs.checked_mul(outputs).ok_or_else(|| Error::Format("layer too large".into()))?)?;
            let bias = r.f64s(outputs)?;
            layers.push(Layer {
                inputs,
                outputs,
                weights,
                bias,
                activation,
            });
        }
        NetworkParams::from_layers(layers).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Layer-wise pretrained RBMs, bottom first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmStack(pub Vec<RbmParams>);

impl Artifact for RbmStack {
    const KIND: Kind = Kind::RbmStack;

    fn encode_payload(&self, w: &mut Writer) {
        w.dim(self.0.len());
        for rbm in &self.0 {
            w.dim(rbm.n_visible);
            w.dim(rbm.n_hidden);
            w.f64s(&rbm.weights);
            w.f64s(&rbm.visible_bias);
            w.f64s(&rbm.hidden_bias);
        }
    }

    fn decode_payload(r: &mut Reader<'_>) -> Result<Self> {
        let n = r.dim()?;
        let mut stack = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let n_visible = r.dim()?;
            let n_hidden = r.dim()?;
            let rbm = RbmParams {
                n_visible,
                n_hidden,
                weights: r.f64s(
                    n_visible
                        .checked_mul(n_hidden)
                        .ok_or_else(|| Error::Format("RBM too large".into()))?,
                )?,
                visible_bias: r.f64s(n_visible)?,
                hidden_bias: r.f64s(n_hidden)?,
            };
            rbm.validate().map_err(|e| Error::Format(e.to_string()))?;
            stack.push(rbm);
        }
        Ok(RbmStack(stack))
    }
}

impl Artifact for HammingIndex {
    const KIND: Kind = Kind::HammingIndex;

    fn encode_payload(&self, w: &mut Writer) {
        let (words, ids) = self.scan_arrays();
        w.dim(self.width());
        w.u64(ids.len() as u64);
        for &id in ids {
            w.u64(id);
        }
        for &word in words {
            w.u64(word);
        }
    }

    fn decode_payload(r: &mut Reader<'_>) -> Result<Self> {
        let width = r.dim()?;
        let n = r.count(8)?;
        let ids = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let n_words = n
            .checked_mul(crate::hashindex::words_for(width))
            .ok_or_else(|| Error::Format("index too large".into()))?;
        let words = (0..n_words).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        HammingIndex::from_parts(width, words, ids)
    }
}

/// JSON view of a [`HammingIndex`]: codes written MSB-first.
#[derive(Debug, Serialize, Deserialize)]
pub struct IndexJson {
    pub width: usize,
    pub entries: Vec<IndexEntryJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IndexEntryJson {
    pub doc_id: u64,
    pub code: String,
}

impl From<&HammingIndex> for IndexJson {
    fn from(index: &HammingIndex) -> Self {
        IndexJson {
            width: index.width(),
            entries: index
                .entries()
                .map(|(code, doc)| IndexEntryJson {
                    doc_id: doc,
                    code: code.to_string(),
                })
                .collect(),
        }
    }
}

/// Human-readable JSON of any artifact that has a serde representation.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashindex::BinaryCode;
    use crate::textpipe::{Corpus, Document, VocabConfig};

    fn store() -> VectorStore {
        let docs = |texts: &[&str], first: u64| {
            Corpus::from_documents(
                texts
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Document {
                        id: first + i as u64,
                        label: (i % 2) as u32,
                        text: t.to_string(),
                    })
                    .collect(),
            )
            .unwrap()
        };
        let train = docs(&["apple banana", "banana cherry", "cherry dates apple", "elder fig"], 0);
        let test = docs(&["apple fig"], 10);
        let cfg = VocabConfig {
            min_df_frac: 0.0,
            max_df_frac: 1.0,
            top_n: 100,
        };
        VectorStore::build(&train, &test, &cfg).unwrap()
    }

    #[test]
    fn store_round_trips() {
        let s = store();
        let back = VectorStore::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn network_round_trips_bit_exact() {
        let net = NetworkParams::init(&[7, 5, 3, 5, 7], 42).unwrap();
        let back = NetworkParams::from_bytes(&net.to_bytes()).unwrap();
        assert_eq!(back, net);
        for (a, b) in back.layers().iter().zip(net.layers()) {
            assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn rbm_and_index_round_trip() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let stack = RbmStack(vec![RbmParams::init(6, 4, 0.1, &mut rng).unwrap(), RbmParams::init(4, 2, 0.1, &mut rng).unwrap()]);
        assert_eq!(RbmStack::from_bytes(&stack.to_bytes()).unwrap(), stack);

        let entries = (0..50u64)
            .map(|i| {
                let bits: Vec<bool> = (0..70).map(|b| ((i * 0x9e37_79b9) >> (b % 60)) & 1 == 1 || b == i as usize).collect();
                (i * 3, BinaryCode::from_bits(&bits))
            })
            .collect();
        let index = HammingIndex::build(70, entries).unwrap();
        let back = HammingIndex::from_bytes(&index.to_bytes()).unwrap();
        assert_eq!(back, index);
    }

    #[test]
    fn rejects_corrupt_input() {
        let net = NetworkParams::init(&[4, 2, 4], 1).unwrap();
        let bytes = net.to_bytes();
        assert!(NetworkParams::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(VectorStore::from_bytes(&bytes).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(NetworkParams::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(NetworkParams::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(NetworkParams::from_bytes(&long).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        let s = store();
        s.save(&path).unwrap();
        assert_eq!(VectorStore::load(&path).unwrap(), s);
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
        assert!(to_json(&s).unwrap().contains("\"max_weight\""));
    }
}
