use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::code::{ball_enumerate, ball_size, distance_words, words_for, BinaryCode};
use crate::error::{Error, Result};
use crate::par;
use crate::textpipe::DocId;

/// A document found inside a hamming ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hit {
    pub distance: u32,
    pub doc: DocId,
}

/// Code-addressed document index.
///
/// Documents are reachable both through a bucket map (for probing generated
/// codes) and through packed parallel arrays (for XOR/popcount scans).
#[derive(Debug, Clone, PartialEq)]
pub struct HammingIndex {
    width: usize,
    buckets: HashMap<BinaryCode, Vec<DocId>>,
    scan_words: Vec<u64>,
    scan_ids: Vec<DocId>,
}

const SCAN_CHUNK: usize = 4096;

impl HammingIndex {
    /// Builds an index over `(doc, code)` pairs of a common width.
    pub fn build(width: usize, entries: Vec<(DocId, BinaryCode)>) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateDocId(w[0].0));
            }
        }
        let mut buckets: HashMap<BinaryCode, Vec<DocId>> = HashMap::new();
        let mut scan_words = Vec::with_capacity(entries.len() * words_for(width));
        let mut scan_ids = Vec::with_capacity(entries.len());
        for (doc, code) in entries {
            if code.width() != width {
                return Err(Error::ShapeMismatch {
                    context: "indexed code width",
                    expected: width,
                    found: code.width(),
                });
            }
            scan_words.extend_from_slice(code.words());
            scan_ids.push(doc);
            buckets.entry(code).or_default().push(doc);
        }
        Ok(Self {
            width,
            buckets,
            scan_words,
            scan_ids,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.scan_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scan_ids.is_empty()
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket(&self, code: &BinaryCode) -> &[DocId] {
        self.buckets.get(code).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `(code, doc)` pairs in doc-id order.
    pub fn entries(&self) -> impl Iterator<Item = (BinaryCode, DocId)> + '_ {
        let wpc = words_for(self.width);
        self.scan_ids.iter().enumerate().map(move |(i, &doc)| {
            let words = self.scan_words[i * wpc..(i + 1) * wpc].to_vec();
            (
                BinaryCode::from_words(self.width, words).expect("index holds valid codes"),
                doc,
            )
        })
    }

    pub fn code_of(&self, doc: DocId) -> Option<BinaryCode> {
        let i = self.scan_ids.binary_search(&doc).ok()?;
        let wpc = words_for(self.width);
        BinaryCode::from_words(self.width, self.scan_words[i * wpc..(i + 1) * wpc].to_vec()).ok()
    }

    /// Checks that the bucket map and scan arrays describe the same set.
    pub fn validate(&self) -> Result<()> {
        if self.scan_words.len() != self.scan_ids.len() * words_for(self.width) {
            return Err(Error::Format("scan arrays have inconsistent lengths".into()));
        }
        if self.scan_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("scan ids are not strictly increasing".into()));
        }
        let mut from_buckets = 0;
        for (code, ids) in &self.buckets {
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format("bucket ids are not sorted".into()));
            }
            for &id in ids {
                if self.code_of(id).as_ref() != Some(code) {
                    return Err(Error::Format(format!("doc {id} is filed under the wrong code")));
                }
            }
            from_buckets += ids.len();
        }
        if from_buckets != self.scan_ids.len() {
            return Err(Error::Format("bucket map and scan arrays differ".into()));
        }
        Ok(())
    }

    fn check_width(&self, center: &BinaryCode) -> Result<()> {
        if center.width() != self.width {
            return Err(Error::ShapeMismatch {
                context: "query code width",
                expected: self.width,
                found: center.width(),
            });
        }
        Ok(())
    }

    /// XOR/popcount scan over every indexed code. Hits are ordered by
    /// `(distance, doc)`.
    pub fn ball_scan(&self, center: &BinaryCode, radius: usize) -> Result<Vec<Hit>> {
        self.check_width(center)?;
        let wpc = words_for(self.width);
        let n = self.scan_ids.len();
        let chunks = n.div_ceil(SCAN_CHUNK);
        let parts = par::map_range(chunks, 1, |c| {
            let lo = c * SCAN_CHUNK;
            let hi = (lo + SCAN_CHUNK).min(n);
            let mut hits = Vec::new();
            for i in lo..hi {
                let d = distance_words(&self.scan_words[i * wpc..(i + 1) * wpc], center.words());
                if d as usize <= radius {
                    hits.push(Hit {
                        distance: d,
                        doc: self.scan_ids[i],
                    });
                }
            }
            hits
        });
        let mut hits: Vec<Hit> = parts.into_iter().flatten().collect();
        hits.sort_unstable();
        Ok(hits)
    }

    /// Generates every code in the ball and probes the bucket map. Hits are
    /// ordered by `(distance, doc)`.
    pub fn ball_lookup(&self, center: &BinaryCode, radius: usize) -> Result<Vec<Hit>> {
        self.check_width(center)?;
        let mut hits = Vec::new();
        for code in ball_enumerate(center, radius)? {
            if let Some(ids) = self.buckets.get(&code) {
                let distance = code.distance(center)?;
                hits.extend(ids.iter().map(|&doc| Hit { distance, doc }));
            }
        }
        hits.sort_unstable();
        Ok(hits)
    }

    /// Radius-`h` preselection with fallback expansion; see [`PreselectConfig`].
    pub fn preselect(&self, center: &BinaryCode, cfg: &PreselectConfig) -> Result<Preselection> {
        self.check_width(center)?;
        let max_radius = cfg.max_radius.min(self.width);
        if cfg.radius > max_radius {
            return Err(Error::invalid(format!(
                "radius {} exceeds the maximum radius {max_radius}",
                cfg.radius
            )));
        }
        let mut radius = cfg.radius;
        loop {
            let strategy = self.choose(cfg.strategy, radius);
            let hits = match strategy {
                Strategy::Generative => self.ball_lookup(center, radius)?,
                _ => self.ball_scan(center, radius)?,
            };
            if hits.len() >= cfg.min_count || radius >= max_radius {
                return Ok(Preselection {
                    hits,
                    radius,
                    strategy,
                });
            }
            radius += 1;
        }
    }

    /// Generation probes `Σ C(n, i)` buckets while a scan touches every
    /// document; pick whichever is smaller.
    pub fn choose(&self, requested: Strategy, radius: usize) -> Strategy {
        match requested {
            Strategy::Auto => {
                if ball_size(self.width, radius) < self.len() as u128 {
                    Strategy::Generative
                } else {
                    Strategy::Scan
                }
            }
            s => s,
        }
    }

    pub(crate) fn from_parts(width: usize, scan_words: Vec<u64>, scan_ids: Vec<DocId>) -> Result<Self> {
        let wpc = words_for(width);
        if scan_words.len() != scan_ids.len() * wpc {
            return Err(Error::Format("scan arrays have inconsistent lengths".into()));
        }
        let entries = scan_ids
            .iter()
            .enumerate()
            .map(|(i, &doc)| {
                BinaryCode::from_words(width, scan_words[i * wpc..(i + 1) * wpc].to_vec()).map(|c| (doc, c))
            })
            .collect::<Result<Vec<_>>>()?;
        let index = Self::build(width, entries)?;
        index.validate()?;
        Ok(index)
    }

    pub(crate) fn scan_arrays(&self) -> (&[u64], &[DocId]) {
        (&self.scan_words, &self.scan_ids)
    }

    /// Ids in all buckets.
    pub fn doc_ids(&self) -> HashSet<DocId> {
        self.buckets.values().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Auto,
    Generative,
    Scan,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "generative" => Ok(Strategy::Generative),
            "scan" => Ok(Strategy::Scan),
            other => Err(Error::invalid(format!("unknown preselection strategy {other:?}"))),
        }
    }
}

/// Ball query settings: start at `radius`; while fewer than `min_count`
/// documents are found and the radius is below `max_radius`, grow the ball
/// by one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreselectConfig {
    pub radius: usize,
    pub min_count: usize,
    pub max_radius: usize,
    pub strategy: Strategy,
}

impl Default for PreselectConfig {
    fn default() -> Self {
        Self {
            radius: 2,
            min_count: 0,
            max_radius: 2,
            strategy: Strategy::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preselection {
    pub hits: Vec<Hit>,
    /// Radius of the ball that produced `hits`.
    pub radius: usize,
    pub strategy: Strategy,
}

impl Preselection {
    pub fn ids(&self) -> Vec<DocId> {
        self.hits.iter().map(|h| h.doc).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_index(width: usize, n: usize, rng: &mut ChaCha8Rng) -> HammingIndex {
        let entries = (0..n as u64)
            .map(|d| (d * 3 + 1, BinaryCode::from_u64(width, rng.random())))
            .collect();
        HammingIndex::build(width, entries).unwrap()
    }

    #[test]
    fn identical_codes_share_a_bucket() {
        let code = BinaryCode::from_u64(8, 0b1010);
        let idx = HammingIndex::build(8, vec![(3, code.clone()), (1, code.clone()), (2, code.clone())]).unwrap();
        assert_eq!(idx.bucket_count(), 1);
        assert_eq!(idx.bucket(&code), &[1, 2, 3]);
        idx.validate().unwrap();
    }

    #[test]
    fn empty_index() {
        let idx = HammingIndex::build(8, vec![]).unwrap();
        assert!(idx.is_empty());
        assert!(idx.ball_scan(&BinaryCode::zeros(8), 8).unwrap().is_empty());
        let p = idx
            .preselect(&BinaryCode::zeros(8), &PreselectConfig { radius: 0, min_count: 3, max_radius: 8, strategy: Strategy::Auto })
            .unwrap();
        assert!(p.hits.is_empty());
        assert_eq!(p.radius, 8);
    }

    #[test]
    fn rejects_duplicates_and_width_mismatch() {
        let c = BinaryCode::zeros(4);
        assert!(matches!(
            HammingIndex::build(4, vec![(1, c.clone()), (1, c.clone())]),
            Err(Error::DuplicateDocId(1))
        ));
        assert!(HammingIndex::build(5, vec![(1, c.clone())]).is_err());
        let idx = HammingIndex::build(4, vec![(1, c)]).unwrap();
        assert!(idx.ball_scan(&BinaryCode::zeros(5), 1).is_err());
    }

    #[test]
    fn union_of_buckets_is_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = random_index(6, 200, &mut rng);
        let expected: HashSet<DocId> = (0..200).map(|d| d * 3 + 1).collect();
        assert_eq!(idx.doc_ids(), expected);
        idx.validate().unwrap();
    }

    #[test]
    fn full_radius_returns_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let idx = random_index(10, 300, &mut rng);
        let center = BinaryCode::from_u64(10, 77);
        assert_eq!(idx.ball_scan(&center, 10).unwrap().len(), 300);
    }

    #[test]
    fn scan_and_lookup_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let width = rng.random_range(1..=16);
            let idx = random_index(width, 500, &mut rng);
            let radius = rng.random_range(0..=3usize.min(width));
            let center = BinaryCode::from_u64(width, rng.random());
            let scan = idx.ball_scan(&center, radius).unwrap();
            let lookup = idx.ball_lookup(&center, radius).unwrap();
            assert_eq!(scan, lookup);
            assert!(scan.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn preselect_expands_until_min_count() {
        let idx = HammingIndex::build(8, vec![(5, BinaryCode::from_u64(8, 0xff))]).unwrap();
        let cfg = PreselectConfig { radius: 0, min_count: 5, max_radius: 8, strategy: Strategy::Auto };
        let p = idx.preselect(&BinaryCode::zeros(8), &cfg).unwrap();
        assert_eq!(p.ids(), vec![5]);
        assert!(p.radius <= 8);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let idx = random_index(12, 400, &mut rng);
        let center = BinaryCode::from_u64(12, 5);
        let exact = PreselectConfig { radius: 2, min_count: 0, max_radius: 12, strategy: Strategy::Auto };
        assert_eq!(idx.preselect(&center, &exact).unwrap().hits, idx.ball_scan(&center, 2).unwrap());
        assert!(idx.preselect(&center, &PreselectConfig { radius: 3, max_radius: 2, ..exact }).is_err());
    }

    #[test]
    fn preselection_grows_with_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let idx = random_index(12, 400, &mut rng);
        let center = BinaryCode::from_u64(12, 1234);
        let mut last: HashSet<DocId> = HashSet::new();
        for r in 0..=12 {
            let ids: HashSet<DocId> = idx.ball_scan(&center, r).unwrap().iter().map(|h| h.doc).collect();
            assert!(ids.is_superset(&last));
            last = ids;
        }
    }

    #[test]
    fn strategy_cost_model() {
        let entries = (0..10_000u64).map(|d| (d, BinaryCode::from_u64(20, d * 7919))).collect();
        let idx = HammingIndex::build(20, entries).unwrap();
        assert_eq!(idx.choose(Strategy::Auto, 1), Strategy::Generative);
        assert_eq!(idx.choose(Strategy::Auto, 4), Strategy::Generative);
        assert_eq!(idx.choose(Strategy::Auto, 5), Strategy::Scan);
        assert_eq!(idx.choose(Strategy::Scan, 1), Strategy::Scan);
    }
}
