use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-width binary code. Bit 0 is the least significant bit of the first
/// word; bits at or above `width` are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinaryCode {
    width: usize,
    words: Vec<u64>,
}

pub(crate) fn words_for(width: usize) -> usize {
    width.div_ceil(64).max(1)
}

impl BinaryCode {
    pub fn zeros(width: usize) -> Self {
        Self {
            width,
            words: vec![0; words_for(width)],
        }
    }

    /// Code of width `width <= 64` holding `value`; high bits are masked off.
    pub fn from_u64(width: usize, value: u64) -> Self {
        assert!(width <= 64, "from_u64 supports widths up to 64");
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        Self {
            width,
            words: vec![value & mask],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut code = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                code.flip(i);
            }
        }
        code
    }

    pub(crate) fn from_words(width: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(width) {
            return Err(Error::Format(format!(
                "code of width {width} needs {} words, found {}",
                words_for(width),
                words.len()
            )));
        }
        let code = Self { width, words };
        let tail = width % 64;
        if tail != 0 && code.words.last().is_some_and(|w| w >> tail != 0) {
            return Err(Error::Format("code has bits set above its width".into()));
        }
        if width == 0 && code.words[0] != 0 {
            return Err(Error::Format("zero-width code has bits set".into()));
        }
        Ok(code)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The code as one machine word, when it fits.
    pub fn as_u64(&self) -> Option<u64> {
        (self.width <= 64).then(|| self.words[0])
    }

    pub fn get(&self, bit: usize) -> bool {
        assert!(bit < self.width, "bit {bit} out of range {}", self.width);
        (self.words[bit / 64] >> (bit % 64)) & 1 == 1
    }

    pub fn flip(&mut self, bit: usize) {
        assert!(bit < self.width, "bit {bit} out of range {}", self.width);
        self.words[bit / 64] ^= 1 << (bit % 64);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Hamming distance `popcount(a XOR b)`.
    pub fn distance(&self, other: &BinaryCode) -> Result<u32> {
        if self.width != other.width {
            return Err(Error::ShapeMismatch {
                context: "code width",
                expected: self.width,
                found: other.width,
            });
        }
        Ok(distance_words(&self.words, &other.words))
    }
}

#[inline]
pub(crate) fn distance_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Bits printed most significant first, padded to the full width.
impl fmt::Display for BinaryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in (0..self.width).rev() {
            f.write_str(if self.get(bit) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Bit `j` is set iff `probs[j] > threshold`.
pub fn binarize(probs: &[f64], threshold: f64) -> BinaryCode {
    let mut code = BinaryCode::zeros(probs.len());
    for (j, &p) in probs.iter().enumerate() {
        if p > threshold {
            code.flip(j);
        }
    }
    code
}

/// `Σ_{i=0..=radius} C(width, i)`, saturating.
pub fn ball_size(width: usize, radius: usize) -> u128 {
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for i in 0..=radius.min(width) {
        total = total.saturating_add(term);
        term = term.saturating_mul((width - i) as u128) / (i as u128 + 1);
    }
    total
}

/// All codes within hamming distance `radius` of `center`, ordered by
/// distance and then by the positions of the flipped bits.
pub fn ball_enumerate(center: &BinaryCode, radius: usize) -> Result<Vec<BinaryCode>> {
    let n = center.width();
    if radius > n {
        return Err(Error::invalid(format!(
            "radius {radius} exceeds code width {n}"
        )));
    }
    let size = ball_size(n, radius);
    let mut out = Vec::with_capacity(usize::try_from(size).unwrap_or(usize::MAX).min(1 << 20));
    out.push(center.clone());
    for d in 1..=radius {
        // positions[0] < positions[1] < ... ; lexicographic combinations
        let mut positions: Vec<usize> = (0..d).collect();
        loop {
            let mut code = center.clone();
            for &p in &positions {
                code.flip(p);
            }
            out.push(code);
            let mut i = d;
            while i > 0 && positions[i - 1] == n - d + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            positions[i - 1] += 1;
            for k in i..d {
                positions[k] = positions[k - 1] + 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn binarize_rule() {
        assert_eq!(binarize(&[0.5; 4], 0.5), BinaryCode::zeros(4));
        let c = binarize(&[0.9, 0.1, 0.7], 0.5);
        assert_eq!(c.as_u64(), Some(0b101));
        assert_eq!(c.to_string(), "101");
        let again = binarize(&[1.0, 0.0, 1.0], 0.5);
        assert_eq!(c, again);
        assert_eq!(binarize(&[0.0, 1.0, 0.0, 0.0], 0.5).to_string(), "0010");
    }

    #[test]
    fn wide_codes() {
        let mut bits = vec![false; 130];
        bits[0] = true;
        bits[64] = true;
        bits[129] = true;
        let c = BinaryCode::from_bits(&bits);
        assert_eq!(c.words().len(), 3);
        assert_eq!(c.count_ones(), 3);
        assert!(c.get(129));
        assert_eq!(c.as_u64(), None);
        assert_eq!(c.distance(&BinaryCode::zeros(130)).unwrap(), 3);
        assert!(c.distance(&BinaryCode::zeros(129)).is_err());
        assert!(BinaryCode::from_words(3, vec![0b1000]).is_err());
    }

    #[test]
    fn enumerate_examples() {
        let center = BinaryCode::zeros(3);
        assert_eq!(ball_enumerate(&center, 0).unwrap(), vec![center.clone()]);
        let got: HashSet<u64> = ball_enumerate(&center, 1)
            .unwrap()
            .iter()
            .map(|c| c.as_u64().unwrap())
            .collect();
        assert_eq!(got, HashSet::from([0b000, 0b001, 0b010, 0b100]));
        assert_eq!(ball_enumerate(&BinaryCode::zeros(20), 2).unwrap().len(), 211);
        assert_eq!(ball_size(20, 2), 211);
        assert!(ball_enumerate(&center, 4).is_err());
    }

    proptest! {
        #[test]
        fn enumerate_counts_and_distances(width in 1usize..=16, r in 0usize..=16, seed in any::<u64>()) {
            let radius = r.min(width);
            let center = BinaryCode::from_u64(width, seed);
            let ball = ball_enumerate(&center, radius).unwrap();
            prop_assert_eq!(ball.len() as u128, ball_size(width, radius));
            let unique: HashSet<_> = ball.iter().collect();
            prop_assert_eq!(unique.len(), ball.len());
            for c in &ball {
                prop_assert!(c.distance(&center).unwrap() as usize <= radius);
            }
        }

        #[test]
        fn distance_is_a_metric(width in 1usize..=64, a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
            let (a, b, c) = (
                BinaryCode::from_u64(width, a),
                BinaryCode::from_u64(width, b),
                BinaryCode::from_u64(width, c),
            );
            let d = |x: &BinaryCode, y: &BinaryCode| x.distance(y).unwrap();
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert_eq!(d(&a, &a), 0);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        }
    }
}
