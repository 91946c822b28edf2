//! Corpus preparation: length limits, n-gram deduplication against a
//! reference corpus, and seeded release/held-out splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub min_words: usize,
    pub max_words: usize,
    pub max_tokens: usize,
    pub dedup_n: usize,
    pub dedup_overlap: f64,
    pub bloom_bits: u64,
    pub bloom_hashes: u32,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_words: 100,
            max_words: 200,
            max_tokens: 512,
            dedup_n: 13,
            dedup_overlap: 0.80,
            bloom_bits: 1 << 24,
            bloom_hashes: 10,
            seed: 1234,
        }
    }
}

/// Largest false-positive rate a configured filter may have at capacity.
pub const BLOOM_DESIGN_FP: f64 = 1e-3;

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(Error::Argument(format!(
                "need 0 < min_words <= max_words, got {} and {}",
                self.min_words, self.max_words
            )));
        }
        if self.max_tokens == 0 || self.dedup_n == 0 {
            return Err(Error::Argument("max_tokens and dedup_n must be positive".into()));
        }
        if !(self.dedup_overlap > 0.0 && self.dedup_overlap <= 1.0) {
            return Err(Error::Argument(format!("dedup_overlap {} not in (0, 1]", self.dedup_overlap)));
        }
        if self.bloom_bits == 0 || self.bloom_hashes == 0 {
            return Err(Error::Argument("bloom_bits and bloom_hashes must be positive".into()));
        }
        Ok(())
    }

    /// n-grams the filter holds before its false-positive rate passes 1e-3.
    pub fn bloom_capacity(&self) -> u64 {
        BloomFilter::capacity_for(self.bloom_bits, self.bloom_hashes, BLOOM_DESIGN_FP)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Truncation {
    Unchanged,
    Truncated(String),
    /// Fewer than `min_words` words, before or after applying the caps.
    TooShort { words: usize },
}

/// Applies the word and token caps. `count_tokens` is the tokenizer's count
/// for a piece of text and must not decrease as words are appended.
pub fn truncate_document(text: &str, count_tokens: impl Fn(&str) -> usize, config: &CorpusConfig) -> Truncation {
    // byte offset just past each word
    let ends: Vec<usize> = text
        .split_whitespace()
        .map(|w| w.as_ptr() as usize - text.as_ptr() as usize + w.len())
        .collect();
    let words = ends.len();
    if words < config.min_words {
        return Truncation::TooShort { words };
    }
    let fits = |w: usize| count_tokens(&text[..ends[w - 1]]) <= config.max_tokens;
    if words <= config.max_words && count_tokens(text) <= config.max_tokens {
        return Truncation::Unchanged;
    }
    let (mut lo, mut hi) = (0, words.min(config.max_words));
    if fits(hi) {
        lo = hi;
    } else {
        // invariant: lo fits (0 trivially), hi does not
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if lo < config.min_words {
        return Truncation::TooShort { words: lo };
    }
    Truncation::Truncated(text[text.len() - text.trim_start().len()..ends[lo - 1]].to_string())
}

/// Lowercased word n-grams, joined by single spaces.
pub fn word_ngrams(text: &str, n: usize) -> Vec<String> {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if n == 0 || words.len() < n {
        return Vec::new();
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bit-array Bloom filter with double hashing.
#[derive(Debug, Clone)]
pub struct BloomFilter {
    bits: Vec<u64>,
    n_bits: u64,
    hashes: u32,
}

impl BloomFilter {
    pub fn new(n_bits: u64, hashes: u32) -> Self {
        assert!(n_bits > 0 && hashes > 0);
        BloomFilter {
            bits: vec![0; n_bits.div_ceil(64) as usize],
            n_bits,
            hashes,
        }
    }

    /// Expected false-positive rate after `n` insertions.
    pub fn false_positive_rate(n_bits: u64, hashes: u32, n: u64) -> f64 {
        let k = hashes as f64;
        (1.0 - (-k * n as f64 / n_bits as f64).exp()).powf(k)
    }

    pub fn capacity_for(n_bits: u64, hashes: u32, rate: f64) -> u64 {
        // (1 - e^{-kn/m})^k = rate  =>  n = -m/k * ln(1 - rate^{1/k})
        let k = hashes as f64;
        (-(n_bits as f64) / k * (1.0 - rate.powf(1.0 / k)).ln()).floor() as u64
    }

    fn positions(&self, item: &[u8]) -> impl Iterator<Item = u64> {
        let h1 = fnv1a(item);
        let h2 = splitmix64(h1) | 1;
        let m = self.n_bits;
        (0..self.hashes as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % m)
    }

    pub fn insert(&mut self, item: &[u8]) {
        let pos: Vec<u64> = self.positions(item).collect();
        for p in pos {
            self.bits[(p / 64) as usize] |= 1 << (p % 64);
        }
    }

    pub fn contains(&self, item: &[u8]) -> bool {
        self.positions(item).all(|p| self.bits[(p / 64) as usize] & (1 << (p % 64)) != 0)
    }

    /// Fraction of bits set.
    pub fn fill(&self) -> f64 {
        let ones: u64 = self.bits.iter().map(|w| w.count_ones() as u64).sum();
        ones as f64 / self.n_bits as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCandidate {
    pub index: usize,
    /// Fraction of the candidate's n-grams that tested positive.
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupOutcome {
    pub kept: Vec<usize>,
    pub flagged: Vec<FlaggedCandidate>,
    pub warnings: Vec<String>,
}

/// Builds the reference filter.
pub fn reference_filter<S: AsRef<str>>(reference: &[S], config: &CorpusConfig) -> (BloomFilter, u64) {
    let mut filter = BloomFilter::new(config.bloom_bits, config.bloom_hashes);
    let mut inserted = 0u64;
    for doc in reference {
        for g in word_ngrams(doc.as_ref(), config.dedup_n) {
            filter.insert(g.as_bytes());
            inserted += 1;
        }
    }
    (filter, inserted)
}

/// Fraction of `text`'s n-grams found in the filter; `None` when it has none.
pub fn bloom_overlap(filter: &BloomFilter, text: &str, n: usize) -> Option<f64> {
    let grams = word_ngrams(text, n);
    if grams.is_empty() {
        return None;
    }
    let hits = grams.iter().filter(|g| filter.contains(g.as_bytes())).count();
    Some(hits as f64 / grams.len() as f64)
}

/// Flags candidates whose n-gram overlap with the reference reaches
/// `dedup_overlap`. Candidates shorter than `dedup_n` words are kept.
pub fn dedup_against<R: AsRef<str>, C: AsRef<str>>(
    reference: &[R],
    candidates: &[C],
    config: &CorpusConfig,
) -> Result<DedupOutcome> {
    config.validate()?;
    let (filter, inserted) = reference_filter(reference, config);
    let mut warnings = Vec::new();
    let fill = filter.fill();
    if fill > 0.5 {
        warnings.push(format!(
            "bloom filter {:.1}% full after {inserted} n-grams (design capacity {}); expect extra false positives",
            fill * 100.0,
            config.bloom_capacity()
        ));
        log::warn!("{}", warnings[0]);
    }
    let mut kept = Vec::new();
    let mut flagged = Vec::new();
    for (index, c) in candidates.iter().enumerate() {
        match bloom_overlap(&filter, c.as_ref(), config.dedup_n) {
            Some(overlap) if overlap >= config.dedup_overlap => flagged.push(FlaggedCandidate { index, overlap }),
            _ => kept.push(index),
        }
    }
    Ok(DedupOutcome { kept, flagged, warnings })
}

/// Seeded shuffle, then the first `round(n * fraction)` items are released.
pub fn split_heldout<T>(mut docs: Vec<T>, fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!("fraction {fraction} not in (0, 1)")));
    }
    docs.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let release = (docs.len() as f64 * fraction).round() as usize;
    let heldout = docs.split_off(release);
    Ok((docs, heldout))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize, prefix: &str) -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
    }

    fn word_count(s: &str) -> usize {
        s.split_whitespace().count()
    }

    #[test]
    fn truncation_cases() {
        let cfg = CorpusConfig::default();
        let doc = words(150, "w");
        assert_eq!(truncate_document(&doc, |s| 2 * word_count(s), &cfg), Truncation::Unchanged);
        assert_eq!(
            truncate_document(&words(50, "w"), word_count, &cfg),
            Truncation::TooShort { words: 50 }
        );
        let long = words(400, "w");
        match truncate_document(&long, word_count, &cfg) {
            Truncation::Truncated(t) => {
                assert_eq!(word_count(&t), 200);
                assert!(long.starts_with(&t));
                assert!(t.ends_with("w199"));
            }
            other => panic!("{other:?}"),
        }
        // token cap binds before the word cap: 3 tokens per word
        match truncate_document(&long, |s| 3 * word_count(s), &cfg) {
            Truncation::Truncated(t) => assert_eq!(word_count(&t), 170),
            other => panic!("{other:?}"),
        }
        // caps leave too few words
        assert_eq!(
            truncate_document(&long, |s| 10 * word_count(s), &cfg),
            Truncation::TooShort { words: 51 }
        );
    }

    #[test]
    fn ngram_lowercasing() {
        assert_eq!(word_ngrams("A b  C d", 3), vec!["a b c", "b c d"]);
        assert!(word_ngrams("a b", 3).is_empty());
    }

    #[test]
    fn dedup_cases() {
        let cfg = CorpusConfig::default();
        let reference = vec![words(60, "ref")];
        let verbatim = reference[0].to_uppercase();
        let disjoint = words(60, "new");
        let short = "tiny text".to_string();
        let out = dedup_against(&reference, &[verbatim, disjoint, short], &cfg).unwrap();
        assert_eq!(out.flagged.len(), 1);
        assert_eq!(out.flagged[0].index, 0);
        assert_eq!(out.flagged[0].overlap, 1.0);
        assert_eq!(out.kept, vec![1, 2]);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn tiny_filter_warns() {
        let cfg = CorpusConfig {
            bloom_bits: 256,
            bloom_hashes: 3,
            ..CorpusConfig::default()
        };
        let reference = vec![words(500, "r")];
        let out = dedup_against(&reference, &[words(20, "x")], &cfg).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn default_filter_meets_design_rate() {
        let cfg = CorpusConfig::default();
        let cap = cfg.bloom_capacity();
        assert!(cap > 1_000_000);
        assert!(BloomFilter::false_positive_rate(cfg.bloom_bits, cfg.bloom_hashes, cap) <= 1e-3);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (a, b) = split_heldout((0..1000).collect(), 0.5, 1234).unwrap();
        assert_eq!((a.len(), b.len()), (500, 500));
        let (c, d) = split_heldout((0..432).collect::<Vec<u32>>(), 0.5, 7).unwrap();
        assert_eq!((c.len(), d.len()), (216, 216));
        let (a2, _) = split_heldout((0..1000).collect::<Vec<u32>>(), 0.5, 1234).unwrap();
        assert_eq!(a, a2);
        let mut all: Vec<u32> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<u32>>());
        assert!(split_heldout(vec![1], 1.0, 0).is_err());
    }
}
