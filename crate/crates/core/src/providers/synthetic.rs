//! Additively smoothed n-gram model with exact next-token moments.
//!
//! `p(v | ctx) = (count(ctx, v) + s) / (total(ctx) + s * V)`. Because every
//! unseen token in a context shares one probability, the log-probability
//! mean and standard deviation over the full vocabulary cost O(seen tokens).

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::{ProviderIdentity, ProviderKind, StatsProvider};
use crate::error::{Error, Result};
use crate::records::{read_json, write_json, TokenStats, TokenizedDocument};

pub const MAX_ORDER: usize = 3;
const SLOT_BITS: u32 = 21;
/// Token ids are packed as `id + 1` into 21-bit slots.
pub const MAX_VOCAB: usize = (1 << SLOT_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    ln_denominator: f64,
    mean: f64,
    std: f64,
    flat: bool,
}

#[derive(Debug, Clone)]
struct Context {
    total: f64,
    tokens: Vec<u32>,
    counts: Vec<f64>,
    moments: Moments,
    dirty: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticLm {
    order: usize,
    vocab_size: usize,
    smoothing: f64,
    contexts: FxHashMap<u64, Context>,
    // (context key, token) -> slot in that context's vectors
    slots: FxHashMap<(u64, u32), u32>,
    uniform: Moments,
}

fn context_key(history: &[u32]) -> u64 {
    history.iter().fold(0u64, |k, &t| (k << SLOT_BITS) | (t as u64 + 1))
}

fn unpack_key(mut key: u64) -> Vec<u32> {
    let mut out = Vec::new();
    while key != 0 {
        out.push((key & ((1 << SLOT_BITS) - 1)) as u32 - 1);
        key >>= SLOT_BITS;
    }
    out.reverse();
    out
}

impl SyntheticLm {
    /// An untrained model: every conditional is uniform.
    pub fn new(order: usize, vocab_size: usize, smoothing: f64) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::Argument(format!("order must be in 1..={MAX_ORDER}, got {order}")));
        }
        if vocab_size == 0 || vocab_size > MAX_VOCAB {
            return Err(Error::Argument(format!("vocab_size must be in 1..={MAX_VOCAB}")));
        }
        if !(smoothing.is_finite() && smoothing > 0.0) {
            return Err(Error::Argument("smoothing must be positive".into()));
        }
        let ln_v = (vocab_size as f64).ln();
        Ok(SyntheticLm {
            order,
            vocab_size,
            smoothing,
            contexts: FxHashMap::default(),
            slots: FxHashMap::default(),
            uniform: Moments {
                ln_denominator: ln_v,
                mean: -ln_v,
                std: 0.0,
                flat: true,
            },
        })
    }

    /// Builds a model from explicit `(context, token, count)` entries.
    pub fn from_counts(
        order: usize,
        vocab_size: usize,
        smoothing: f64,
        entries: &[(Vec<u32>, u32, f64)],
    ) -> Result<Self> {
        let mut lm = Self::new(order, vocab_size, smoothing)?;
        let mut touched = Vec::new();
        for (ctx, tok, count) in entries {
            if ctx.len() > order {
                return Err(Error::Argument(format!("context longer than order {order}")));
            }
            if !(count.is_finite() && *count >= 0.0) {
                return Err(Error::Argument(format!("count must be non-negative, got {count}")));
            }
            for &t in ctx.iter().chain(std::iter::once(tok)) {
                lm.check_token(t)?;
            }
            lm.add(context_key(ctx), *tok, *count, &mut touched);
        }
        lm.refresh(touched);
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Number of distinct `(context, token)` pairs with a count.
    pub fn entry_count(&self) -> usize {
        self.slots.len()
    }

    fn check_token(&self, t: u32) -> Result<()> {
        if (t as usize) < self.vocab_size {
            Ok(())
        } else {
            Err(Error::TokenRange {
                token_id: t,
                vocab_size: self.vocab_size,
            })
        }
    }

    fn history<'a>(&self, tokens: &'a [u32], position: usize) -> &'a [u32] {
        &tokens[position.saturating_sub(self.order)..position]
    }

    /// Adds to one count; a context's key goes into `touched` the first time
    /// it changes since its moments were last computed.
    fn add(&mut self, key: u64, tok: u32, amount: f64, touched: &mut Vec<u64>) {
        let ctx = self.contexts.entry(key).or_insert_with(|| Context {
            total: 0.0,
            tokens: Vec::new(),
            counts: Vec::new(),
            moments: self.uniform,
            dirty: false,
        });
        if !ctx.dirty {
            ctx.dirty = true;
            touched.push(key);
        }
        match self.slots.entry((key, tok)) {
            std::collections::hash_map::Entry::Occupied(e) => ctx.counts[*e.get() as usize] += amount,
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(ctx.tokens.len() as u32);
                ctx.tokens.push(tok);
                ctx.counts.push(amount);
            }
        }
        ctx.total += amount;
    }

    fn refresh(&mut self, keys: impl IntoIterator<Item = u64>) {
        let (v, s, uniform) = (self.vocab_size, self.smoothing, self.uniform);
        for key in keys {
            if let Some(ctx) = self.contexts.get_mut(&key) {
                ctx.moments = moments(&ctx.counts, ctx.total, v, s, uniform);
                ctx.dirty = false;
            }
        }
    }

    /// Adds `repetitions` to the count of every observed `(context, token)`.
    pub fn train_mut<S: AsRef<[u32]>>(&mut self, docs: &[S], repetitions: u32) -> Result<()> {
        for doc in docs {
            for &t in doc.as_ref() {
                self.check_token(t)?;
            }
        }
        if repetitions == 0 {
            return Ok(());
        }
        let amount = repetitions as f64;
        let mut touched = Vec::new();
        for doc in docs {
            let doc = doc.as_ref();
            for i in 0..doc.len() {
                let key = context_key(self.history(doc, i));
                self.add(key, doc[i], amount, &mut touched);
            }
        }
        self.refresh(touched);
        Ok(())
    }

    /// Copy-on-train: returns a new model, leaving `self` untouched.
    pub fn trained<S: AsRef<[u32]>>(&self, docs: &[S], repetitions: u32) -> Result<Self> {
        let mut lm = self.clone();
        lm.train_mut(docs, repetitions)?;
        Ok(lm)
    }

    /// Conditional probability of `tok` after `history` (truncated to the order).
    pub fn probability(&self, history: &[u32], tok: u32) -> f64 {
        let history = &history[history.len().saturating_sub(self.order)..];
        let key = context_key(history);
        let v = self.vocab_size as f64;
        match self.contexts.get(&key) {
            None => 1.0 / v,
            Some(ctx) => {
                let c = self.slots.get(&(key, tok)).map_or(0.0, |&i| ctx.counts[i as usize]);
                (c + self.smoothing) / (ctx.total + self.smoothing * v)
            }
        }
    }

    /// Exact per-position stats for positions `1..n`.
    pub fn synth_stats(&self, tokens: &[u32]) -> Result<Vec<TokenStats>> {
        for &t in tokens {
            self.check_token(t)?;
        }
        let ln_s = self.smoothing.ln();
        let mut out = Vec::with_capacity(tokens.len().saturating_sub(1));
        for i in 1..tokens.len() {
            let key = context_key(self.history(tokens, i));
            let tok = tokens[i];
            let stats = match self.contexts.get(&key) {
                Some(ctx) if !ctx.moments.flat => {
                    let m = ctx.moments;
                    let c = self.slots.get(&(key, tok)).map_or(0.0, |&j| ctx.counts[j as usize]);
                    let ln_num = if c == 0.0 { ln_s } else { (c + self.smoothing).ln() };
                    TokenStats::new(tok, ln_num - m.ln_denominator, m.mean, m.std)
                }
                // flat conditional: gold equals the mean exactly
                Some(ctx) => TokenStats::new(tok, ctx.moments.mean, ctx.moments.mean, 0.0),
                None => TokenStats::new(tok, self.uniform.mean, self.uniform.mean, 0.0),
            };
            out.push(stats);
        }
        Ok(out)
    }

    /// Ancestral sampling. The first `order` tokens use truncated contexts.
    pub fn synth_generate<R: Rng + ?Sized>(&self, length: usize, rng: &mut R) -> Result<Vec<u32>> {
        if length < self.order {
            return Err(Error::Argument(format!(
                "length {length} is shorter than the model order {}",
                self.order
            )));
        }
        let mut out = Vec::with_capacity(length);
        for i in 0..length {
            let key = context_key(self.history(&out, i));
            let tok = self.sample_next(key, rng);
            out.push(tok);
        }
        Ok(out)
    }

    fn sample_next<R: Rng + ?Sized>(&self, key: u64, rng: &mut R) -> u32 {
        let v = self.vocab_size;
        let (total, ctx) = match self.contexts.get(&key) {
            Some(ctx) => (ctx.total, Some(ctx)),
            None => (0.0, None),
        };
        let u = rng.gen::<f64>() * (total + self.smoothing * v as f64);
        if let Some(ctx) = ctx {
            if u < total {
                let mut acc = 0.0;
                for (j, &c) in ctx.counts.iter().enumerate() {
                    acc += c;
                    if u < acc {
                        return ctx.tokens[j];
                    }
                }
                return *ctx.tokens.last().expect("non-empty context");
            }
        }
        (((u - total) / self.smoothing) as usize).min(v - 1) as u32
    }

    /// All counts, sorted by context then token.
    pub fn entries(&self) -> Vec<(Vec<u32>, u32, f64)> {
        let mut keys: Vec<_> = self.slots.keys().copied().collect();
        keys.sort_unstable_by_key(|&(key, tok)| (unpack_key(key), tok));
        keys.into_iter()
            .map(|(key, tok)| {
                let ctx = &self.contexts[&key];
                (unpack_key(key), tok, ctx.counts[self.slots[&(key, tok)] as usize])
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            order: self.order,
            vocab_size: self.vocab_size,
            smoothing: self.smoothing,
            entries: self.entries(),
        };
        write_json(path.as_ref(), &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: ModelFile = read_json(path.as_ref())?;
        Self::from_counts(file.order, file.vocab_size, file.smoothing, &file.entries)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    order: usize,
    vocab_size: usize,
    smoothing: f64,
    entries: Vec<(Vec<u32>, u32, f64)>,
}

fn moments(counts: &[f64], total: f64, vocab: usize, s: f64, uniform: Moments) -> Moments {
    let k = counts.len();
    let first = counts.first().copied().unwrap_or(0.0);
    if total == 0.0 || (k == vocab && counts.iter().all(|&c| c == first)) {
        return uniform;
    }
    let denom = total + s * vocab as f64;
    let ln_d = denom.ln();
    let unseen = (vocab - k) as f64;
    let p_u = s / denom;
    let ln_pu = s.ln() - ln_d;
    let mut mean = unseen * p_u * ln_pu;
    for &c in counts {
        let p = (c + s) / denom;
        mean += p * ((c + s).ln() - ln_d);
    }
    let mut var = unseen * p_u * (ln_pu - mean).powi(2);
    for &c in counts {
        let p = (c + s) / denom;
        var += p * ((c + s).ln() - ln_d - mean).powi(2);
    }
    Moments {
        ln_denominator: ln_d,
        mean,
        std: var.max(0.0).sqrt(),
        flat: false,
    }
}

/// Renders token ids as whitespace-separated `t<id>` words.
pub fn render_tokens(tokens: &[u32]) -> String {
    let mut out = String::with_capacity(tokens.len() * 5);
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push('t');
        out.push_str(&t.to_string());
    }
    out
}

pub fn parse_tokens(text: &str) -> Result<Vec<u32>> {
    text.split_whitespace()
        .map(|w| {
            w.strip_prefix('t')
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| Error::Argument(format!("not a synthetic token: {w:?}")))
        })
        .collect()
}

/// Serves stats straight from a [`SyntheticLm`].
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    identity: ProviderIdentity,
    lm: Arc<SyntheticLm>,
}

impl SyntheticProvider {
    pub fn new(model_id: &str, lm: Arc<SyntheticLm>) -> Result<Self> {
        Ok(SyntheticProvider {
            identity: ProviderIdentity::new(model_id, ProviderKind::Synthetic, lm.vocab_size())?,
            lm,
        })
    }

    pub fn model(&self) -> &SyntheticLm {
        &self.lm
    }
}

impl StatsProvider for SyntheticProvider {
    fn identity(&self) -> &ProviderIdentity {
        &self.identity
    }

    fn stats(&self, doc: &TokenizedDocument) -> Result<Vec<TokenStats>> {
        self.lm.synth_stats(&doc.token_ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{DocumentRecord, Variant};
    use crate::scores::score_min_kpp;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(stats: Vec<TokenStats>) -> DocumentRecord {
        DocumentRecord {
            doc_id: "x".into(),
            variant: Variant::Original,
            word_count: 1,
            text: None,
            token_stats: stats,
        }
    }

    #[test]
    fn counting_example() {
        let lm = SyntheticLm::from_counts(1, 2, 1.0, &[(vec![0], 0, 3.0), (vec![0], 1, 1.0)]).unwrap();
        assert_eq!(lm.probability(&[0], 0), 4.0 / 6.0);
        assert_eq!(lm.probability(&[0], 1), 2.0 / 6.0);
    }

    #[test]
    fn uniform_model_has_zero_z() {
        let lm = SyntheticLm::new(2, 50, 1.0).unwrap();
        let stats = lm.synth_stats(&[3, 9, 9, 0, 49]).unwrap();
        assert_eq!(stats.len(), 4);
        for t in &stats {
            assert_eq!(t.gold_logprob, t.dist_mean);
            assert_eq!(t.dist_std, 0.0);
        }
        assert_eq!(score_min_kpp(&record(stats), 20.0).unwrap(), 0.0);
    }

    #[test]
    fn moments_match_brute_force() {
        let lm = SyntheticLm::from_counts(
            2,
            7,
            0.5,
            &[(vec![1, 2], 3, 4.0), (vec![1, 2], 5, 1.0), (vec![1, 2], 0, 2.5)],
        )
        .unwrap();
        let stats = lm.synth_stats(&[1, 2, 5]).unwrap();
        let p: Vec<f64> = (0..7).map(|v| lm.probability(&[1, 2], v)).collect();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let mean: f64 = p.iter().map(|q| q * q.ln()).sum();
        let var: f64 = p.iter().map(|q| q * (q.ln() - mean).powi(2)).sum();
        let last = stats[1];
        assert!((last.gold_logprob - p[5].ln()).abs() < 1e-12);
        assert!((last.dist_mean - mean).abs() < 1e-12);
        assert!((last.dist_std - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn out_of_vocab_rejected() {
        let lm = SyntheticLm::new(2, 10, 1.0).unwrap();
        assert!(matches!(lm.synth_stats(&[1, 10]), Err(Error::TokenRange { token_id: 10, .. })));
        assert!(matches!(lm.trained(&[vec![11u32]], 1), Err(Error::TokenRange { .. })));
    }

    #[test]
    fn zero_repetitions_and_additivity() {
        let base = SyntheticLm::new(2, 30, 0.1).unwrap();
        let docs = vec![vec![1u32, 2, 3, 1, 2, 4], vec![5, 5, 5]];
        let same = base.trained(&docs, 0).unwrap();
        assert_eq!(same.entry_count(), 0);
        let twice = base.trained(&docs, 1).unwrap().trained(&docs, 1).unwrap();
        let double = base.trained(&docs, 2).unwrap();
        assert_eq!(twice.entries(), double.entries());
        let probe = [1u32, 2, 3, 5, 5, 9];
        assert_eq!(twice.synth_stats(&probe).unwrap(), double.synth_stats(&probe).unwrap());
        // the original model is untouched
        assert_eq!(base.entry_count(), 0);
    }

    #[test]
    fn heavy_training_raises_gold_everywhere() {
        let base = SyntheticLm::from_counts(2, 20, 1.0, &[(vec![1, 2], 7, 5.0), (vec![], 4, 3.0)]).unwrap();
        let doc = vec![1u32, 2, 3, 4, 5, 6, 7];
        let before = base.synth_stats(&doc).unwrap();
        let after = base.trained(std::slice::from_ref(&doc), 50).unwrap().synth_stats(&doc).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!(a.gold_logprob > b.gold_logprob);
        }
    }

    #[test]
    fn generation_is_seeded_and_checked() {
        let lm = SyntheticLm::from_counts(2, 10, 0.5, &[(vec![1], 2, 4.0)]).unwrap();
        let a = lm.synth_generate(200, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = lm.synth_generate(200, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&t| t < 10));
        assert!(lm.synth_generate(1, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn uniform_generation_frequencies() {
        let v = 50;
        let n = 100_000;
        let lm = SyntheticLm::new(2, v, 1.0).unwrap();
        let seq = lm.synth_generate(n, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let mut freq = vec![0usize; v];
        for t in seq {
            freq[t as usize] += 1;
        }
        let p = 1.0 / v as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        // 4 sigma per cell keeps the family-wise false alarm rate tiny
        for f in freq {
            assert!((f as f64 - n as f64 * p).abs() < 4.0 * sd, "{f}");
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let lm = SyntheticLm::new(2, 40, 0.25)
            .unwrap()
            .trained(&[vec![1u32, 5, 9, 1, 5, 3]], 3)
            .unwrap();
        let path = dir.path().join("lm.json");
        lm.save(&path).unwrap();
        let back = SyntheticLm::load(&path).unwrap();
        assert_eq!(back.entries(), lm.entries());
        let probe = [1u32, 5, 9, 2];
        assert_eq!(back.synth_stats(&probe).unwrap(), lm.synth_stats(&probe).unwrap());
    }

    #[test]
    fn token_text_roundtrip() {
        assert_eq!(render_tokens(&[3, 0, 17]), "t3 t0 t17");
        assert_eq!(parse_tokens("t3  t0\nt17").unwrap(), vec![3, 0, 17]);
        assert!(parse_tokens("t3 x").is_err());
        assert_eq!(parse_tokens("").unwrap(), Vec::<u32>::new());
    }

    proptest! {
        #[test]
        fn conditionals_sum_to_one(
            docs in prop::collection::vec(prop::collection::vec(0u32..12, 1..30), 1..5),
            reps in 1u32..5,
            ctx in prop::collection::vec(0u32..12, 0..3),
        ) {
            let lm = SyntheticLm::new(2, 12, 0.3).unwrap().trained(&docs, reps).unwrap();
            let sum: f64 = (0..12).map(|v| lm.probability(&ctx, v)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn training_beats_untrained(doc in prop::collection::vec(0u32..1000, 20..80)) {
            let base = SyntheticLm::new(2, 1000, 1.0).unwrap();
            let trained = base.trained(std::slice::from_ref(&doc), 1).unwrap();
            let before = score_min_kpp(&record(base.synth_stats(&doc).unwrap()), 20.0).unwrap();
            let after = score_min_kpp(&record(trained.synth_stats(&doc).unwrap()), 20.0).unwrap();
            prop_assert!(after > before, "{after} <= {before}");
        }
    }
}
