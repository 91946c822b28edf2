//! Membership-inference scores computed from per-token statistics.
//!
//! All values are in nats. Higher is "more member-like" for Min-K% and
//! Min-K%++; lower is for Loss and DC-PDD.

use crate::error::{Error, Result};
use crate::records::{DocumentRecord, ScoreMethod, ScoredDocument, TokenStats};

/// Default `K` for Min-K% and Min-K%++.
pub const DEFAULT_K_PERCENT: f64 = 20.0;

/// Default additive smoothing for the DC-PDD reference distribution.
pub const DEFAULT_REF_SMOOTHING: f64 = 1.0;

/// Token-level normalized log-probability `(gold - mean) / std`.
///
/// A flat distribution (every token equally likely) has zero spread and the
/// gold token sits exactly at the mean; that case yields 0. Any other
/// zero-spread position is degenerate.
pub fn z_normalize(t: &TokenStats, position: usize) -> Result<f64> {
    if t.dist_std > 0.0 {
        Ok((t.gold_logprob - t.dist_mean) / t.dist_std)
    } else if t.dist_std == 0.0 && t.gold_logprob == t.dist_mean {
        Ok(0.0)
    } else {
        Err(Error::DegenerateDistribution {
            position,
            dist_std: t.dist_std,
        })
    }
}

/// Size of the bottom-K% subset: `max(1, floor(n * k / 100))`.
pub fn bottom_k_count(n: usize, k_percent: f64) -> usize {
    debug_assert!(n >= 1);
    let raw = (n as f64 * k_percent / 100.0).floor() as usize;
    raw.clamp(1, n)
}

fn check_k(k_percent: f64) -> Result<()> {
    if k_percent > 0.0 && k_percent <= 100.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("k_percent {k_percent} not in (0, 100]")))
    }
}

/// Mean of the `count` smallest values. Ties go to the earlier position, and
/// the selected values are summed in ascending order so the result does not
/// depend on which of several tied positions was picked.
fn mean_of_smallest(values: &[f64], count: usize) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sum: f64 = idx[..count].iter().map(|&i| values[i]).sum();
    sum / count as f64
}

/// Average negative log-likelihood.
pub fn score_loss(doc: &DocumentRecord) -> Result<f64> {
    let stats = non_empty(doc)?;
    let sum: f64 = stats.iter().map(|t| t.gold_logprob).sum();
    Ok(-sum / stats.len() as f64)
}

/// Mean gold log-probability over the K% least likely tokens.
pub fn score_min_k(doc: &DocumentRecord, k_percent: f64) -> Result<f64> {
    check_k(k_percent)?;
    let stats = non_empty(doc)?;
    let values: Vec<f64> = stats.iter().map(|t| t.gold_logprob).collect();
    Ok(mean_of_smallest(&values, bottom_k_count(values.len(), k_percent)))
}

/// Mean z-normalized log-probability over the K% lowest-z tokens.
pub fn score_min_kpp(doc: &DocumentRecord, k_percent: f64) -> Result<f64> {
    check_k(k_percent)?;
    let stats = non_empty(doc)?;
    let z = stats
        .iter()
        .enumerate()
        .map(|(i, t)| z_normalize(t, i))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_of_smallest(&z, bottom_k_count(z.len(), k_percent)))
}

fn non_empty(doc: &DocumentRecord) -> Result<&[TokenStats]> {
    if doc.token_stats.is_empty() {
        Err(Error::EmptyInput("document has no token stats"))
    } else {
        Ok(&doc.token_stats)
    }
}

/// Context-free token-frequency distribution estimated from a reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct RefDistribution {
    counts: Vec<f64>,
    smoothing: f64,
    total: f64,
}

impl RefDistribution {
    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Raw counts plus `smoothing * vocab_size`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn count(&self, token_id: u32) -> f64 {
        self.counts.get(token_id as usize).copied().unwrap_or(0.0)
    }

    /// `(count + smoothing) / total`; zero for ids outside the vocabulary.
    pub fn probability(&self, token_id: u32) -> f64 {
        match self.counts.get(token_id as usize) {
            Some(c) if self.total > 0.0 => (c + self.smoothing) / self.total,
            _ => 0.0,
        }
    }
}

pub fn build_q_ref<I, S>(corpus: I, vocab_size: usize, smoothing: f64) -> Result<RefDistribution>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u32]>,
{
    if vocab_size == 0 {
        return Err(Error::Argument("vocab_size must be positive".into()));
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::Argument(format!("smoothing {smoothing} must be finite and >= 0")));
    }
    let mut counts = vec![0.0; vocab_size];
    let mut raw = 0.0;
    for seq in corpus {
        for &tok in seq.as_ref() {
            let slot = counts.get_mut(tok as usize).ok_or(Error::TokenRange {
                token_id: tok,
                vocab_size,
            })?;
            *slot += 1.0;
            raw += 1.0;
        }
    }
    let total = raw + smoothing * vocab_size as f64;
    if total <= 0.0 {
        return Err(Error::Argument(
            "empty reference corpus with zero smoothing has no distribution".into(),
        ));
    }
    Ok(RefDistribution {
        counts,
        smoothing,
        total,
    })
}

/// DC-PDD cross-entropy over first-occurrence tokens:
/// `-(1/|FOS|) * sum_{t in FOS} P_M(x_t | x_<t) * ln Q_ref(x_t)`.
pub fn score_dc_pdd(doc: &DocumentRecord, q_ref: &RefDistribution) -> Result<f64> {
    let stats = non_empty(doc)?;
    let mut seen = rustc_hash::FxHashSet::default();
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in stats {
        if !seen.insert(t.token_id) {
            continue;
        }
        let q = q_ref.probability(t.token_id);
        if q <= 0.0 {
            return Err(Error::ZeroReferenceProbability { token_id: t.token_id });
        }
        sum += t.gold_logprob.exp() * q.ln();
        n += 1;
    }
    Ok(-sum / n as f64)
}

/// Dispatches to the score named by `method`.
pub fn score_document(
    doc: &DocumentRecord,
    method: ScoreMethod,
    k_percent: Option<f64>,
    q_ref: Option<&RefDistribution>,
    model_id: &str,
) -> Result<ScoredDocument> {
    let value = match method {
        ScoreMethod::Loss => score_loss(doc)?,
        ScoreMethod::MinK => score_min_k(doc, require_k(k_percent, method)?)?,
        ScoreMethod::MinKpp => score_min_kpp(doc, require_k(k_percent, method)?)?,
        ScoreMethod::DcPdd => {
            let q = q_ref.ok_or_else(|| {
                Error::Argument("dc_pdd requires a reference distribution (q_ref)".into())
            })?;
            score_dc_pdd(doc, q)?
        }
    };
    Ok(ScoredDocument {
        doc_id: doc.doc_id.clone(),
        variant: doc.variant,
        method,
        k_percent: if method.uses_k() { k_percent } else { None },
        value,
        model_id: model_id.to_string(),
    })
}

fn require_k(k: Option<f64>, method: ScoreMethod) -> Result<f64> {
    k.ok_or_else(|| Error::Argument(format!("{method} requires k_percent")))
}
