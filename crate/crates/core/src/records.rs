//! Token-score record model and its line-delimited JSON wire format.
//!
//! One record per line:
//!
//! ```text
//! {"doc_id":"d1","variant":"original","word_count":3,"text":"a b c","token_stats":[[17,-2.1,-3.0,1.2],[4,-0.3,-2.5,0.9]]}
//! {"doc_id":"d1","variant":{"paraphrase":1},"word_count":3,"token_stats":[[17,-2.4,-3.1,1.1]]}
//! ```
//!
//! `token_stats` holds `[token_id, gold_logprob, dist_mean, dist_std]` for
//! every scored position. Position 0 of a token sequence has no prediction
//! context, so stats start at the second token. Reals are written in the
//! shortest decimal form that parses back to the identical `f64`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-position statistics of the next-token distribution, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u32, f64, f64, f64)", into = "(u32, f64, f64, f64)")]
pub struct TokenStats {
    pub token_id: u32,
    /// `log P(x_t | x_<t)` of the token actually present.
    pub gold_logprob: f64,
    /// Expected log-probability under the full next-token distribution.
    pub dist_mean: f64,
    /// Standard deviation of the log-probability under that distribution.
    pub dist_std: f64,
}

impl From<(u32, f64, f64, f64)> for TokenStats {
    fn from((token_id, gold_logprob, dist_mean, dist_std): (u32, f64, f64, f64)) -> Self {
        TokenStats {
            token_id,
            gold_logprob,
            dist_mean,
            dist_std,
        }
    }
}

impl From<TokenStats> for (u32, f64, f64, f64) {
    fn from(t: TokenStats) -> Self {
        (t.token_id, t.gold_logprob, t.dist_mean, t.dist_std)
    }
}

impl TokenStats {
    pub fn new(token_id: u32, gold_logprob: f64, dist_mean: f64, dist_std: f64) -> Self {
        TokenStats {
            token_id,
            gold_logprob,
            dist_mean,
            dist_std,
        }
    }

    /// Checks the sign and finiteness constraints; `doc_id` is used for the diagnostic.
    pub fn validate(&self, doc_id: &str) -> Result<()> {
        let fields = [
            ("gold_logprob", self.gold_logprob),
            ("dist_mean", self.dist_mean),
            ("dist_std", self.dist_std),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(doc_id, name, format!("{v} is not finite")));
            }
        }
        if self.gold_logprob > 0.0 {
            return Err(Error::invalid(
                doc_id,
                "gold_logprob",
                format!("{} > 0", self.gold_logprob),
            ));
        }
        if self.dist_mean > 0.0 {
            return Err(Error::invalid(
                doc_id,
                "dist_mean",
                format!("{} > 0", self.dist_mean),
            ));
        }
        if self.dist_std < 0.0 {
            return Err(Error::invalid(
                doc_id,
                "dist_std",
                format!("{} < 0", self.dist_std),
            ));
        }
        Ok(())
    }
}

/// Which version of a document a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    /// A candidate paraphrase, numbered from 1.
    Paraphrase(u32),
}

impl Variant {
    pub fn paraphrase_index(self) -> Option<u32> {
        match self {
            Variant::Original => None,
            Variant::Paraphrase(j) => Some(j),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Original => f.write_str("original"),
            Variant::Paraphrase(j) => write!(f, "paraphrase({j})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub variant: Variant,
    pub word_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub token_stats: Vec<TokenStats>,
}

impl DocumentRecord {
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(Error::invalid("<empty>", "doc_id", "must be non-empty"));
        }
        if self.word_count == 0 {
            return Err(Error::invalid(&self.doc_id, "word_count", "must be positive"));
        }
        if self.variant == Variant::Paraphrase(0) {
            return Err(Error::invalid(
                &self.doc_id,
                "variant",
                "paraphrase index starts at 1",
            ));
        }
        if self.token_stats.is_empty() {
            return Err(Error::invalid(&self.doc_id, "token_stats", "must be non-empty"));
        }
        for t in &self.token_stats {
            t.validate(&self.doc_id)?;
        }
        Ok(())
    }
}

/// A document as a token sequence, the input to model-backed providers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub doc_id: String,
    pub variant: Variant,
    pub word_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub token_ids: Vec<u32>,
}

impl TokenizedDocument {
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(Error::invalid("<empty>", "doc_id", "must be non-empty"));
        }
        if self.token_ids.len() < 2 {
            return Err(Error::invalid(
                &self.doc_id,
                "token_ids",
                "need at least 2 tokens (position 0 has no prediction)",
            ));
        }
        Ok(())
    }
}

/// An original document together with its `m` candidate paraphrases,
/// candidates ordered by paraphrase index.
#[derive(Debug, Clone, PartialEq)]
pub struct ParaphraseFamily {
    pub original: DocumentRecord,
    pub candidates: Vec<DocumentRecord>,
    pub m: usize,
}

impl ParaphraseFamily {
    pub fn doc_id(&self) -> &str {
        &self.original.doc_id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    Loss,
    MinK,
    MinKpp,
    DcPdd,
}

impl ScoreMethod {
    pub fn uses_k(self) -> bool {
        matches!(self, ScoreMethod::MinK | ScoreMethod::MinKpp)
    }
}

impl std::fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreMethod::Loss => "loss",
            ScoreMethod::MinK => "min_k",
            ScoreMethod::MinKpp => "min_kpp",
            ScoreMethod::DcPdd => "dc_pdd",
        })
    }
}

impl std::str::FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss" => Ok(ScoreMethod::Loss),
            "min_k" => Ok(ScoreMethod::MinK),
            "min_kpp" => Ok(ScoreMethod::MinKpp),
            "dc_pdd" => Ok(ScoreMethod::DcPdd),
            other => Err(Error::Argument(format!(
                "unknown score method {other:?} (expected loss, min_k, min_kpp or dc_pdd)"
            ))),
        }
    }
}

/// A score method together with its `K`, when it has one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSpec {
    pub method: ScoreMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_percent: Option<f64>,
}

impl ScoreSpec {
    pub fn new(method: ScoreMethod, k_percent: Option<f64>) -> Result<Self> {
        match (method.uses_k(), k_percent) {
            (true, None) => Err(Error::Argument(format!("{method} requires k_percent"))),
            (true, Some(k)) if !(k > 0.0 && k <= 100.0) => {
                Err(Error::Argument(format!("k_percent {k} not in (0, 100]")))
            }
            (true, k) => Ok(ScoreSpec { method, k_percent: k }),
            (false, _) => Ok(ScoreSpec { method, k_percent: None }),
        }
    }

    pub fn min_kpp(k_percent: f64) -> Self {
        ScoreSpec {
            method: ScoreMethod::MinKpp,
            k_percent: Some(k_percent),
        }
    }
}

impl std::fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.k_percent {
            Some(k) => write!(f, "{} (k = {k}%)", self.method),
            None => write!(f, "{}", self.method),
        }
    }
}

/// One document's value under one score method and one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub doc_id: String,
    pub variant: Variant,
    pub method: ScoreMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_percent: Option<f64>,
    pub value: f64,
    pub model_id: String,
}

impl ScoredDocument {
    pub fn validate(&self) -> Result<()> {
        if self.method.uses_k() != self.k_percent.is_some() {
            return Err(Error::invalid(
                &self.doc_id,
                "k_percent",
                format!("must be present exactly for min_k/min_kpp (method {})", self.method),
            ));
        }
        if let Some(k) = self.k_percent {
            if !(k > 0.0 && k <= 100.0) {
                return Err(Error::invalid(&self.doc_id, "k_percent", format!("{k} not in (0,100]")));
            }
        }
        Ok(())
    }
}

/// Reads document records, validating every line.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<DocumentRecord>> {
    let records: Vec<DocumentRecord> = read_jsonl(path.as_ref())?;
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}

pub fn save_records(records: &[DocumentRecord], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path.as_ref(), records)
}

pub fn load_tokenized(path: impl AsRef<Path>) -> Result<Vec<TokenizedDocument>> {
    let docs: Vec<TokenizedDocument> = read_jsonl(path.as_ref())?;
    for d in &docs {
        d.validate()?;
    }
    Ok(docs)
}

pub fn save_tokenized(docs: &[TokenizedDocument], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path.as_ref(), docs)
}

pub fn load_scored(path: impl AsRef<Path>) -> Result<Vec<ScoredDocument>> {
    let docs: Vec<ScoredDocument> = read_jsonl(path.as_ref())?;
    for d in &docs {
        d.validate()?;
    }
    Ok(docs)
}

pub fn save_scored(docs: &[ScoredDocument], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(path.as_ref(), docs)
}

/// Groups records into one family per `doc_id`, in order of first appearance.
pub fn group_families(records: &[DocumentRecord], m: usize) -> Result<Vec<ParaphraseFamily>> {
    if m == 0 {
        return Err(Error::Argument("m must be positive".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut originals: HashMap<&str, &DocumentRecord> = HashMap::new();
    let mut candidates: HashMap<&str, Vec<&DocumentRecord>> = HashMap::new();

    for r in records {
        let id = r.doc_id.as_str();
        if !originals.contains_key(id) && !candidates.contains_key(id) {
            order.push(id);
        }
        match r.variant {
            Variant::Original => {
                if originals.insert(id, r).is_some() {
                    return Err(Error::structure(id, "more than one original"));
                }
            }
            Variant::Paraphrase(_) => candidates.entry(id).or_default().push(r),
        }
    }

    let mut families = Vec::with_capacity(order.len());
    for id in order {
        let original = originals
            .get(id)
            .ok_or_else(|| Error::structure(id, "missing original"))?;
        let mut cands = candidates.remove(id).unwrap_or_default();
        if cands.len() != m {
            return Err(Error::structure(
                id,
                format!("expected {m} paraphrases, found {}", cands.len()),
            ));
        }
        cands.sort_by_key(|r| r.variant);
        for (expected, r) in (1..).zip(&cands) {
            let j = r.variant.paraphrase_index().unwrap_or(0);
            if j as usize > m {
                return Err(Error::structure(id, format!("paraphrase index {j} exceeds m = {m}")));
            }
            if j != expected {
                return Err(Error::structure(
                    id,
                    format!("paraphrase indices must be 1..={m} without repeats (saw {j} at slot {expected})"),
                ));
            }
        }
        let mut seen_texts = std::collections::HashSet::new();
        for r in &cands {
            if let Some(text) = &r.text {
                if !seen_texts.insert(text.to_lowercase()) {
                    return Err(Error::structure(
                        id,
                        format!("{} duplicates another paraphrase after lowercasing", r.variant),
                    ));
                }
            }
        }
        families.push(ParaphraseFamily {
            original: (*original).clone(),
            candidates: cands.into_iter().cloned().collect(),
            m,
        });
    }
    Ok(families)
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Writes `value` as a single pretty-printed JSON document.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Write-then-rename so readers never observe a partially written file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
