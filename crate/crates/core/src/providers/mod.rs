//! Sources of per-token statistics: stored record files, a remote grey-box
//! endpoint, and a built-in synthetic n-gram model. Also the paraphrase
//! acquisition client.

pub mod file;
pub mod paraphrase;
pub mod remote;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{DocumentRecord, TokenStats, TokenizedDocument};

pub use file::FileProvider;
pub use remote::{HttpTransport, RemoteProvider, RetryPolicy, Transport, TransportError};
pub use synthetic::{SyntheticLm, SyntheticProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    File,
    Remote,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderIdentity {
    pub model_id: String,
    pub provider_kind: ProviderKind,
    pub vocab_size: usize,
}

impl ProviderIdentity {
    pub fn new(model_id: impl Into<String>, provider_kind: ProviderKind, vocab_size: usize) -> Result<Self> {
        let model_id = model_id.into();
        if model_id.is_empty() {
            return Err(Error::Argument("model_id must be non-empty".into()));
        }
        if vocab_size == 0 {
            return Err(Error::Argument("vocab_size must be positive".into()));
        }
        Ok(ProviderIdentity {
            model_id,
            provider_kind,
            vocab_size,
        })
    }
}

/// Anything that can turn a token sequence into per-position statistics.
///
/// Stats cover positions `1..n`; position 0 has no prediction context.
pub trait StatsProvider: Sync {
    fn identity(&self) -> &ProviderIdentity;

    fn stats(&self, doc: &TokenizedDocument) -> Result<Vec<TokenStats>>;

    fn record(&self, doc: &TokenizedDocument) -> Result<DocumentRecord> {
        let record = DocumentRecord {
            doc_id: doc.doc_id.clone(),
            variant: doc.variant,
            word_count: doc.word_count,
            text: doc.text.clone(),
            token_stats: self.stats(doc)?,
        };
        record.validate()?;
        Ok(record)
    }
}

/// Scores every document, in order, with at most `jobs` concurrent requests.
pub fn collect_records(
    provider: &dyn StatsProvider,
    docs: &[TokenizedDocument],
    jobs: usize,
) -> Result<Vec<DocumentRecord>> {
    use rayon::prelude::*;
    if jobs <= 1 {
        return docs.iter().map(|d| provider.record(d)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| docs.par_iter().map(|d| provider.record(d)).collect())
}
