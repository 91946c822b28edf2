use std::collections::HashMap;
use std::path::Path;

use super::{ProviderIdentity, ProviderKind, StatsProvider};
use crate::error::{Error, Result};
use crate::records::{load_records, DocumentRecord, TokenStats, TokenizedDocument, Variant};

/// Serves stats stored in a record file, keyed by `(doc_id, variant)`.
#[derive(Debug, Clone)]
pub struct FileProvider {
    identity: ProviderIdentity,
    records: Vec<DocumentRecord>,
    index: HashMap<(String, Variant), usize>,
}

impl FileProvider {
    pub fn open(path: impl AsRef<Path>, model_id: &str, vocab_size: usize) -> Result<Self> {
        Self::from_records(load_records(path)?, model_id, vocab_size)
    }

    pub fn from_records(records: Vec<DocumentRecord>, model_id: &str, vocab_size: usize) -> Result<Self> {
        let identity = ProviderIdentity::new(model_id, ProviderKind::File, vocab_size)?;
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert((r.doc_id.clone(), r.variant), i).is_some() {
                return Err(Error::AmbiguousDocument(format!("{} {}", r.doc_id, r.variant)));
            }
        }
        Ok(FileProvider {
            identity,
            records,
            index,
        })
    }

    pub fn get(&self, doc_id: &str, variant: Variant) -> Result<&DocumentRecord> {
        self.index
            .get(&(doc_id.to_string(), variant))
            .map(|&i| &self.records[i])
            .ok_or_else(|| Error::MissingDocument(format!("{doc_id} {variant}")))
    }

    pub fn records(&self) -> &[DocumentRecord] {
        &self.records
    }
}

impl StatsProvider for FileProvider {
    fn identity(&self) -> &ProviderIdentity {
        &self.identity
    }

    /// Returns the stored stats; when the request carries tokens they must
    /// match the stored token ids.
    fn stats(&self, doc: &TokenizedDocument) -> Result<Vec<TokenStats>> {
        let rec = self.get(&doc.doc_id, doc.variant)?;
        if !doc.token_ids.is_empty() {
            let stored = rec.token_stats.iter().map(|t| t.token_id);
            if doc.token_ids.len() != rec.token_stats.len() + 1 || !stored.eq(doc.token_ids[1..].iter().copied()) {
                return Err(Error::ProviderContract(format!(
                    "stored tokens for {} {} differ from the request",
                    doc.doc_id, doc.variant
                )));
            }
        }
        Ok(rec.token_stats.clone())
    }
}
