use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by the class of failure so callers (the CLI in
/// particular) can map each one onto a single exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("record {doc_id}: invalid {field}: {message}")]
    Validation {
        doc_id: String,
        field: &'static str,
        message: String,
    },

    #[error("document {doc_id}: {message}")]
    Structure { doc_id: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate next-token distribution at position {position} (dist_std = {dist_std})")]
    DegenerateDistribution { position: usize, dist_std: f64 },

    #[error("reference probability of token {token_id} is zero")]
    ZeroReferenceProbability { token_id: u32 },

    #[error("token id {token_id} out of range for vocabulary of size {vocab_size}")]
    TokenRange { token_id: u32, vocab_size: usize },

    #[error("original score of {doc_id} is zero; ratio undefined")]
    ZeroOriginalScore { doc_id: String },

    #[error("cannot pair {doc_id}: {message}")]
    Pairing { doc_id: String, message: String },

    #[error("need at least 2 samples for a paired t-test, got {0}")]
    InsufficientSample(usize),

    #[error("differences have zero variance (all equal to {mean}); no evidence either way")]
    DegenerateVariance { mean: f64 },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("document {0} not found in provider")]
    MissingDocument(String),

    #[error("document {0} appears more than once in provider")]
    AmbiguousDocument(String),

    #[error("provider contract violated: {0}")]
    ProviderContract(String),

    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("could not obtain a unique paraphrase for temperature slot {slot} (t = {temperature}) after {retries} retries")]
    UniquenessFailure {
        slot: usize,
        temperature: f64,
        retries: u32,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(doc_id: &str, field: &'static str, message: impl Into<String>) -> Self {
        Error::Validation {
            doc_id: doc_id.to_string(),
            field,
            message: message.into(),
        }
    }

    pub(crate) fn structure(doc_id: &str, message: impl Into<String>) -> Self {
        Error::Structure {
            doc_id: doc_id.to_string(),
            message: message.into(),
        }
    }
}
