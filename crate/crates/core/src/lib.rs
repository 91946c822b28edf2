//! Dataset watermarking for membership verification.
//!
//! A dataset owner releases, for every document, one paraphrase chosen by its
//! score ratio under a scoring model. If someone later trains on the release,
//! the chosen paraphrases gain likelihood under the trained model relative to
//! the originals, and a one-sided paired t-test on the per-document ratio
//! differences shows it.
//!
//! Modules, in pipeline order:
//!
//! * [`records`]: token statistics, documents, paraphrase families, JSONL I/O.
//! * [`providers`]: where token statistics come from (stored files, an HTTP
//!   endpoint, or a trainable synthetic n-gram model) plus paraphrase clients.
//! * [`scores`]: Loss, Min-K%, Min-K%++ and DC-PDD.
//! * [`sampler`]: score ratios, side balance and paraphrase selection.
//! * [`verifier`]: the paired t-test with log-space p-values, and metrics.
//! * [`pipeline`]: corpus preparation, watermarking, verification and a
//!   self-contained synthetic simulation.
//! * [`cli`]: the `spectra` command.
//!
//! Runnable examples live in `examples/`:
//!
//! | example | shows |
//! |---|---|
//! | `score_documents` | every score method on a seen and an unseen model |
//! | `watermark_dataset` | stub paraphrases, side balance, selection |
//! | `membership_simulation` | the full loop for the three selection strategies |
//! | `dedup_corpus` | truncation, n-gram Bloom deduplication, held-out split |
//! | `statistics` | t-test, extreme tails, AUC, TPR at FPR, rank correlation |
//! | `remote_scoring` | the HTTP provider with retries against a local endpoint |

pub mod cli;
pub mod error;
pub mod pipeline;
pub mod providers;
pub mod records;
pub mod sampler;
pub mod scores;
pub mod verifier;

pub use error::{Error, Result};
