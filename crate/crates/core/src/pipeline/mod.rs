//! End-to-end workflows: corpus preparation, watermarking, verification,
//! and the self-contained synthetic simulation.

pub mod corpus;
pub mod manifest;
pub mod simulate;
pub mod verify;
pub mod watermark;

use crate::error::{Error, Result};

pub use corpus::{dedup_against, split_heldout, truncate_document, CorpusConfig, DedupOutcome, Truncation};
pub use manifest::{Phase, RunManifest};
pub use simulate::{run_simulation, SimulationConfig, SimulationOutcome, World, WorldConfig};
pub use verify::{pair_records, run_verify, RecordSet, VerifyConfig};
pub use watermark::{run_watermark, WatermarkConfig, WatermarkRun};

/// Order-preserving map over `items` with at most `jobs` worker threads.
pub(crate) fn par_map<T, U, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}
