use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::manifest::{Phase, RunManifest};
use super::par_map;
use crate::error::{Error, Result};
use crate::providers::ProviderIdentity;
use crate::records::{DocumentRecord, ScoreSpec, Variant};
use crate::scores::{score_document, RefDistribution, DEFAULT_K_PERCENT};
use crate::verifier::{verify, RatioPair, ReportContext, VerificationReport, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub dataset_id: String,
    pub score: ScoreSpec,
    pub threshold: f64,
    /// Seed of the watermarking run being checked; recorded, not consumed.
    pub seed: u64,
    pub jobs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            dataset_id: "dataset".into(),
            score: ScoreSpec::min_kpp(DEFAULT_K_PERCENT),
            threshold: DEFAULT_THRESHOLD,
            seed: 1234,
            jobs: 1,
        }
    }
}

/// Records of one model: identity plus the stats it produced.
#[derive(Debug, Clone, Copy)]
pub struct RecordSet<'a> {
    pub identity: &'a ProviderIdentity,
    pub records: &'a [DocumentRecord],
}

/// Pairs each original with the single watermarked variant of the same
/// document, in order of first appearance.
pub fn pair_records(records: &[DocumentRecord]) -> Result<Vec<(&DocumentRecord, &DocumentRecord)>> {
    let mut order: Vec<&str> = Vec::new();
    let mut slots: HashMap<&str, (Option<&DocumentRecord>, Option<&DocumentRecord>)> = HashMap::new();
    for r in records {
        let slot = slots.entry(&r.doc_id).or_insert_with(|| {
            order.push(&r.doc_id);
            (None, None)
        });
        let target = match r.variant {
            Variant::Original => &mut slot.0,
            Variant::Paraphrase(_) => &mut slot.1,
        };
        if target.replace(r).is_some() {
            return Err(Error::Pairing {
                doc_id: r.doc_id.clone(),
                message: format!("more than one {} record", if r.variant == Variant::Original { "original" } else { "watermarked" }),
            });
        }
    }
    order
        .into_iter()
        .map(|id| match slots[id] {
            (Some(o), Some(w)) => Ok((o, w)),
            (None, _) => Err(Error::Pairing {
                doc_id: id.to_string(),
                message: "no original record".into(),
            }),
            (_, None) => Err(Error::Pairing {
                doc_id: id.to_string(),
                message: "no watermarked record".into(),
            }),
        })
        .collect()
}

/// Scores originals and watermarked texts under both models and runs the
/// one-sided paired t-test on the ratio differences.
pub fn run_verify(
    scoring: RecordSet<'_>,
    target: RecordSet<'_>,
    config: &VerifyConfig,
    q_ref: Option<&RefDistribution>,
) -> Result<VerificationReport> {
    let pairs = pair_records(scoring.records)?;
    let mut target_index: HashMap<(&str, Variant), &DocumentRecord> = HashMap::new();
    for r in target.records {
        target_index.insert((&r.doc_id, r.variant), r);
    }
    if target_index.len() != 2 * pairs.len() {
        return Err(Error::Pairing {
            doc_id: "*".into(),
            message: format!(
                "target has {} records, scoring side has {}",
                target.records.len(),
                2 * pairs.len()
            ),
        });
    }
    let spec = config.score;
    let score = |r: &DocumentRecord, model: &str| score_document(r, spec.method, spec.k_percent, q_ref, model);
    let ratio_pairs = par_map(&pairs, config.jobs, |&(orig, wm)| {
        let lookup = |r: &DocumentRecord| {
            target_index.get(&(r.doc_id.as_str(), r.variant)).copied().ok_or_else(|| Error::Pairing {
                doc_id: r.doc_id.clone(),
                message: format!("{} missing under the target model", r.variant),
            })
        };
        let (t_orig, t_wm) = (lookup(orig)?, lookup(wm)?);
        RatioPair::from_scores(
            &score(t_orig, &target.identity.model_id)?,
            &score(t_wm, &target.identity.model_id)?,
            &score(orig, &scoring.identity.model_id)?,
            &score(wm, &scoring.identity.model_id)?,
        )
    })?;
    let ctx = ReportContext {
        scoring_model_id: scoring.identity.model_id.clone(),
        target_model_id: target.identity.model_id.clone(),
        score_method: spec,
        seed: config.seed,
    };
    let mut report = verify(&ratio_pairs, config.threshold, &ctx)?;
    let manifest = RunManifest::new(&config.dataset_id, Phase::Verify, spec)
        .provider("scoring", scoring.identity)
        .provider("target", target.identity)
        .seed("watermark", config.seed)
        .param("threshold", config.threshold)
        .param("pairs", ratio_pairs.len());
    report.manifest = Some(manifest);
    Ok(report)
}
