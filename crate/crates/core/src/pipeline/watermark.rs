use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::{Phase, RunManifest};
use super::par_map;
use crate::error::Result;
use crate::providers::ProviderIdentity;
use crate::records::{save_records, save_scored, DocumentRecord, ParaphraseFamily, ScoreSpec, ScoredDocument};
use crate::sampler::{
    compute_ratio_row, compute_side_balance, save_audit, select_all, AuditEntry, RatioRow, SideBalance, Strategy,
    WatermarkSelection, DEFAULT_ALPHA,
};
use crate::scores::{score_document, RefDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatermarkConfig {
    pub dataset_id: String,
    pub score: ScoreSpec,
    pub alpha: f64,
    pub strategy: Strategy,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for WatermarkConfig {
    fn default() -> Self {
        WatermarkConfig {
            dataset_id: "dataset".into(),
            score: ScoreSpec::min_kpp(crate::scores::DEFAULT_K_PERCENT),
            alpha: DEFAULT_ALPHA,
            strategy: Strategy::Spectra,
            seed: 1234,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WatermarkRun {
    /// The chosen paraphrase of every document, in family order.
    pub watermarked: Vec<DocumentRecord>,
    pub originals: Vec<DocumentRecord>,
    /// Original score followed by the candidate scores, per family.
    pub scores: Vec<Vec<ScoredDocument>>,
    pub rows: Vec<RatioRow>,
    pub balance: SideBalance,
    pub selections: Vec<WatermarkSelection>,
    pub manifest: RunManifest,
}

/// Scores each family under the scoring model, then picks one paraphrase per
/// document. Any failure aborts the whole run, since the side balance depends
/// on every row.
pub fn run_watermark(
    families: &[ParaphraseFamily],
    scoring: &ProviderIdentity,
    config: &WatermarkConfig,
    q_ref: Option<&RefDistribution>,
) -> Result<WatermarkRun> {
    let spec = config.score;
    let scores = par_map(families, config.jobs, |fam| {
        std::iter::once(&fam.original)
            .chain(&fam.candidates)
            .map(|r| score_document(r, spec.method, spec.k_percent, q_ref, &scoring.model_id))
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = families
        .iter()
        .zip(&scores)
        .map(|(fam, s)| {
            let candidates: Vec<f64> = s[1..].iter().map(|d| d.value).collect();
            compute_ratio_row(fam.doc_id(), s[0].value, &candidates)
        })
        .collect::<Result<Vec<_>>>()?;
    let balance = compute_side_balance(&rows);
    let selections = select_all(&rows, config.strategy, config.alpha, config.seed)?;
    let watermarked = families
        .iter()
        .zip(&selections)
        .map(|(fam, sel)| fam.candidates[sel.chosen_index - 1].clone())
        .collect();
    let originals = families.iter().map(|f| f.original.clone()).collect();
    let manifest = RunManifest::new(&config.dataset_id, Phase::Watermark, spec)
        .provider("scoring", scoring)
        .seed("sampler", config.seed)
        .param("documents", families.len())
        .param("paraphrases_per_document", families.first().map_or(0, |f| f.m))
        .param("pi_plus", balance.pi_plus)
        .param("count_all_below", balance.count_all_below)
        .param("count_all_above", balance.count_all_above);
    let manifest = RunManifest {
        alpha: Some(config.alpha),
        strategy: Some(config.strategy),
        ..manifest
    };
    log::info!(
        "watermarked {} documents (pi_plus = {:.4}, |A| = {}, |B| = {})",
        families.len(),
        balance.pi_plus,
        balance.count_all_below,
        balance.count_all_above
    );
    Ok(WatermarkRun {
        watermarked,
        originals,
        scores,
        rows,
        balance,
        selections,
        manifest,
    })
}

impl WatermarkRun {
    pub fn audit(&self) -> Vec<AuditEntry> {
        self.rows
            .iter()
            .zip(&self.selections)
            .map(|(r, s)| AuditEntry::new(r, s))
            .collect()
    }

    /// Writes `watermarked.jsonl`, `originals.jsonl`, `scores.jsonl`,
    /// `audit.jsonl` and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<RunManifest> {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
        let mut manifest = self.manifest.clone();
        let files = [
            ("watermarked", "watermarked.jsonl"),
            ("originals", "originals.jsonl"),
            ("scores", "scores.jsonl"),
            ("audit", "audit.jsonl"),
            ("manifest", "manifest.json"),
        ];
        for (k, f) in files {
            manifest.outputs.insert(k.into(), dir.join(f).display().to_string());
        }
        save_records(&self.watermarked, dir.join("watermarked.jsonl"))?;
        save_records(&self.originals, dir.join("originals.jsonl"))?;
        let flat: Vec<ScoredDocument> = self.scores.iter().flatten().cloned().collect();
        save_scored(&flat, dir.join("scores.jsonl"))?;
        save_audit(&self.audit(), dir.join("audit.jsonl"))?;
        manifest.save(dir.join("manifest.json"))?;
        Ok(manifest)
    }
}
