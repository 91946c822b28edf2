//! Membership verification: score ratios under the scoring and target
//! models, compared with a one-sided paired t-test.
//!
//! Under the null hypothesis the target model's ratios match the scoring
//! model's. Training on the watermarked text raises its (negative) Min-K%++
//! score, which shrinks the target ratio, so the alternative is "less".

pub mod metrics;
pub mod special;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::manifest::RunManifest;
use crate::records::{ScoreSpec, ScoredDocument};

pub use metrics::{average_ranks, kendall_tau, roc_auc, spearman_rho, tpr_at_fpr};
pub use special::{ln_t_cdf, t_cdf};

pub const DEFAULT_THRESHOLD: f64 = 1e-4;

/// Originals with `|f(x)|` below this are counted as unstable in reports.
pub const NEAR_ZERO_SCORE: f64 = 1e-6;

/// `f(x'; M) / f(x; M)` for one model.
pub fn score_ratio(original: &ScoredDocument, watermarked: &ScoredDocument) -> Result<f64> {
    if original.doc_id != watermarked.doc_id {
        return Err(Error::Pairing {
            doc_id: original.doc_id.clone(),
            message: format!("paired with {}", watermarked.doc_id),
        });
    }
    if original.model_id != watermarked.model_id {
        return Err(Error::Pairing {
            doc_id: original.doc_id.clone(),
            message: format!(
                "scored by different models ({} vs {})",
                original.model_id, watermarked.model_id
            ),
        });
    }
    if original.method != watermarked.method || original.k_percent != watermarked.k_percent {
        return Err(Error::Pairing {
            doc_id: original.doc_id.clone(),
            message: "scored with different methods".into(),
        });
    }
    if original.value == 0.0 {
        return Err(Error::ZeroOriginalScore {
            doc_id: original.doc_id.clone(),
        });
    }
    Ok(watermarked.value / original.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioPair {
    pub doc_id: String,
    pub ratio_target: f64,
    pub ratio_scoring: f64,
    /// `ratio_target - ratio_scoring`.
    pub difference: f64,
    /// Original-document scores under the target and scoring models.
    pub original_target: f64,
    pub original_scoring: f64,
}

impl RatioPair {
    /// Builds the pair from the four scored documents of one `(x, x')` pair.
    pub fn from_scores(
        target_original: &ScoredDocument,
        target_watermarked: &ScoredDocument,
        scoring_original: &ScoredDocument,
        scoring_watermarked: &ScoredDocument,
    ) -> Result<Self> {
        let ratio_target = score_ratio(target_original, target_watermarked)?;
        let ratio_scoring = score_ratio(scoring_original, scoring_watermarked)?;
        if target_original.doc_id != scoring_original.doc_id {
            return Err(Error::Pairing {
                doc_id: target_original.doc_id.clone(),
                message: format!("target/scoring mismatch with {}", scoring_original.doc_id),
            });
        }
        Ok(RatioPair {
            doc_id: target_original.doc_id.clone(),
            ratio_target,
            ratio_scoring,
            difference: ratio_target - ratio_scoring,
            original_target: target_original.value,
            original_scoring: scoring_original.value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// H1: the mean difference is negative.
    Less,
    /// H1: the mean difference is positive.
    Greater,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
    /// `log10(p_value)`, finite even when `p_value` underflows.
    pub log10_p: f64,
    pub n: usize,
    pub mean_difference: f64,
    pub sd_difference: f64,
    pub alternative: Alternative,
}

/// One-sample t-test on paired differences, sample sd with `n - 1`.
pub fn paired_t_test(differences: &[f64], alternative: Alternative) -> Result<TTestResult> {
    let n = differences.len();
    if n < 2 {
        return Err(Error::InsufficientSample(n));
    }
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(Error::Argument("non-finite difference".into()));
    }
    let mean = differences.iter().sum::<f64>() / n as f64;
    let ss: f64 = differences.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateVariance { mean });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let df = (n - 1) as u64;
    let oriented = match alternative {
        Alternative::Less => t,
        Alternative::Greater => -t,
    };
    let p_value = t_cdf(oriented, df)?;
    let log10_p = ln_t_cdf(oriented, df)? / std::f64::consts::LN_10;
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value,
        log10_p,
        n,
        mean_difference: mean,
        sd_difference: sd,
        alternative,
    })
}

/// Who was compared, and how; copied verbatim into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportContext {
    pub scoring_model_id: String,
    pub target_model_id: String,
    pub score_method: ScoreSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub test: TTestResult,
    pub log10_p: f64,
    pub threshold: f64,
    pub membership_detected: bool,
    pub scoring_model_id: String,
    pub target_model_id: String,
    pub score_method: ScoreSpec,
    pub seed: u64,
    pub mean_ratio_target: f64,
    pub mean_ratio_scoring: f64,
    /// Pairs whose original score is within `1e-6` of zero under either model.
    pub near_zero_originals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

impl VerificationReport {
    pub fn decision(&self) -> &'static str {
        if self.membership_detected {
            "membership detected"
        } else {
            "not detected"
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::records::write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::records::read_json(path.as_ref())
    }
}

/// Runs the one-sided ("less") paired t-test on `ratio_target - ratio_scoring`.
pub fn verify(pairs: &[RatioPair], threshold: f64, ctx: &ReportContext) -> Result<VerificationReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Argument(format!("threshold {threshold} not in (0, 1)")));
    }
    let differences: Vec<f64> = pairs.iter().map(|p| p.difference).collect();
    let test = paired_t_test(&differences, Alternative::Less)?;
    let n = pairs.len() as f64;
    let near_zero_originals = pairs
        .iter()
        .filter(|p| p.original_target.abs() < NEAR_ZERO_SCORE || p.original_scoring.abs() < NEAR_ZERO_SCORE)
        .count();
    Ok(VerificationReport {
        log10_p: test.log10_p,
        membership_detected: test.p_value < threshold,
        threshold,
        scoring_model_id: ctx.scoring_model_id.clone(),
        target_model_id: ctx.target_model_id.clone(),
        score_method: ctx.score_method,
        seed: ctx.seed,
        mean_ratio_target: pairs.iter().map(|p| p.ratio_target).sum::<f64>() / n,
        mean_ratio_scoring: pairs.iter().map(|p| p.ratio_scoring).sum::<f64>() / n,
        near_zero_originals,
        manifest: None,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{ScoreMethod, Variant};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn scored(doc: &str, variant: Variant, model: &str, value: f64) -> ScoredDocument {
        ScoredDocument {
            doc_id: doc.into(),
            variant,
            method: ScoreMethod::MinKpp,
            k_percent: Some(20.0),
            value,
            model_id: model.into(),
        }
    }

    fn ctx() -> ReportContext {
        ReportContext {
            scoring_model_id: "s".into(),
            target_model_id: "t".into(),
            score_method: ScoreSpec::min_kpp(20.0),
            seed: 1234,
        }
    }

    fn pairs_from_differences(d: &[f64]) -> Vec<RatioPair> {
        d.iter()
            .enumerate()
            .map(|(i, &d)| RatioPair {
                doc_id: format!("d{i}"),
                ratio_target: 1.0 + d,
                ratio_scoring: 1.0,
                difference: d,
                original_target: -1.0,
                original_scoring: -1.0,
            })
            .collect()
    }

    #[test]
    fn ratio_examples() {
        let o = scored("a", Variant::Original, "m", -4.0);
        let w = scored("a", Variant::Paraphrase(1), "m", -2.0);
        assert_eq!(score_ratio(&o, &w).unwrap(), 0.5);
        let w = scored("a", Variant::Paraphrase(1), "m", -4.0);
        assert_eq!(score_ratio(&o, &w).unwrap(), 1.0);
        let z = scored("a", Variant::Original, "m", 0.0);
        assert!(matches!(score_ratio(&z, &w), Err(Error::ZeroOriginalScore { .. })));
        let other = scored("a", Variant::Paraphrase(1), "other", -2.0);
        assert!(matches!(score_ratio(&o, &other), Err(Error::Pairing { .. })));
        let mut loss = w.clone();
        loss.method = ScoreMethod::Loss;
        loss.k_percent = None;
        assert!(matches!(score_ratio(&o, &loss), Err(Error::Pairing { .. })));
    }

    #[test]
    fn t_test_fixture() {
        let r = paired_t_test(&[-1.0, -2.0, -3.0], Alternative::Less).unwrap();
        assert!((r.t_statistic - (-3.464_101_615_137_754_6)).abs() < 1e-12);
        assert_eq!(r.degrees_of_freedom, 2);
        assert_eq!(r.sd_difference, 1.0);
        let t = r.t_statistic;
        let closed = 0.5 * (1.0 + t / (2.0 + t * t).sqrt());
        assert!((r.p_value - closed).abs() < 1e-14);
    }

    #[test]
    fn t_test_symmetric_and_degenerate() {
        let r = paired_t_test(&[-1.0, 1.0], Alternative::Less).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert_eq!(r.p_value, 0.5);
        assert!(matches!(
            paired_t_test(&[5.0, 5.0], Alternative::Less),
            Err(Error::DegenerateVariance { mean }) if mean == 5.0
        ));
        assert!(matches!(
            paired_t_test(&[1.0], Alternative::Less),
            Err(Error::InsufficientSample(1))
        ));
    }

    #[test]
    fn greater_is_mirror_of_less() {
        let d = [0.3, -0.1, 0.4, 0.25];
        let less = paired_t_test(&d, Alternative::Less).unwrap();
        let greater = paired_t_test(&d, Alternative::Greater).unwrap();
        assert!((less.p_value + greater.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn verify_detects_shift() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d: Vec<f64> = (0..500).map(|_| -0.1 + rng.gen_range(-0.01..0.01)).collect();
        let report = verify(&pairs_from_differences(&d), DEFAULT_THRESHOLD, &ctx()).unwrap();
        assert!(report.membership_detected);
        assert!(report.log10_p < -100.0);
        assert_eq!(report.test.degrees_of_freedom, 499);
    }

    #[test]
    fn verify_rejects_single_pair() {
        assert!(matches!(
            verify(&pairs_from_differences(&[-0.1]), DEFAULT_THRESHOLD, &ctx()),
            Err(Error::InsufficientSample(1))
        ));
    }

    #[test]
    fn near_zero_originals_are_counted() {
        let mut pairs = pairs_from_differences(&[-0.1, 0.2, 0.05]);
        pairs[1].original_scoring = 1e-9;
        let report = verify(&pairs, DEFAULT_THRESHOLD, &ctx()).unwrap();
        assert_eq!(report.near_zero_originals, 1);
    }

    #[test]
    fn report_round_trips() {
        let report = verify(&pairs_from_differences(&[-0.1, -0.3, 0.05]), DEFAULT_THRESHOLD, &ctx()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        report.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for field in ["log10_p", "membership_detected", "degrees_of_freedom", "scoring_model_id", "threshold"] {
            assert!(text.contains(field), "{field}");
        }
        assert_eq!(VerificationReport::load(&path).unwrap(), report);
    }

    proptest! {
        #[test]
        fn translation_covariance(
            d in prop::collection::vec((-4096i32..4096).prop_map(|v| v as f64 / 1024.0), 2..50),
            c in (-64i32..64).prop_map(|v| v as f64 / 16.0),
        ) {
            let base = paired_t_test(&d, Alternative::Less);
            let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
            let moved = paired_t_test(&shifted, Alternative::Less);
            match (base, moved) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((b.mean_difference - (a.mean_difference + c)).abs() < 1e-12);
                    prop_assert!((b.sd_difference - a.sd_difference).abs() < 1e-12);
                }
                (Err(Error::DegenerateVariance { .. }), Err(Error::DegenerateVariance { .. })) => {}
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }

        #[test]
        fn common_scale_leaves_decision_unchanged(
            scores in prop::collection::vec((-20.0f64..-0.5, -20.0f64..-0.5, -20.0f64..-0.5, -20.0f64..-0.5), 3..40),
            scale in prop::sample::select(vec![0.5, 2.0, 4.0, 0.125]),
        ) {
            let build = |k: f64| -> Vec<RatioPair> {
                scores.iter().enumerate().map(|(i, &(to, tw, so, sw))| {
                    let id = format!("d{i}");
                    RatioPair::from_scores(
                        &scored(&id, Variant::Original, "t", to * k),
                        &scored(&id, Variant::Paraphrase(1), "t", tw * k),
                        &scored(&id, Variant::Original, "s", so * k),
                        &scored(&id, Variant::Paraphrase(1), "s", sw * k),
                    ).unwrap()
                }).collect()
            };
            let a = verify(&build(1.0), DEFAULT_THRESHOLD, &ctx()).unwrap();
            let b = verify(&build(scale), DEFAULT_THRESHOLD, &ctx()).unwrap();
            prop_assert_eq!(a.test.p_value, b.test.p_value);
            prop_assert_eq!(a.membership_detected, b.membership_detected);
        }
    }
}
