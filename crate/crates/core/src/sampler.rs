//! Watermark selection: score-ratio guided paraphrase sampling with a global
//! side balance, plus the Maximum and Random baselines.
//!
//! Each row draws from its own generator, derived from the dataset seed and
//! the row index, and consumes it in a fixed order: one uniform for the side
//! (only when both sides are available), then one uniform for the index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 100.0;

/// Ratios `r_j = s_j / s_0` of candidate scores against the original score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub doc_id: String,
    pub original_score: f64,
    pub candidate_scores: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl RatioRow {
    fn all_below(&self) -> bool {
        self.ratios.iter().all(|&r| r < 1.0)
    }

    fn all_above(&self) -> bool {
        self.ratios.iter().all(|&r| r > 1.0)
    }
}

pub fn compute_ratio_row(
    doc_id: &str,
    original_score: f64,
    candidate_scores: &[f64],
) -> Result<RatioRow> {
    if original_score == 0.0 {
        return Err(Error::ZeroOriginalScore {
            doc_id: doc_id.to_string(),
        });
    }
    if candidate_scores.is_empty() {
        return Err(Error::EmptyInput("ratio row needs at least one candidate"));
    }
    Ok(RatioRow {
        doc_id: doc_id.to_string(),
        original_score,
        candidate_scores: candidate_scores.to_vec(),
        ratios: candidate_scores.iter().map(|s| s / original_score).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideBalance {
    /// Probability of drawing the above side (`r > 1`) when both are available.
    pub pi_plus: f64,
    pub pi_minus: f64,
    /// Rows whose candidates all have `r < 1`.
    pub count_all_below: usize,
    /// Rows whose candidates all have `r > 1`.
    pub count_all_above: usize,
}

impl SideBalance {
    pub fn from_counts(count_all_below: usize, count_all_above: usize) -> Self {
        let one_sided = count_all_below + count_all_above;
        let pi_plus = if one_sided == 0 {
            0.5
        } else {
            count_all_below as f64 / one_sided as f64
        };
        SideBalance {
            pi_plus,
            pi_minus: 1.0 - pi_plus,
            count_all_below,
            count_all_above,
        }
    }

    /// A balance with a fixed `pi_plus`, for experiments that bypass the dataset count.
    pub fn with_pi_plus(pi_plus: f64) -> Self {
        SideBalance {
            pi_plus,
            pi_minus: 1.0 - pi_plus,
            count_all_below: 0,
            count_all_above: 0,
        }
    }
}

pub fn compute_side_balance(rows: &[RatioRow]) -> SideBalance {
    let below = rows.iter().filter(|r| r.all_below()).count();
    let above = rows.iter().filter(|r| r.all_above()).count();
    SideBalance::from_counts(below, above)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChosenSide {
    Above,
    Below,
    /// Only one side had candidates.
    Forced,
}

/// The outcome for one document, with enough detail to replay the draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatermarkSelection {
    pub doc_id: String,
    /// 1-based paraphrase index.
    pub chosen_index: usize,
    pub chosen_side: ChosenSide,
    /// One weight per candidate; zero outside the chosen side.
    pub weights_used: Vec<f64>,
    pub seed: u64,
}

/// Line written to the selection audit file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub doc_id: String,
    pub chosen_index: usize,
    pub chosen_side: ChosenSide,
    pub ratios: Vec<f64>,
    pub weights_used: Vec<f64>,
    pub seed: u64,
}

impl AuditEntry {
    pub fn new(row: &RatioRow, sel: &WatermarkSelection) -> Self {
        AuditEntry {
            doc_id: sel.doc_id.clone(),
            chosen_index: sel.chosen_index,
            chosen_side: sel.chosen_side,
            ratios: row.ratios.clone(),
            weights_used: sel.weights_used.clone(),
            seed: sel.seed,
        }
    }
}

pub fn save_audit(entries: &[AuditEntry], path: impl AsRef<std::path::Path>) -> Result<()> {
    crate::records::write_jsonl(path.as_ref(), entries)
}

pub fn load_audit(path: impl AsRef<std::path::Path>) -> Result<Vec<AuditEntry>> {
    crate::records::read_jsonl(path.as_ref())
}

/// Generator for one row: the dataset seed picks the key, the row index the stream.
pub fn row_rng(dataset_seed: u64, row_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(dataset_seed);
    rng.set_stream(row_index);
    rng
}

/// Normalized `exp(-alpha * |r - 1|)` over `members`, shifted by the smallest
/// distance so the closest candidate always has unnormalized weight 1.
fn side_weights(ratios: &[f64], members: &[usize], alpha: f64) -> Vec<f64> {
    let dist = |j: usize| (ratios[j] - 1.0).abs();
    let min_dist = members
        .iter()
        .map(|&j| dist(j))
        .fold(f64::INFINITY, f64::min);
    let mut w = vec![0.0; ratios.len()];
    let mut total = 0.0;
    for &j in members {
        let v = (-alpha * (dist(j) - min_dist)).exp();
        w[j] = v;
        total += v;
    }
    for &j in members {
        w[j] /= total;
    }
    w
}

fn draw_categorical<R: Rng + ?Sized>(weights: &[f64], members: &[usize], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &j in members {
        acc += weights[j];
        if u < acc {
            return j;
        }
    }
    // rounding left the cumulative sum a hair under 1; take the last positive weight
    *members
        .iter()
        .rev()
        .find(|&&j| weights[j] > 0.0)
        .expect("at least one member has positive weight")
}

/// Draws one paraphrase for `row`.
///
/// Candidates with `r == 1` are eligible on both sides.
pub fn sample_spectra<R: Rng + ?Sized>(
    row: &RatioRow,
    balance: &SideBalance,
    alpha: f64,
    rng: &mut R,
    seed: u64,
) -> Result<WatermarkSelection> {
    if row.ratios.is_empty() {
        return Err(Error::EmptyInput("ratio row needs at least one candidate"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Argument(format!("alpha {alpha} must be positive and finite")));
    }
    let below: Vec<usize> = (0..row.ratios.len()).filter(|&j| row.ratios[j] <= 1.0).collect();
    let above: Vec<usize> = (0..row.ratios.len()).filter(|&j| row.ratios[j] >= 1.0).collect();

    let (side, members) = match (below.is_empty(), above.is_empty()) {
        (true, false) => (ChosenSide::Forced, above),
        (false, true) => (ChosenSide::Forced, below),
        (false, false) => {
            let u: f64 = rng.gen();
            if u < balance.pi_plus {
                (ChosenSide::Above, above)
            } else {
                (ChosenSide::Below, below)
            }
        }
        (true, true) => {
            return Err(Error::Argument(format!(
                "row {} has no comparable ratios (NaN?)",
                row.doc_id
            )))
        }
    };

    let weights = side_weights(&row.ratios, &members, alpha);
    let j = draw_categorical(&weights, &members, rng);
    Ok(WatermarkSelection {
        doc_id: row.doc_id.clone(),
        chosen_index: j + 1,
        chosen_side: side,
        weights_used: weights,
        seed,
    })
}

/// Index (1-based) of the highest candidate score; ties go to the lowest index.
pub fn select_maximum(candidate_scores: &[f64]) -> Result<usize> {
    if candidate_scores.is_empty() {
        return Err(Error::EmptyInput("no candidates to select from"));
    }
    let mut best = 0;
    for (j, &s) in candidate_scores.iter().enumerate().skip(1) {
        if s > candidate_scores[best] {
            best = j;
        }
    }
    Ok(best + 1)
}

/// Uniform 1-based index in `1..=m`.
pub fn select_random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<usize> {
    if m == 0 {
        return Err(Error::EmptyInput("no candidates to select from"));
    }
    Ok(rng.gen_range(0..m) + 1)
}

/// Which rule picks the watermarked paraphrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Spectra,
    Maximum,
    Random,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectra" => Ok(Strategy::Spectra),
            "maximum" => Ok(Strategy::Maximum),
            "random" => Ok(Strategy::Random),
            other => Err(Error::Argument(format!(
                "unknown strategy {other:?} (expected spectra, maximum or random)"
            ))),
        }
    }
}

/// Selects one paraphrase per row. The side balance is computed over all
/// rows before any row is sampled.
pub fn select_all(
    rows: &[RatioRow],
    strategy: Strategy,
    alpha: f64,
    dataset_seed: u64,
) -> Result<Vec<WatermarkSelection>> {
    let balance = compute_side_balance(rows);
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut rng = row_rng(dataset_seed, i as u64);
            match strategy {
                Strategy::Spectra => sample_spectra(row, &balance, alpha, &mut rng, dataset_seed),
                Strategy::Maximum => {
                    let j = select_maximum(&row.candidate_scores)?;
                    Ok(point_selection(row, j, dataset_seed))
                }
                Strategy::Random => {
                    let j = select_random(row.candidate_scores.len(), &mut rng)?;
                    Ok(point_selection(row, j, dataset_seed))
                }
            }
        })
        .collect()
}

fn point_selection(row: &RatioRow, chosen_index: usize, seed: u64) -> WatermarkSelection {
    let mut weights_used = vec![0.0; row.ratios.len()];
    weights_used[chosen_index - 1] = 1.0;
    let r = row.ratios[chosen_index - 1];
    let chosen_side = if r > 1.0 {
        ChosenSide::Above
    } else if r < 1.0 {
        ChosenSide::Below
    } else {
        ChosenSide::Forced
    };
    WatermarkSelection {
        doc_id: row.doc_id.clone(),
        chosen_index,
        chosen_side,
        weights_used,
        seed,
    }
}
