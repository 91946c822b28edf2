//! Evaluation metrics: rank correlations and member/non-member separability.

use crate::error::{Error, Result};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientSample(a.len()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Argument("NaN in correlation input".into()));
    }
    Ok(())
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of the average-rank vectors.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in ra.iter().zip(&rb) {
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    // with half-integer ranks these sums are exact for any realistic n
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input"));
    }
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Kendall's tau-b with tie correction.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_a, mut ties_b) = (0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i].partial_cmp(&a[j]).unwrap();
            let db = b[i].partial_cmp(&b[j]).unwrap();
            use std::cmp::Ordering::Equal;
            if da == Equal {
                ties_a += 1;
            }
            if db == Equal {
                ties_b += 1;
            }
            if da == Equal || db == Equal {
                continue;
            }
            if da == db {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = ((n0 - ties_a) as f64) * ((n0 - ties_b) as f64);
    if denom == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input"));
    }
    Ok(((concordant - discordant) as f64 / denom.sqrt()).clamp(-1.0, 1.0))
}

fn check_sides(members: &[f64], nonmembers: &[f64]) -> Result<()> {
    if members.is_empty() {
        return Err(Error::EmptyInput("no member scores"));
    }
    if nonmembers.is_empty() {
        return Err(Error::EmptyInput("no non-member scores"));
    }
    if members.iter().chain(nonmembers).any(|v| v.is_nan()) {
        return Err(Error::Argument("NaN score".into()));
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Probability that a random member outscores a random non-member, ties
/// counting one half (Mann-Whitney).
///
/// `roc_auc(a, b) + roc_auc(b, a) == 1.0` holds exactly: the side whose
/// count is larger is computed as the complement of the other.
pub fn roc_auc(members: &[f64], nonmembers: &[f64]) -> Result<f64> {
    check_sides(members, nonmembers)?;
    let non = sorted(nonmembers);
    // twice the Mann-Whitney U, so ties stay integral
    let mut twice_u: u128 = 0;
    for &m in members {
        let below = non.partition_point(|&x| x < m) as u128;
        let not_above = non.partition_point(|&x| x <= m) as u128;
        twice_u += 2 * below + (not_above - below);
    }
    let twice_total = 2 * members.len() as u128 * nonmembers.len() as u128;
    let complement = twice_total - twice_u;
    Ok(if twice_u <= complement {
        twice_u as f64 / twice_total as f64
    } else {
        1.0 - complement as f64 / twice_total as f64
    })
}

/// True-positive rate at a false-positive budget.
///
/// The threshold is the smallest non-member score whose at-or-above
/// non-member fraction is within `fpr`; when no non-member score qualifies,
/// only members strictly above every non-member count as detected. The
/// non-member rate therefore never exceeds `fpr`.
pub fn tpr_at_fpr(members: &[f64], nonmembers: &[f64], fpr: f64) -> Result<f64> {
    check_sides(members, nonmembers)?;
    if !(fpr > 0.0 && fpr < 1.0) {
        return Err(Error::Argument(format!("fpr {fpr} not in (0, 1)")));
    }
    let non = sorted(nonmembers);
    let n_non = non.len() as f64;
    let threshold = non
        .iter()
        .enumerate()
        .filter(|&(i, &s)| i == 0 || non[i - 1] != s)
        .find(|&(i, _)| (non.len() - i) as f64 / n_non <= fpr)
        .map(|(_, &s)| s);
    let detected = match threshold {
        Some(t) => members.iter().filter(|&&m| m >= t).count(),
        None => {
            let max = *non.last().unwrap();
            members.iter().filter(|&&m| m > max).count()
        }
    };
    Ok(detected as f64 / members.len() as f64)
}
