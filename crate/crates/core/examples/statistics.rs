//! The statistics behind verification and evaluation: the one-sided paired
//! t-test (with p-values far below f64's range reported through log10 p),
//! ROC AUC, TPR at a fixed FPR and rank correlations.

use spectra::verifier::{kendall_tau, ln_t_cdf, paired_t_test, roc_auc, spearman_rho, t_cdf, tpr_at_fpr, Alternative};

fn main() -> spectra::Result<()> {
    let test = paired_t_test(&[-1.0, -2.0, -3.0], Alternative::Less)?;
    println!("t = {:.7}, df = {}, p = {:.6}", test.t_statistic, test.degrees_of_freedom, test.p_value);

    println!("P(T < 2) with df = 5: {:.10}", t_cdf(2.0, 5)?);
    let ln_p = ln_t_cdf(-150.0, 499)?;
    println!("P(T < -150) with df = 499: log10 p = {:.2}", ln_p / std::f64::consts::LN_10);

    let members = [0.9, 0.8, 0.75, 0.6, 0.4];
    let nonmembers = [0.7, 0.5, 0.3, 0.2, 0.1];
    println!("AUC = {}", roc_auc(&members, &nonmembers)?);
    println!("TPR at 20% FPR = {}", tpr_at_fpr(&members, &nonmembers, 0.2)?);

    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [2.0, 1.0, 4.0, 3.0, 5.0];
    println!("spearman = {:.4}, kendall = {:.4}", spearman_rho(&a, &b)?, kendall_tau(&a, &b)?);
    Ok(())
}
