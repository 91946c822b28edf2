//! Acceptance checks. Runs as a plain binary (no libtest harness) so every
//! check prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spectra::pipeline::corpus::{bloom_overlap, reference_filter, word_ngrams};
use spectra::pipeline::{dedup_against, run_simulation, CorpusConfig, SimulationConfig};
use spectra::records::{DocumentRecord, TokenStats, Variant};
use spectra::sampler::{compute_ratio_row, row_rng, sample_spectra, ChosenSide, SideBalance, Strategy};
use spectra::scores::{bottom_k_count, build_q_ref, score_dc_pdd, score_min_k, score_min_kpp};
use spectra::verifier::{kendall_tau, paired_t_test, roc_auc, spearman_rho, t_cdf, tpr_at_fpr, Alternative};

type Check = (bool, String);
type Named = (u32, &'static str, fn() -> Check);

// ---------------------------------------------------------------- t oracle

/// Gamma((df+1)/2) / Gamma(df/2) by the two-step recurrence from df = 1, 2.
fn gamma_ratio(df: u64) -> f64 {
    let pi = std::f64::consts::PI;
    let (mut nu, mut r) = if df % 2 == 1 { (1u64, 1.0 / pi.sqrt()) } else { (2u64, pi.sqrt() / 2.0) };
    while nu < df {
        r *= (nu + 1) as f64 / nu as f64;
        nu += 2;
    }
    r
}

fn t_density(x: f64, df: u64) -> f64 {
    let nu = df as f64;
    let c = gamma_ratio(df) / (nu * std::f64::consts::PI).sqrt();
    c * (-(nu + 1.0) / 2.0 * (x * x / nu).ln_1p()).exp()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point Gauss rule.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = ((a + b) / 2.0, (b - a) / 2.0);
    let fc = f(c);
    let (mut k, mut g) = (fc * WGK[7], fc * WG[3]);
    for j in 0..7 {
        let pair = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return k;
    }
    let m = (a + b) / 2.0;
    adaptive(f, a, m, tol / 2.0, depth - 1) + adaptive(f, m, b, tol / 2.0, depth - 1)
}

fn t_cdf_oracle(t: f64, df: u64) -> f64 {
    let f = |x: f64| t_density(x, df);
    let half = adaptive(&f, 0.0, t.abs(), 1e-14, 40);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let df = rng.gen_range(1..=100u64);
        let t = rng.gen_range(-40.0..=40.0);
        worst = worst.max((t_cdf(t, df).unwrap() - t_cdf_oracle(t, df)).abs());
    }
    let mut worst_closed: f64 = 0.0;
    for _ in 0..1000 {
        let t: f64 = rng.gen_range(-40.0..=40.0);
        let c1 = 0.5 + t.atan() / std::f64::consts::PI;
        let c2 = 0.5 * (1.0 + t / (2.0 + t * t).sqrt());
        worst_closed = worst_closed
            .max((t_cdf(t, 1).unwrap() - c1).abs())
            .max((t_cdf(t, 2).unwrap() - c2).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-9 && worst_closed <= 1e-12 && secs < 10.0,
        format!("max |err| vs quadrature {worst:.2e} (tol 1e-9), vs df 1/2 closed forms {worst_closed:.2e} (tol 1e-12), {secs:.2}s"),
    )
}

// ---------------------------------------------------------------- t-test fixture

fn criterion_2() -> Check {
    let r = paired_t_test(&[-1.0, -2.0, -3.0], Alternative::Less).unwrap();
    let t = r.t_statistic;
    let closed = 0.5 * (1.0 + t / (2.0 + t * t).sqrt());
    let quoted = 0.037087;
    let ok = (t - (-3.464_101_6)).abs() < 1e-6 && r.degrees_of_freedom == 2 && (r.p_value - closed).abs() < 1e-6;
    (
        ok,
        format!(
            "t = {t:.7}, df = {}, p = {:.10}; df-2 closed form gives {closed:.10} (|diff| {:.1e}); \
             the rounded figure {quoted} is {:.2e} away from both",
            r.degrees_of_freedom,
            r.p_value,
            (r.p_value - closed).abs(),
            (r.p_value - quoted).abs()
        ),
    )
}

// ---------------------------------------------------------------- score oracles

fn record(stats: Vec<TokenStats>) -> DocumentRecord {
    DocumentRecord {
        doc_id: "d".into(),
        variant: Variant::Original,
        word_count: 1,
        text: None,
        token_stats: stats,
    }
}

/// Minimum mean over every subset of exactly `k` values.
fn brute_min_mean(values: &[f64], k: usize) -> f64 {
    let n = values.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum();
            best = best.min(s);
        }
    }
    best / k as f64
}

fn criterion_3() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let ks = [5.0, 10.0, 20.0, 25.0, 33.0, 50.0, 80.0, 100.0];
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=12usize);
        // dyadic values keep every sum exact, whatever the summation order
        let stats: Vec<TokenStats> = (0..n)
            .map(|i| {
                let gold = -(rng.gen_range(0..2000) as f64) / 64.0;
                let mean = -(rng.gen_range(0..2000) as f64) / 64.0;
                let std = 2f64.powi(rng.gen_range(-2..=3));
                TokenStats::new(i as u32, gold, mean, std)
            })
            .collect();
        let k = ks[rng.gen_range(0..ks.len())];
        let count = ((n as f64 * k / 100.0).floor() as usize).max(1);
        let gold: Vec<f64> = stats.iter().map(|t| t.gold_logprob).collect();
        let z: Vec<f64> = stats.iter().map(|t| (t.gold_logprob - t.dist_mean) / t.dist_std).collect();
        let doc = record(stats);
        if bottom_k_count(n, k) != count
            || score_min_k(&doc, k).unwrap() != brute_min_mean(&gold, count)
            || score_min_kpp(&doc, k).unwrap() != brute_min_mean(&z, count)
        {
            mismatches += 1;
        }
    }

    let mut worst_mean: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=300usize);
        let stats: Vec<TokenStats> = (0..n)
            .map(|i| TokenStats::new(i as u32, rng.gen_range(-12.0..0.0), rng.gen_range(-12.0..0.0), rng.gen_range(0.05..4.0)))
            .collect();
        let mean_z = stats.iter().map(|t| (t.gold_logprob - t.dist_mean) / t.dist_std).sum::<f64>() / n as f64;
        worst_mean = worst_mean.max((score_min_kpp(&record(stats), 100.0).unwrap() - mean_z).abs());
    }

    let mut worst_dc: f64 = 0.0;
    let vocab = 64;
    for _ in 0..100 {
        let corpus: Vec<Vec<u32>> = (0..5).map(|_| (0..40).map(|_| rng.gen_range(0..vocab)).collect()).collect();
        let smoothing = rng.gen_range(0.1..2.0);
        let q = build_q_ref(&corpus, vocab as usize, smoothing).unwrap();
        let mut counts = vec![0.0; vocab as usize];
        for &t in corpus.iter().flatten() {
            counts[t as usize] += 1.0;
        }
        let total = 200.0 + smoothing * vocab as f64;
        // single pass: every token distinct, so every position is a first occurrence
        let mut ids: Vec<u32> = (0..vocab).collect();
        rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut rng);
        let n = rng.gen_range(1..=20usize);
        let stats: Vec<TokenStats> = ids[..n]
            .iter()
            .map(|&id| TokenStats::new(id, rng.gen_range(-8.0..0.0), -3.0, 1.0))
            .collect();
        let hand = -stats
            .iter()
            .map(|t| t.gold_logprob.exp() * ((counts[t.token_id as usize] + smoothing) / total).ln())
            .sum::<f64>()
            / n as f64;
        worst_dc = worst_dc.max((score_dc_pdd(&record(stats), &q).unwrap() - hand).abs());
    }
    (
        mismatches == 0 && worst_mean <= 1e-12 && worst_dc <= 1e-12,
        format!("{mismatches} of 200 brute-force mismatches; k = 100 vs mean z {worst_mean:.1e}; DC-PDD vs hand formula {worst_dc:.1e}"),
    )
}

// ---------------------------------------------------------------- sampler distribution

fn criterion_4() -> Check {
    const N: u64 = 100_000;
    let row = compute_ratio_row("fixed", 1.0, &[0.9, 0.99, 1.5]).unwrap();
    let below_only = SideBalance::with_pi_plus(0.0);
    let mut hits = 0u64;
    let mut off_side = 0u64;
    for i in 0..N {
        let sel = sample_spectra(&row, &below_only, 100.0, &mut row_rng(77, i), 77).unwrap();
        hits += u64::from(sel.chosen_index == 2);
        off_side += u64::from(sel.chosen_index == 3 || sel.chosen_side != ChosenSide::Below);
    }
    let p = 1.0 / (1.0 + (-9f64).exp());
    let sigma = (p * (1.0 - p) / N as f64).sqrt();
    let freq = hits as f64 / N as f64;
    let z_index = (freq - p) / sigma;

    let balance = SideBalance::with_pi_plus(0.75);
    let two_sided = compute_ratio_row("two", 1.0, &[0.9, 1.1]).unwrap();
    let above = (0..N)
        .filter(|&i| {
            sample_spectra(&two_sided, &balance, 100.0, &mut row_rng(78, i), 78).unwrap().chosen_side == ChosenSide::Above
        })
        .count();
    let f_above = above as f64 / N as f64;
    let s_above = (0.75 * 0.25 / N as f64).sqrt();
    let z_side = (f_above - 0.75) / s_above;
    (
        z_index.abs() <= 3.0 && z_side.abs() <= 3.0 && off_side == 0,
        format!(
            "index-2 frequency {freq:.6} vs {p:.6} ({z_index:+.2} sd); above-side frequency {f_above:.4} vs 0.75 ({z_side:+.2} sd)"
        ),
    )
}

// ---------------------------------------------------------------- end-to-end simulation

struct SeedResult {
    member_log10: f64,
    non_member_log10: f64,
}

fn simulate(seed: u64, strategy: Strategy) -> SeedResult {
    let cfg = SimulationConfig {
        seed,
        strategy,
        jobs: 1,
        ..SimulationConfig::default()
    };
    let out = run_simulation(&cfg).expect("simulation");
    SeedResult {
        member_log10: out.member.log10_p,
        non_member_log10: out.non_member.log10_p,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

const LOG10_THRESHOLD: f64 = -4.0;

fn criteria_5_6(runs: &[SeedResult], secs: f64) -> (Check, Check) {
    let both = runs
        .iter()
        .filter(|r| r.member_log10 < LOG10_THRESHOLD && r.non_member_log10 > LOG10_THRESHOLD)
        .count();
    let clean = runs.iter().filter(|r| r.non_member_log10 > LOG10_THRESHOLD).count();
    let worst_member = runs.iter().map(|r| r.member_log10).fold(f64::NEG_INFINITY, f64::max);
    let worst_non = runs.iter().map(|r| r.non_member_log10).fold(f64::INFINITY, f64::min);
    (
        (
            both >= 95 && secs < 300.0,
            format!(
                "{both}/100 seeds with member p < 1e-4 and non-member p > 1e-4 (weakest member log10 p {worst_member:.1}); {secs:.0}s single worker"
            ),
        ),
        (
            clean >= 95,
            format!("{clean}/100 seeds with p > 1e-4 against the untrained base (smallest log10 p {worst_non:.2})"),
        ),
    )
}

fn criterion_7(spectra: &[SeedResult]) -> Check {
    let med = |runs: Vec<SeedResult>| median(runs.into_iter().map(|r| r.member_log10).collect());
    let s = median(spectra.iter().map(|r| r.member_log10).collect());
    let seeds = 0..spectra.len() as u64;
    let random = med(seeds.clone().map(|s| simulate(s, Strategy::Random)).collect());
    let maximum = med(seeds.map(|s| simulate(s, Strategy::Maximum)).collect());
    (
        s <= random && random <= maximum,
        format!("median member log10 p over 20 seeds: spectra {s:.1}, random {random:.1}, maximum {maximum:.1}"),
    )
}

// ---------------------------------------------------------------- dedup

fn ref_word(doc: usize, i: usize) -> String {
    format!("r{doc}x{i}")
}

fn criterion_8() -> Check {
    let cfg = CorpusConfig::default();
    let reference: Vec<String> = (0..1000)
        .map(|d| (0..150).map(|i| ref_word(d, i)).collect::<Vec<_>>().join(" "))
        .collect();
    // 112 words = 100 thirteen-grams; copying a prefix of c words yields c - 12 matching grams
    let build = |grams_copied: usize, tag: usize| {
        let copied = if grams_copied == 0 { 0 } else { grams_copied + 12 };
        (0..112)
            .map(|i| if i < copied { ref_word(500 + tag, 10 + i) } else { format!("fresh{tag}y{i}") })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let targets = [100usize, 90, 79, 50, 0];
    let candidates: Vec<String> = targets.iter().enumerate().map(|(t, &g)| build(g, t)).collect();
    let outcome = dedup_against(&reference, &candidates, &cfg).unwrap();
    let flagged: Vec<bool> = (0..5).map(|i| outcome.flagged.iter().any(|f| f.index == i)).collect();
    let classes_ok = flagged == [true, true, false, false, false];

    let (filter, _) = reference_filter(&reference, &cfg);
    let exact: std::collections::HashSet<String> = reference.iter().flat_map(|d| word_ngrams(d, 13)).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let mut disagree = 0;
    const TRIALS: usize = 10_000;
    for t in 0..TRIALS {
        // random overlap: a copied stretch of random length from a random doc, then novel words
        let doc = rng.gen_range(0..1000);
        let start = rng.gen_range(0..30);
        let copied = rng.gen_range(0..=112);
        let text = (0..112)
            .map(|i| if i < copied { ref_word(doc, start + i) } else { format!("n{t}y{i}") })
            .collect::<Vec<_>>()
            .join(" ");
        let grams = word_ngrams(&text, 13);
        let exact_overlap = grams.iter().filter(|g| exact.contains(*g)).count() as f64 / grams.len() as f64;
        let bloom = bloom_overlap(&filter, &text, 13).unwrap();
        if (bloom >= cfg.dedup_overlap) != (exact_overlap >= cfg.dedup_overlap) {
            disagree += 1;
        }
    }
    let rate = disagree as f64 / TRIALS as f64;
    (
        classes_ok && rate <= 1e-3,
        format!("flags for overlaps 1.0/0.9/0.79/0.5/0.0: {flagged:?}; bloom vs exact disagreement {rate:.1e} over {TRIALS}"),
    )
}

// ---------------------------------------------------------------- metrics

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_9() -> Check {
    let auc_sep = roc_auc(&[2.0, 3.0], &[0.0, 1.0]).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let a: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
    let b: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
    let auc_same = roc_auc(&a, &b).unwrap();

    let mut rank_mismatch = 0;
    let mut cases = 0;
    for n in 2..=6 {
        let base: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        for p in permutations(n) {
            let other: Vec<f64> = p.iter().map(|&i| (i + 1) as f64).collect();
            let d2: f64 = base.iter().zip(&other).map(|(x, y)| (x - y) * (x - y)).sum();
            // (n(n^2-1) - 6 sum d^2) / (n(n^2-1)) as one division of exact integers
            let full = (n * (n * n - 1)) as f64;
            let rho = (full - 6.0 * d2) / full;
            let (mut c, mut d) = (0i32, 0i32);
            for i in 0..n {
                for j in i + 1..n {
                    if (other[i] - other[j]) * (base[i] - base[j]) > 0.0 {
                        c += 1;
                    } else {
                        d += 1;
                    }
                }
            }
            let tau = (c - d) as f64 / (n * (n - 1) / 2) as f64;
            cases += 1;
            if spearman_rho(&base, &other).unwrap() != rho || kendall_tau(&base, &other).unwrap() != tau {
                rank_mismatch += 1;
            }
        }
    }

    let tpr1 = tpr_at_fpr(&[10.0; 100], &[0.0; 100], 0.01).unwrap();
    let same: Vec<f64> = (0..100).map(f64::from).collect();
    let tpr2 = tpr_at_fpr(&same, &same, 0.01).unwrap();
    let tpr3 = tpr_at_fpr(&[5.0, 6.0, 7.0, 8.0], &[1.0, 2.0, 3.0, 9.0], 0.25).unwrap();
    let ok = auc_sep == 1.0
        && (0.48..=0.52).contains(&auc_same)
        && rank_mismatch == 0
        && tpr1 == 1.0
        && tpr2 <= 0.01 + 0.01
        && tpr3 == 0.0;
    (
        ok,
        format!(
            "auc separated {auc_sep}, identical {auc_same:.4}; rank mismatches {rank_mismatch}/{cases}; tpr fixtures {tpr1}, {tpr2}, {tpr3}"
        ),
    )
}

// ---------------------------------------------------------------- determinism

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_spectra"))
            .args(["simulate", "--seed", "1234", "--out-dir"])
            .arg(&out)
            .output()
            .expect("spawn spectra");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let files = ["member_report.json", "non_member_report.json", "audit.jsonl", "manifest.json"];
    let same = |f: &str| std::fs::read(Path::new(&a).join(f)).unwrap() == std::fs::read(Path::new(&b).join(f)).unwrap();
    let differing: Vec<&str> = files.iter().copied().filter(|f| !same(f)).collect();
    (
        differing.is_empty(),
        if differing.is_empty() {
            format!("two seed-1234 runs byte-identical across {}", files.join(", "))
        } else {
            format!("differing files: {differing:?}")
        },
    )
}

fn main() {
    // `cargo test --test acceptance -- 3 9` runs only the listed criteria
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: u32| only.is_empty() || only.contains(&n);
    let mut failures = 0;
    let mut report = |n: u32, name: &str, (ok, detail): Check| {
        println!("criterion {n:>2} [{name}] {}: {detail}", if ok { "PASS" } else { "FAIL" });
        failures += u32::from(!ok);
    };
    let checks: [Named; 4] = [
        (1, "t distribution", criterion_1),
        (2, "paired t-test fixture", criterion_2),
        (3, "score oracles", criterion_3),
        (4, "sampling distribution", criterion_4),
    ];
    for (n, name, f) in checks {
        if want(n) {
            report(n, name, f());
        }
    }
    if want(5) || want(6) || want(7) {
        let start = Instant::now();
        let runs: Vec<SeedResult> = (0..100).map(|s| simulate(s, Strategy::Spectra)).collect();
        let (c5, c6) = criteria_5_6(&runs, start.elapsed().as_secs_f64());
        report(5, "synthetic membership", c5);
        report(6, "watermark neutrality", c6);
        report(7, "strategy ordering", criterion_7(&runs[..20]));
    }
    let checks: [Named; 3] = [
        (8, "dedup", criterion_8),
        (9, "metrics", criterion_9),
        (10, "determinism", criterion_10),
    ];
    for (n, name, f) in checks {
        if want(n) {
            report(n, name, f());
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all selected criteria passed");
}
