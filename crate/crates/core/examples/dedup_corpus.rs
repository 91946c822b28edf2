//! Prepares a candidate corpus: truncation to a token budget, n-gram
//! deduplication against a reference corpus, and a held-out split.

use spectra::pipeline::{dedup_against, split_heldout, truncate_document, CorpusConfig, Truncation};

/// `n` pseudo-random words; different seeds share essentially no 13-grams.
fn words(seed: u64, n: u64) -> String {
    (0..n)
        .map(|i| {
            let h = (seed << 32 | i).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(29);
            format!("w{}", h % 5000)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> spectra::Result<()> {
    let cfg = CorpusConfig::default();
    let reference: Vec<String> = (0..50).map(|i| words(i, 300)).collect();

    let copied = reference[3].clone();
    let mut half = reference[4].split(' ').take(150).collect::<Vec<_>>().join(" ");
    half.push(' ');
    half.push_str(&words(900, 150));
    let fresh = words(1000, 300);
    let candidates = vec![copied, half, fresh];

    let outcome = dedup_against(&reference, &candidates, &cfg)?;
    for f in &outcome.flagged {
        println!("candidate {} flagged, overlap {:.3}", f.index, f.overlap);
    }
    println!("kept: {:?}", outcome.kept);

    // one whitespace word per token for this illustration
    let count = |s: &str| s.split_whitespace().count();
    for (i, text) in candidates.iter().enumerate() {
        match truncate_document(text, count, &cfg) {
            Truncation::Unchanged => println!("candidate {i}: fits"),
            Truncation::Truncated(t) => println!("candidate {i}: cut to {} words", count(&t)),
            Truncation::TooShort { words } => println!("candidate {i}: too short ({words} words)"),
        }
    }

    let (released, heldout) = split_heldout(candidates.clone(), 0.34, cfg.seed)?;
    println!("split: {} released, {} held out", released.len(), heldout.len());
    Ok(())
}
