//! Scores one token sequence with every supported method, under a model that
//! never saw it and under one that memorized it.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use spectra::providers::{StatsProvider, SyntheticLm, SyntheticProvider};
use spectra::records::{ScoreMethod, TokenizedDocument, Variant};
use spectra::scores::{build_q_ref, score_document};

fn main() -> spectra::Result<()> {
    let vocab = 50;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let uniform = SyntheticLm::new(1, vocab, 1.0)?;
    let corpus = (0..200)
        .map(|_| uniform.synth_generate(40, &mut rng))
        .collect::<spectra::Result<Vec<_>>>()?;
    let target = uniform.synth_generate(40, &mut rng)?;

    let unseen = SyntheticLm::new(2, vocab, 0.1)?.trained(&corpus, 1)?;
    let memorized = unseen.trained(&[&target], 20)?;
    let q_ref = build_q_ref(corpus.iter().map(Vec::as_slice), vocab, 1.0)?;

    let doc = TokenizedDocument {
        doc_id: "example".into(),
        variant: Variant::Original,
        word_count: target.len() as u32,
        text: None,
        token_ids: target,
    };
    let records = [("unseen", unseen), ("memorized", memorized)]
        .into_iter()
        .map(|(id, lm)| SyntheticProvider::new(id, Arc::new(lm))?.record(&doc))
        .collect::<spectra::Result<Vec<_>>>()?;

    println!("{:<10}{:>12}{:>12}", "method", "unseen", "memorized");
    for (method, k) in [
        (ScoreMethod::Loss, None),
        (ScoreMethod::MinK, Some(20.0)),
        (ScoreMethod::MinKpp, Some(20.0)),
        (ScoreMethod::DcPdd, None),
    ] {
        let s = records
            .iter()
            .map(|r| score_document(r, method, k, Some(&q_ref), "m").map(|d| d.value))
            .collect::<spectra::Result<Vec<_>>>()?;
        println!("{:<10}{:>12.4}{:>12.4}", method.to_string(), s[0], s[1]);
    }
    Ok(())
}
