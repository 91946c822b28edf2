//! Builds paraphrase families with the rule-based stub paraphraser, scores
//! them with a scoring model and picks one paraphrase per document.
//!
//! `cargo run --release --example watermark_dataset [OUT_DIR]`

use std::sync::Arc;

use spectra::pipeline::{run_watermark, World, WorldConfig, WatermarkConfig};
use spectra::providers::paraphrase::{acquire_paraphrases, default_temperatures, StubParaphraser};
use spectra::providers::synthetic::{parse_tokens, render_tokens};
use spectra::providers::{collect_records, StatsProvider, SyntheticProvider};
use spectra::records::{group_families, TokenizedDocument, Variant};
use spectra::sampler::ChosenSide;

fn main() -> spectra::Result<()> {
    let world_cfg = WorldConfig {
        synonym_classes: 8,
        pretrain_tokens: 100_000,
        ..WorldConfig::default()
    };
    let world = World::build(400, &world_cfg, 1)?;
    let scoring = SyntheticProvider::new("scorer", Arc::new(world.pretrained(&world_cfg, 64, 2)?))?;

    let mut stub = StubParaphraser::new(3, world.synonyms.clone());
    let temperatures = default_temperatures(10);
    let mut docs = Vec::new();
    for (i, tokens) in world.sample_docs(100, 64, 4)?.into_iter().enumerate() {
        let id = format!("doc-{i:03}");
        let text = render_tokens(&tokens);
        let paraphrases = acquire_paraphrases(&mut stub, &text, &temperatures, 3)?;
        docs.push(tokenized(&id, Variant::Original, tokens));
        for (j, p) in paraphrases.texts.iter().enumerate() {
            docs.push(tokenized(&id, Variant::Paraphrase(j as u32 + 1), parse_tokens(p)?));
        }
    }
    let families = group_families(&collect_records(&scoring, &docs, 1)?, 10)?;
    let run = run_watermark(&families, scoring.identity(), &WatermarkConfig::default(), None)?;

    let count = |side| run.selections.iter().filter(|s| s.chosen_side == side).count();
    println!(
        "pi_plus = {:.3} (all-below rows {}, all-above rows {})",
        run.balance.pi_plus, run.balance.count_all_below, run.balance.count_all_above
    );
    println!(
        "chosen sides: above {}, below {}, forced {}",
        count(ChosenSide::Above),
        count(ChosenSide::Below),
        count(ChosenSide::Forced)
    );
    for (row, sel) in run.rows.iter().zip(&run.selections).take(3) {
        println!("{}: picked #{} with ratio {:.4}", row.doc_id, sel.chosen_index, row.ratios[sel.chosen_index - 1]);
    }
    if let Some(dir) = std::env::args().nth(1) {
        run.save(dir.as_ref())?;
        println!("wrote {dir}");
    }
    Ok(())
}

fn tokenized(id: &str, variant: Variant, token_ids: Vec<u32>) -> TokenizedDocument {
    TokenizedDocument {
        doc_id: id.into(),
        variant,
        word_count: token_ids.len() as u32,
        text: None,
        token_ids,
    }
}
