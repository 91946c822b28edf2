//! Self-contained watermark-then-verify experiment on synthetic text.
//!
//! A sparse first-order "world" generates every corpus. Some of its tokens
//! form synonym classes: members of a class are emitted with equal
//! probability and are followed by the same distribution, so swapping one
//! member for another leaves a document exactly as likely under the world.
//! The stub paraphraser performs exactly those swaps.
//!
//! The base (target before training) and scoring models are second-order
//! models fitted to independent world samples. The member target is the base
//! model after `epochs` passes over the watermarked documents mixed with
//! `distractor_multiple` times as many world tokens.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{Phase, RunManifest};
use super::verify::{run_verify, RecordSet, VerifyConfig};
use super::watermark::{run_watermark, WatermarkConfig, WatermarkRun};
use crate::error::{Error, Result};
use crate::providers::paraphrase::{acquire_paraphrases, default_temperatures, StubParaphraser, SynonymTable};
use crate::providers::synthetic::{parse_tokens, render_tokens, SyntheticLm, SyntheticProvider};
use crate::providers::{collect_records, StatsProvider};
use crate::records::{save_records, save_tokenized, DocumentRecord, ParaphraseFamily, ScoreSpec, TokenizedDocument, Variant};
use crate::sampler::{Strategy, DEFAULT_ALPHA};
use crate::scores::DEFAULT_K_PERCENT;
use crate::verifier::{VerificationReport, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub synonym_classes: usize,
    pub class_size: usize,
    /// Distinct successors per concept.
    pub successors: usize,
    /// Chance that a successor slot is a synonym class.
    pub synonym_bias: f64,
    /// Probability mass spread uniformly over the vocabulary.
    pub noise: f64,
    /// World tokens each pretrained model sees.
    pub pretrain_tokens: usize,
    pub model_order: usize,
    pub model_smoothing: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            synonym_classes: 20,
            class_size: 11,
            successors: 6,
            synonym_bias: 0.4,
            noise: 0.05,
            pretrain_tokens: 1_000_000,
            model_order: 2,
            model_smoothing: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub vocab_size: usize,
    pub documents: usize,
    pub doc_length: usize,
    pub paraphrases: usize,
    pub distractor_multiple: usize,
    pub epochs: u32,
    pub seed: u64,
    pub strategy: Strategy,
    pub alpha: f64,
    pub k_percent: f64,
    pub threshold: f64,
    pub jobs: usize,
    pub world: WorldConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            vocab_size: 1000,
            documents: 500,
            doc_length: 256,
            paraphrases: 10,
            distractor_multiple: 50,
            epochs: 4,
            seed: 1234,
            strategy: Strategy::Spectra,
            alpha: DEFAULT_ALPHA,
            k_percent: DEFAULT_K_PERCENT,
            threshold: DEFAULT_THRESHOLD,
            jobs: 1,
            world: WorldConfig::default(),
        }
    }
}

/// Named sub-seeds, each an independent stream of the master seed.
const SEED_NAMES: [&str; 7] = [
    "world",
    "base_pretrain",
    "scoring_pretrain",
    "documents",
    "paraphraser",
    "sampler",
    "distractor",
];

pub fn derive_seed(master: u64, name: &str) -> u64 {
    let stream = SEED_NAMES
        .iter()
        .position(|n| *n == name)
        .expect("known seed name") as u64;
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream + 1);
    rng.next_u64()
}

#[derive(Debug, Clone)]
pub struct World {
    pub lm: SyntheticLm,
    pub synonyms: SynonymTable,
    pub classes: Vec<Vec<u32>>,
}

impl World {
    pub fn build(vocab_size: usize, cfg: &WorldConfig, seed: u64) -> Result<World> {
        let (c, g) = (cfg.synonym_classes, cfg.class_size);
        if g < 2 || c * g >= vocab_size {
            return Err(Error::Argument(format!(
                "{c} synonym classes of size {g} do not fit a vocabulary of {vocab_size}"
            )));
        }
        if !(cfg.noise > 0.0 && cfg.noise < 1.0) || !(0.0..=1.0).contains(&cfg.synonym_bias) {
            return Err(Error::Argument("noise must be in (0, 1) and synonym_bias in [0, 1]".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut ids: Vec<u32> = (0..vocab_size as u32).collect();
        ids.shuffle(&mut rng);
        let classes: Vec<Vec<u32>> = ids[..c * g].chunks(g).map(<[u32]>::to_vec).collect();
        let regular = &ids[c * g..];
        let concepts = regular.len() + c;
        if cfg.successors == 0 || cfg.successors > concepts {
            return Err(Error::Argument(format!("successors must be in 1..={concepts}")));
        }
        // concept k < regular.len() is a regular token; the rest are classes
        let pick = |rng: &mut ChaCha20Rng| {
            if c > 0 && rng.gen::<f64>() < cfg.synonym_bias {
                regular.len() + rng.gen_range(0..c)
            } else {
                rng.gen_range(0..regular.len())
            }
        };
        const MASS: f64 = 100.0;
        let harmonic: f64 = (1..=cfg.successors).map(|r| 1.0 / r as f64).sum();
        let mut entries = Vec::new();
        for concept in 0..concepts {
            let mut next: Vec<usize> = Vec::with_capacity(cfg.successors);
            while next.len() < cfg.successors {
                let k = pick(&mut rng);
                if !next.contains(&k) {
                    next.push(k);
                }
            }
            let sources: &[u32] = if concept < regular.len() {
                std::slice::from_ref(&regular[concept])
            } else {
                &classes[concept - regular.len()]
            };
            for (rank, &k) in next.iter().enumerate() {
                let w = MASS / ((rank + 1) as f64 * harmonic);
                for &src in sources {
                    if k < regular.len() {
                        entries.push((vec![src], regular[k], w));
                    } else {
                        for &member in &classes[k - regular.len()] {
                            entries.push((vec![src], member, w / g as f64));
                        }
                    }
                }
            }
        }
        let smoothing = cfg.noise * MASS / ((1.0 - cfg.noise) * vocab_size as f64);
        let lm = SyntheticLm::from_counts(1, vocab_size, smoothing, &entries)?;
        let words = classes
            .iter()
            .map(|cl| cl.iter().map(|&t| render_tokens(&[t])).collect())
            .collect();
        Ok(World {
            lm,
            synonyms: SynonymTable::new(words)?,
            classes,
        })
    }

    /// `count` documents of `length` tokens.
    pub fn sample_docs(&self, count: usize, length: usize, seed: u64) -> Result<Vec<Vec<u32>>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..count).map(|_| self.lm.synth_generate(length, &mut rng)).collect()
    }

    /// A model of the given config fitted to a fresh world sample.
    pub fn pretrained(&self, cfg: &WorldConfig, doc_length: usize, seed: u64) -> Result<SyntheticLm> {
        let docs = self.sample_docs(cfg.pretrain_tokens.div_ceil(doc_length), doc_length, seed)?;
        SyntheticLm::new(cfg.model_order, self.lm.vocab_size(), cfg.model_smoothing)?.trained(&docs, 1)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub member: VerificationReport,
    pub non_member: VerificationReport,
    pub watermark: WatermarkRun,
    pub manifest: RunManifest,
    /// Originals and watermarked texts under the scoring model.
    pub scoring_records: Vec<DocumentRecord>,
    /// The same pairs under the trained target and the untrained base model.
    pub target_records: Vec<DocumentRecord>,
    pub base_records: Vec<DocumentRecord>,
    /// Every original followed by its paraphrases, as token ids.
    pub family_docs: Vec<TokenizedDocument>,
    pub scoring_model: Arc<SyntheticLm>,
}

impl SimulationOutcome {
    /// Writes `member_report.json`, `non_member_report.json`, `audit.jsonl`
    /// and `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.member.save(dir.join("member_report.json"))?;
        self.non_member.save(dir.join("non_member_report.json"))?;
        crate::sampler::save_audit(&self.watermark.audit(), dir.join("audit.jsonl"))?;
        self.manifest.save(dir.join("manifest.json"))
    }

    /// Writes `scoring.jsonl`, `target.jsonl` and `base.jsonl`, the stored
    /// stats from which `verify` reproduces both reports, plus
    /// `families.jsonl` and `scoring_model.json` for rerunning `watermark`.
    pub fn export_records(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_tokenized(&self.family_docs, dir.join("families.jsonl"))?;
        self.scoring_model.save(dir.join("scoring_model.json"))?;
        save_records(&self.scoring_records, dir.join("scoring.jsonl"))?;
        save_records(&self.target_records, dir.join("target.jsonl"))?;
        save_records(&self.base_records, dir.join("base.jsonl"))
    }
}

fn tokenized(doc_id: &str, variant: Variant, tokens: Vec<u32>) -> TokenizedDocument {
    TokenizedDocument {
        doc_id: doc_id.to_string(),
        variant,
        word_count: tokens.len() as u32,
        text: None,
        token_ids: tokens,
    }
}

fn records_for(lm: &Arc<SyntheticLm>, model_id: &str, docs: &[TokenizedDocument], jobs: usize) -> Result<(SyntheticProvider, Vec<DocumentRecord>)> {
    let provider = SyntheticProvider::new(model_id, lm.clone())?;
    let records = collect_records(&provider, docs, jobs)?;
    Ok((provider, records))
}

pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationOutcome> {
    if cfg.documents < 2 || cfg.paraphrases == 0 || cfg.doc_length < 2 {
        return Err(Error::Argument("need >= 2 documents, >= 1 paraphrase and length >= 2".into()));
    }
    let seed = |name| derive_seed(cfg.seed, name);
    let clock = std::time::Instant::now();
    let lap = |what: &str| log::debug!("{what}: {:.3}s", clock.elapsed().as_secs_f64());
    let world = World::build(cfg.vocab_size, &cfg.world, seed("world"))?;
    let base = Arc::new(world.pretrained(&cfg.world, cfg.doc_length, seed("base_pretrain"))?);
    let scoring_lm = Arc::new(world.pretrained(&cfg.world, cfg.doc_length, seed("scoring_pretrain"))?);

    lap("pretrained models");
    let originals = world.sample_docs(cfg.documents, cfg.doc_length, seed("documents"))?;
    let mut stub = StubParaphraser::new(seed("paraphraser"), world.synonyms.clone());
    let temperatures = default_temperatures(cfg.paraphrases);
    let mut family_docs = Vec::with_capacity(cfg.documents * (cfg.paraphrases + 1));
    for (i, doc) in originals.iter().enumerate() {
        let id = format!("doc-{i:05}");
        let got = acquire_paraphrases(&mut stub, &render_tokens(doc), &temperatures, 3)?;
        family_docs.push(tokenized(&id, Variant::Original, doc.clone()));
        for (j, text) in got.texts.iter().enumerate() {
            family_docs.push(tokenized(&id, Variant::Paraphrase(j as u32 + 1), parse_tokens(text)?));
        }
    }

    lap("paraphrases");
    let (scoring, scoring_records) = records_for(&scoring_lm, "synthetic-scoring", &family_docs, cfg.jobs)?;
    let families: Vec<ParaphraseFamily> = scoring_records
        .chunks(cfg.paraphrases + 1)
        .map(|c| ParaphraseFamily {
            original: c[0].clone(),
            candidates: c[1..].to_vec(),
            m: cfg.paraphrases,
        })
        .collect();
    let spec = ScoreSpec::min_kpp(cfg.k_percent);
    let wm_cfg = WatermarkConfig {
        dataset_id: "synthetic".into(),
        score: spec,
        alpha: cfg.alpha,
        strategy: cfg.strategy,
        seed: seed("sampler"),
        jobs: cfg.jobs,
    };
    let wm = run_watermark(&families, scoring.identity(), &wm_cfg, None)?;
    lap("watermark");
    drop(families);

    // the released pairs, as tokens
    let stride = cfg.paraphrases + 1;
    let mut pair_docs = Vec::with_capacity(2 * cfg.documents);
    let mut watermarked_tokens = Vec::with_capacity(cfg.documents);
    for (i, sel) in wm.selections.iter().enumerate() {
        let orig = &family_docs[i * stride];
        let chosen = &family_docs[i * stride + sel.chosen_index];
        watermarked_tokens.push(chosen.token_ids.clone());
        pair_docs.push(orig.clone());
        pair_docs.push(chosen.clone());
    }
    let scoring_pairs: Vec<DocumentRecord> = wm
        .originals
        .iter()
        .zip(&wm.watermarked)
        .flat_map(|(o, w)| [o.clone(), w.clone()])
        .collect();

    let mut training = watermarked_tokens;
    let distractor_docs = cfg.distractor_multiple * cfg.documents;
    training.extend(world.sample_docs(distractor_docs, cfg.doc_length, seed("distractor"))?);
    lap("distractor");
    let target_lm = Arc::new(base.trained(&training, cfg.epochs)?);
    drop(training);
    lap("target training");

    let v_cfg = VerifyConfig {
        dataset_id: "synthetic".into(),
        score: spec,
        threshold: cfg.threshold,
        seed: wm_cfg.seed,
        jobs: cfg.jobs,
    };
    let scoring_set = RecordSet {
        identity: scoring.identity(),
        records: &scoring_pairs,
    };
    let (target, target_records) = records_for(&target_lm, "synthetic-target", &pair_docs, cfg.jobs)?;
    let member = run_verify(
        scoring_set,
        RecordSet {
            identity: target.identity(),
            records: &target_records,
        },
        &v_cfg,
        None,
    )?;
    let (base_p, base_records) = records_for(&base, "synthetic-target", &pair_docs, cfg.jobs)?;
    let non_member = run_verify(
        scoring_set,
        RecordSet {
            identity: base_p.identity(),
            records: &base_records,
        },
        &v_cfg,
        None,
    )?;

    lap("verification");
    let mut manifest = RunManifest::new("synthetic", Phase::Simulate, spec)
        .provider("scoring", scoring.identity())
        .provider("target", target.identity())
        .seed("master", cfg.seed)
        .param("config", cfg)
        .param("pi_plus", wm.balance.pi_plus);
    for name in SEED_NAMES {
        manifest = manifest.seed(name, seed(name));
    }
    manifest.alpha = Some(cfg.alpha);
    manifest.strategy = Some(cfg.strategy);
    // both reports carry every seed needed to rerun the simulation
    let (mut member, mut non_member) = (member, non_member);
    member.manifest = Some(manifest.clone());
    non_member.manifest = Some(manifest.clone());
    Ok(SimulationOutcome {
        member,
        non_member,
        watermark: wm,
        manifest,
        scoring_records: scoring_pairs,
        target_records,
        base_records,
        family_docs,
        scoring_model: scoring_lm,
    })
}
