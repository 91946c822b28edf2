//! Paraphrase acquisition: unique-after-lowercasing candidates, one per
//! temperature slot.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

use super::remote::{RetryPolicy, Transport};
use crate::error::{Error, Result};

pub const PARAPHRASE_PROMPT: &str = "Paraphrase the below paragraph of text enclosed in <text> tags, hereafter referred to as the original text.
The paraphrased text should use different vocabulary, sentence structure, and style while preserving the meaning and tone of the original text.
Do not remove any information from the original text while paraphrasing.
Do not add any new information to the paraphrased text that is not present in the original text.
Do not add any interpretive language to the paraphrased text that is not implied by the original text.
Ensure that all technical details, findings, results, and other information such as tense, voice, and line breaks are preserved.
Format your response as: PARAPHRASED PARAGRAPH: [your rephrased version]
Based on the aforementioned directions, paraphrase the following text. <text>{text}</text>";

pub const RESPONSE_MARKER: &str = "PARAPHRASED PARAGRAPH:";

pub fn render_prompt(text: &str) -> String {
    PARAPHRASE_PROMPT.replace("{text}", text)
}

/// Text after the last response marker, trimmed.
pub fn extract_paraphrase(response: &str) -> Option<&str> {
    response.rfind(RESPONSE_MARKER).map(|i| response[i + RESPONSE_MARKER.len()..].trim())
}

pub trait ParaphraseClient {
    fn paraphrase(&mut self, text: &str, temperature: f64) -> Result<String>;
}

/// Evenly spaced over `[0.3, 1.2]`.
pub fn default_temperatures(m: usize) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![0.3],
        _ => (0..m).map(|i| 0.3 + 0.9 * i as f64 / (m - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paraphrases {
    pub texts: Vec<String>,
    /// Regenerations caused by duplicates, summed over slots.
    pub retries: u32,
}

/// Draws one paraphrase per temperature. A duplicate (after lowercasing) is
/// regenerated at the same temperature, at most `max_retries` times per slot.
pub fn acquire_paraphrases(
    client: &mut dyn ParaphraseClient,
    text: &str,
    temperatures: &[f64],
    max_retries: u32,
) -> Result<Paraphrases> {
    let mut seen = std::collections::HashSet::new();
    let mut texts = Vec::with_capacity(temperatures.len());
    let mut retries = 0;
    for (slot, &temperature) in temperatures.iter().enumerate() {
        let mut attempt = 0;
        loop {
            let candidate = client.paraphrase(text, temperature)?;
            if seen.insert(candidate.to_lowercase()) {
                texts.push(candidate);
                break;
            }
            if attempt == max_retries {
                return Err(Error::UniquenessFailure {
                    slot: slot + 1,
                    temperature,
                    retries: attempt,
                });
            }
            attempt += 1;
            retries += 1;
            log::debug!("slot {} duplicate at temperature {temperature}; regenerating", slot + 1);
        }
    }
    Ok(Paraphrases { texts, retries })
}

/// Chat-completions style client (`{"model", "messages", "temperature"}`).
pub struct ChatParaphraser {
    endpoint: String,
    model: String,
    transport: Box<dyn Transport>,
    policy: RetryPolicy,
}

impl ChatParaphraser {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, transport: Box<dyn Transport>, policy: RetryPolicy) -> Self {
        ChatParaphraser {
            endpoint: endpoint.into(),
            model: model.into(),
            transport,
            policy,
        }
    }
}

impl ParaphraseClient for ChatParaphraser {
    fn paraphrase(&mut self, text: &str, temperature: f64) -> Result<String> {
        let body = json!({
            "model": self.model,
            "temperature": temperature,
            "messages": [{"role": "user", "content": render_prompt(text)}],
        });
        let (resp, _) = self.policy.run(|| self.transport.post_json(&self.endpoint, &body))?;
        let content = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::ProviderContract("chat response has no message content".into()))?;
        extract_paraphrase(content)
            .map(str::to_string)
            .ok_or_else(|| Error::ProviderContract(format!("response lacks {RESPONSE_MARKER:?}")))
    }
}

/// Groups of interchangeable words.
#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    classes: Vec<Vec<String>>,
    lookup: HashMap<String, (usize, usize)>,
}

impl SynonymTable {
    pub fn new(classes: Vec<Vec<String>>) -> Result<Self> {
        let mut lookup = HashMap::new();
        for (c, class) in classes.iter().enumerate() {
            if class.len() < 2 {
                return Err(Error::Argument(format!("synonym class {c} needs at least 2 words")));
            }
            for (i, w) in class.iter().enumerate() {
                if lookup.insert(w.clone(), (c, i)).is_some() {
                    return Err(Error::Argument(format!("word {w:?} is in more than one class")));
                }
            }
        }
        Ok(SynonymTable { classes, lookup })
    }

    pub fn classes(&self) -> &[Vec<String>] {
        &self.classes
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup.contains_key(word)
    }
}

/// Deterministic test double: each call rotates every synonym word within
/// its class along a seeded ordering. Call `c` on a text uses rotation
/// `1 + c mod (size - 1)`, so a class of size `g` yields `g - 1` distinct
/// rewrites before repeating.
#[derive(Debug, Clone)]
pub struct StubParaphraser {
    table: SynonymTable,
    // per class: seeded ordering of member indices and its inverse
    order: Vec<Vec<usize>>,
    rank: Vec<Vec<usize>>,
    calls: HashMap<String, usize>,
}

impl StubParaphraser {
    pub fn new(seed: u64, table: SynonymTable) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut order = Vec::with_capacity(table.classes.len());
        let mut rank = Vec::with_capacity(table.classes.len());
        for class in &table.classes {
            let mut o: Vec<usize> = (0..class.len()).collect();
            o.shuffle(&mut rng);
            let mut r = vec![0; o.len()];
            for (pos, &member) in o.iter().enumerate() {
                r[member] = pos;
            }
            order.push(o);
            rank.push(r);
        }
        StubParaphraser {
            table,
            order,
            rank,
            calls: HashMap::new(),
        }
    }

    /// The rewrite produced by call number `call` (0-based).
    pub fn rewrite(&self, text: &str, call: usize) -> String {
        let mut out = String::with_capacity(text.len());
        for (i, word) in text.split_whitespace().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match self.table.lookup.get(word) {
                Some(&(c, member)) => {
                    let g = self.order[c].len();
                    let shift = 1 + call % (g - 1);
                    let pos = (self.rank[c][member] + shift) % g;
                    out.push_str(&self.table.classes[c][self.order[c][pos]]);
                }
                None => out.push_str(word),
            }
        }
        out
    }
}

impl ParaphraseClient for StubParaphraser {
    fn paraphrase(&mut self, text: &str, _temperature: f64) -> Result<String> {
        let call = self.calls.entry(text.to_string()).or_insert(0);
        let c = *call;
        *call += 1;
        Ok(self.rewrite(text, c))
    }
}
