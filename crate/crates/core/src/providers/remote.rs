//! Grey-box scoring over HTTP.
//!
//! Request (POST, JSON):
//!
//! ```text
//! {"id": 17, "model_id": "pythia-410m", "token_ids": [5, 812, 33]}
//! ```
//!
//! Response:
//!
//! ```text
//! {"id": 17, "model_id": "pythia-410m", "stats": [[-3.2, -4.1, 1.7], [-0.4, -2.9, 1.1]]}
//! ```
//!
//! `stats` has one `[gold_logprob, dist_mean, dist_std]` triple (nats) per
//! position `1..n`. Any missing or out-of-range value rejects the whole
//! document; nothing is defaulted.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{ProviderIdentity, ProviderKind, StatsProvider};
use crate::error::{Error, Result};
use crate::records::{TokenStats, TokenizedDocument};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Worth retrying: connection failures, timeouts, 429 and 5xx.
    Transient(String),
    Fatal(String),
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Transient(m) => write!(f, "transient: {m}"),
            TransportError::Fatal(m) => write!(f, "fatal: {m}"),
        }
    }
}

/// A JSON request/response channel.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    bearer: Option<String>,
}

impl HttpTransport {
    /// `token_env` names an environment variable holding a bearer token.
    pub fn new(timeout: Duration, token_env: Option<&str>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build();
        HttpTransport {
            agent: ureq::Agent::new_with_config(config),
            bearer: token_env.and_then(|k| std::env::var(k).ok()),
        }
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.agent.post(url);
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(classify)?;
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| TransportError::Fatal(format!("response is not JSON: {e}")))
    }
}

fn classify(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::StatusCode(code) if code == 429 || code >= 500 => {
            TransportError::Transient(format!("http status {code}"))
        }
        ureq::Error::StatusCode(code) => TransportError::Fatal(format!("http status {code}")),
        ureq::Error::Timeout(_)
        | ureq::Error::Io(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound => TransportError::Transient(e.to_string()),
        other => TransportError::Fatal(other.to_string()),
    }
}

/// Exponential backoff: `base_delay * multiplier^attempt`, capped at `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(10),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            multiplier: 1.0,
        }
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let secs = self.base_delay.as_secs_f64() * self.multiplier.powi(retry as i32);
        Duration::from_secs_f64(secs.min(self.max_delay.as_secs_f64()))
    }

    /// Runs `op` until it succeeds, fails fatally, or retries run out.
    /// Returns the value and how many retries it took.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, TransportError>) -> Result<(T, u32)> {
        let mut retries = 0;
        loop {
            match op() {
                Ok(v) => return Ok((v, retries)),
                Err(TransportError::Transient(msg)) if retries < self.max_retries => {
                    let wait = self.delay(retries);
                    log::warn!("transient failure ({msg}); retry {} in {:?}", retries + 1, wait);
                    std::thread::sleep(wait);
                    retries += 1;
                }
                Err(e) => {
                    return Err(Error::Transport {
                        attempts: retries + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
    }
}

pub struct RemoteProvider {
    identity: ProviderIdentity,
    endpoint: String,
    transport: Box<dyn Transport>,
    policy: RetryPolicy,
    next_id: AtomicU64,
    retries: AtomicU64,
}

impl RemoteProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model_id: &str,
        vocab_size: usize,
        transport: Box<dyn Transport>,
        policy: RetryPolicy,
    ) -> Result<Self> {
        Ok(RemoteProvider {
            identity: ProviderIdentity::new(model_id, ProviderKind::Remote, vocab_size)?,
            endpoint: endpoint.into(),
            transport,
            policy,
            next_id: AtomicU64::new(0),
            retries: AtomicU64::new(0),
        })
    }

    /// Total retries across all requests so far.
    pub fn retries_total(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    /// Like [`StatsProvider::stats`], also returning the retry count.
    pub fn stats_traced(&self, doc: &TokenizedDocument) -> Result<(Vec<TokenStats>, u32)> {
        if doc.token_ids.len() < 2 {
            return Err(Error::Argument(format!(
                "{}: remote scoring needs at least 2 tokens",
                doc.doc_id
            )));
        }
        if let Some(&bad) = doc.token_ids.iter().find(|&&t| t as usize >= self.identity.vocab_size) {
            return Err(Error::TokenRange {
                token_id: bad,
                vocab_size: self.identity.vocab_size,
            });
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({
            "id": id,
            "model_id": self.identity.model_id,
            "token_ids": doc.token_ids,
        });
        let (resp, retries) = self.policy.run(|| self.transport.post_json(&self.endpoint, &body))?;
        self.retries.fetch_add(retries as u64, Ordering::Relaxed);
        if retries > 0 {
            log::info!("{} {}: succeeded after {retries} retries", doc.doc_id, doc.variant);
        }
        let stats = parse_response(&resp, id, &self.identity.model_id, &doc.token_ids)
            .map_err(|m| Error::ProviderContract(format!("{} {}: {m}", doc.doc_id, doc.variant)))?;
        Ok((stats, retries))
    }
}

impl StatsProvider for RemoteProvider {
    fn identity(&self) -> &ProviderIdentity {
        &self.identity
    }

    fn stats(&self, doc: &TokenizedDocument) -> Result<Vec<TokenStats>> {
        self.stats_traced(doc).map(|(s, _)| s)
    }
}

fn parse_response(
    resp: &Value,
    id: u64,
    model_id: &str,
    token_ids: &[u32],
) -> std::result::Result<Vec<TokenStats>, String> {
    let echoed = resp.get("id").and_then(Value::as_u64).ok_or("missing id")?;
    if echoed != id {
        return Err(format!("response id {echoed} does not match request id {id}"));
    }
    let echoed_model = resp
        .get("model_id")
        .and_then(Value::as_str)
        .ok_or("missing model_id")?;
    if echoed_model != model_id {
        return Err(format!("response model {echoed_model:?}, expected {model_id:?}"));
    }
    let entries = resp.get("stats").and_then(Value::as_array).ok_or("missing stats array")?;
    let expected = token_ids.len() - 1;
    if entries.len() != expected {
        return Err(format!("expected {expected} stats entries, got {}", entries.len()));
    }
    const NAMES: [&str; 3] = ["gold_logprob", "dist_mean", "dist_std"];
    let mut out = Vec::with_capacity(expected);
    for (pos, (entry, &token_id)) in entries.iter().zip(&token_ids[1..]).enumerate() {
        let triple = entry
            .as_array()
            .ok_or_else(|| format!("position {}: entry is not an array", pos + 1))?;
        let mut v = [0.0; 3];
        for (k, name) in NAMES.iter().enumerate() {
            v[k] = triple
                .get(k)
                .and_then(Value::as_f64)
                .ok_or_else(|| format!("position {}: missing {name}", pos + 1))?;
        }
        if triple.len() != 3 {
            return Err(format!("position {}: expected 3 values, got {}", pos + 1, triple.len()));
        }
        let t = TokenStats::new(token_id, v[0], v[1], v[2]);
        t.validate("remote").map_err(|e| format!("position {}: {e}", pos + 1))?;
        out.push(t);
    }
    Ok(out)
}
