//! Command-line interface. `run` parses arguments, dispatches, and maps
//! every error onto one exit status.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::pipeline::corpus::{dedup_against, split_heldout, CorpusConfig};
use crate::pipeline::simulate::{run_simulation, SimulationConfig, WorldConfig};
use crate::pipeline::verify::{run_verify, RecordSet, VerifyConfig};
use crate::pipeline::watermark::{run_watermark, WatermarkConfig};
use crate::providers::synthetic::{SyntheticLm, SyntheticProvider};
use crate::providers::{
    collect_records, FileProvider, HttpTransport, ProviderIdentity, RemoteProvider, RetryPolicy,
    StatsProvider,
};
use crate::records::{
    group_families, load_records, load_tokenized, read_jsonl, save_scored, write_json, DocumentRecord, ScoreMethod,
    ScoreSpec,
};
use crate::sampler::{Strategy, DEFAULT_ALPHA};
use crate::scores::{build_q_ref, score_document, RefDistribution, DEFAULT_K_PERCENT, DEFAULT_REF_SMOOTHING};
use crate::verifier::{VerificationReport, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InvalidInput = 2,
    Provider = 3,
    Degenerate = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of(err: &Error) -> ExitStatus {
        match err {
            Error::ProviderContract(_) | Error::Transport { .. } | Error::UniquenessFailure { .. } => ExitStatus::Provider,
            Error::DegenerateVariance { .. }
            | Error::DegenerateDistribution { .. }
            | Error::ZeroOriginalScore { .. }
            | Error::InsufficientSample(_)
            | Error::UndefinedCorrelation(_) => ExitStatus::Degenerate,
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Structure { .. }
            | Error::Io { .. }
            | Error::Argument(_)
            | Error::EmptyInput(_)
            | Error::ZeroReferenceProbability { .. }
            | Error::TokenRange { .. }
            | Error::Pairing { .. }
            | Error::MissingDocument(_)
            | Error::AmbiguousDocument(_)
            | Error::Json(_) => ExitStatus::InvalidInput,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spectra", version, about = "Watermark a text dataset with score-guided paraphrases and test models for membership")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Worker threads for scoring.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score documents; one output line per input document.
    Score(ScoreArgs),
    /// Select one paraphrase per document.
    Watermark(WatermarkArgs),
    /// Paired t-test of target against scoring model.
    Verify(VerifyArgs),
    /// Flag candidates that overlap a reference corpus.
    Dedup(DedupArgs),
    /// Synthetic end-to-end run producing member and non-member reports.
    Simulate(SimulateArgs),
    /// Summarize a verification report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    /// `file` (input holds stored stats), `synthetic:MODEL.json` or `remote:URL`
    /// (input holds token ids).
    #[arg(long, default_value = "file")]
    pub provider: String,
    #[arg(long)]
    pub model_id: Option<String>,
    /// Required for remote providers.
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Environment variable holding a bearer token for remote providers.
    #[arg(long)]
    pub token_env: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, default_value = "min_kpp")]
    pub method: ScoreMethod,
    #[arg(long = "k", default_value_t = DEFAULT_K_PERCENT)]
    pub k_percent: f64,
}

impl MethodArgs {
    fn spec(&self) -> Result<ScoreSpec> {
        ScoreSpec::new(self.method, self.method.uses_k().then_some(self.k_percent))
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Tokenized reference corpus for dc_pdd.
    #[arg(long)]
    pub q_ref: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REF_SMOOTHING)]
    pub ref_smoothing: f64,
}

#[derive(Debug, Args)]
pub struct WatermarkArgs {
    /// Originals and candidate paraphrases of every document.
    #[arg(long)]
    pub families: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "spectra")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,
    #[arg(long, default_value = "dataset")]
    pub dataset_id: String,
    #[arg(long)]
    pub q_ref: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REF_SMOOTHING)]
    pub ref_smoothing: f64,
    /// Recorded in the manifest as given.
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Originals and watermarked texts, stats under the scoring model (or tokens).
    #[arg(long)]
    pub scoring: PathBuf,
    /// The same documents under the target model (or tokens).
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value = "file")]
    pub scoring_provider: String,
    #[arg(long, default_value = "file")]
    pub target_provider: String,
    #[arg(long, default_value = "scoring")]
    pub scoring_model_id: String,
    #[arg(long, default_value = "target")]
    pub target_model_id: String,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub token_env: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Seed of the watermarking run, recorded in the report.
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,
    #[arg(long, default_value = "dataset")]
    pub dataset_id: String,
    #[arg(long)]
    pub q_ref: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REF_SMOOTHING)]
    pub ref_smoothing: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    /// Reference corpus: `.txt` (one document per line) or JSONL with a `text` field.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 13)]
    pub ngram: usize,
    #[arg(long, default_value_t = 0.8)]
    pub overlap: f64,
    #[arg(long, default_value_t = 1 << 24)]
    pub bloom_bits: u64,
    #[arg(long, default_value_t = 10)]
    pub bloom_hashes: u32,
    /// Also split the kept candidates, releasing this fraction.
    #[arg(long)]
    pub release_fraction: Option<f64>,
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub vocab: usize,
    #[arg(long, default_value_t = 500)]
    pub docs: usize,
    #[arg(long, default_value_t = 256)]
    pub doc_length: usize,
    #[arg(long, default_value_t = 10)]
    pub paraphrases: usize,
    #[arg(long, default_value_t = 50)]
    pub distractor: usize,
    #[arg(long, default_value_t = 4)]
    pub epochs: u32,
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,
    #[arg(long, default_value = "spectra")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long = "k", default_value_t = DEFAULT_K_PERCENT)]
    pub k_percent: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// World tokens each pretrained model sees.
    #[arg(long, default_value_t = 1_000_000)]
    pub pretrain_tokens: usize,
    #[arg(long, default_value_t = 20)]
    pub synonym_classes: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the scored record files used by `watermark` and `verify`.
    #[arg(long)]
    pub export_records: bool,
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::InvalidInput.code() } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let jobs = cli.jobs.max(1);
    let result = match cli.command {
        Command::Score(a) => cmd_score(a, jobs),
        Command::Watermark(a) => cmd_watermark(a, jobs),
        Command::Verify(a) => cmd_verify(a, jobs),
        Command::Dedup(a) => cmd_dedup(a),
        Command::Simulate(a) => cmd_simulate(a, jobs),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitStatus::Success.code(),
        Err(e) => {
            let status = ExitStatus::of(&e);
            if let Error::DegenerateVariance { .. } = e {
                eprintln!("decision: no evidence ({e})");
            } else {
                eprintln!("error: {e}");
            }
            status.code()
        }
    }
}

enum Source {
    File,
    Synthetic(PathBuf),
    Remote(String),
}

fn parse_source(spec: &str) -> Result<Source> {
    if spec == "file" {
        return Ok(Source::File);
    }
    match spec.split_once(':') {
        Some(("synthetic", path)) if !path.is_empty() => Ok(Source::Synthetic(path.into())),
        Some(("remote", url)) if !url.is_empty() => Ok(Source::Remote(url.into())),
        _ => Err(Error::Argument(format!(
            "--provider {spec:?}: expected file, synthetic:PATH or remote:URL"
        ))),
    }
}

struct Remote<'a> {
    vocab_size: Option<usize>,
    token_env: Option<&'a str>,
    retries: u32,
    timeout_secs: u64,
}

/// Loads `input` as records (file provider) or as token ids scored by the
/// given provider. Returns the identity that produced the stats.
fn obtain_records(
    source: &str,
    model_id: Option<&str>,
    input: &Path,
    remote: &Remote<'_>,
    jobs: usize,
) -> Result<(ProviderIdentity, Vec<DocumentRecord>)> {
    match parse_source(source)? {
        Source::File => {
            let records = load_records(input)?;
            let vocab = records
                .iter()
                .flat_map(|r| r.token_stats.iter().map(|t| t.token_id as usize + 1))
                .max()
                .unwrap_or(1);
            let provider = FileProvider::from_records(records, model_id.unwrap_or("file"), vocab)?;
            let identity = provider.identity().clone();
            Ok((identity, provider.records().to_vec()))
        }
        Source::Synthetic(path) => {
            let lm = Arc::new(SyntheticLm::load(&path)?);
            let default_id = path.file_stem().map_or("synthetic".into(), |s| s.to_string_lossy().into_owned());
            let provider = SyntheticProvider::new(model_id.unwrap_or(&default_id), lm)?;
            let docs = load_tokenized(input)?;
            let records = collect_records(&provider, &docs, jobs)?;
            Ok((provider.identity().clone(), records))
        }
        Source::Remote(url) => {
            let model = model_id.ok_or_else(|| Error::Argument("remote providers need --model-id".into()))?;
            let vocab = remote
                .vocab_size
                .ok_or_else(|| Error::Argument("remote providers need --vocab-size".into()))?;
            let transport = HttpTransport::new(Duration::from_secs(remote.timeout_secs), remote.token_env);
            let policy = RetryPolicy {
                max_retries: remote.retries,
                ..RetryPolicy::default()
            };
            let provider = RemoteProvider::new(url, model, vocab, Box::new(transport), policy)?;
            let docs = load_tokenized(input)?;
            let records = collect_records(&provider, &docs, jobs)?;
            if provider.retries_total() > 0 {
                log::info!("remote provider needed {} retries", provider.retries_total());
            }
            Ok((provider.identity().clone(), records))
        }
    }
}

fn load_q_ref(path: Option<&Path>, spec: ScoreSpec, vocab: usize, smoothing: f64) -> Result<Option<RefDistribution>> {
    match (spec.method, path) {
        (ScoreMethod::DcPdd, None) => Err(Error::Argument("method dc_pdd requires --q-ref".into())),
        (ScoreMethod::DcPdd, Some(p)) => {
            let corpus = load_tokenized(p)?;
            build_q_ref(corpus.iter().map(|d| d.token_ids.as_slice()), vocab, smoothing).map(Some)
        }
        _ => Ok(None),
    }
}

fn cmd_score(a: ScoreArgs, jobs: usize) -> Result<()> {
    let spec = a.method.spec()?;
    // fail on a missing reference before touching any provider
    if spec.method == ScoreMethod::DcPdd && a.q_ref.is_none() {
        return Err(Error::Argument("method dc_pdd requires --q-ref".into()));
    }
    let remote = Remote {
        vocab_size: a.provider.vocab_size,
        token_env: a.provider.token_env.as_deref(),
        retries: a.provider.retries,
        timeout_secs: a.provider.timeout_secs,
    };
    let (identity, records) = obtain_records(&a.provider.provider, a.provider.model_id.as_deref(), &a.input, &remote, jobs)?;
    let vocab = a.provider.vocab_size.unwrap_or(identity.vocab_size);
    let q_ref = load_q_ref(a.q_ref.as_deref(), spec, vocab, a.ref_smoothing)?;
    let scored = records
        .iter()
        .map(|r| score_document(r, spec.method, spec.k_percent, q_ref.as_ref(), &identity.model_id))
        .collect::<Result<Vec<_>>>()?;
    save_scored(&scored, &a.output)?;
    println!("scored {} documents with {spec} under {}", scored.len(), identity.model_id);
    Ok(())
}

fn cmd_watermark(a: WatermarkArgs, jobs: usize) -> Result<()> {
    let spec = a.method.spec()?;
    if spec.method == ScoreMethod::DcPdd && a.q_ref.is_none() {
        return Err(Error::Argument("method dc_pdd requires --q-ref".into()));
    }
    let remote = Remote {
        vocab_size: a.provider.vocab_size,
        token_env: a.provider.token_env.as_deref(),
        retries: a.provider.retries,
        timeout_secs: a.provider.timeout_secs,
    };
    let (identity, records) =
        obtain_records(&a.provider.provider, a.provider.model_id.as_deref(), &a.families, &remote, jobs)?;
    let families = group_families(&records, a.m)?;
    let q_ref = load_q_ref(a.q_ref.as_deref(), spec, identity.vocab_size, a.ref_smoothing)?;
    let cfg = WatermarkConfig {
        dataset_id: a.dataset_id,
        score: spec,
        alpha: a.alpha,
        strategy: a.strategy,
        seed: a.seed,
        jobs,
    };
    let mut run = run_watermark(&families, &identity, &cfg, q_ref.as_ref())?;
    run.manifest.inputs.insert("families".into(), a.families.display().to_string());
    run.manifest.created_at = a.timestamp;
    run.save(&a.out_dir)?;
    println!(
        "{} selections written to {} (pi_plus = {:.4})",
        run.selections.len(),
        a.out_dir.display(),
        run.balance.pi_plus
    );
    Ok(())
}

fn cmd_verify(a: VerifyArgs, jobs: usize) -> Result<()> {
    let spec = a.method.spec()?;
    if spec.method == ScoreMethod::DcPdd && a.q_ref.is_none() {
        return Err(Error::Argument("method dc_pdd requires --q-ref".into()));
    }
    let remote = Remote {
        vocab_size: a.vocab_size,
        token_env: a.token_env.as_deref(),
        retries: a.retries,
        timeout_secs: a.timeout_secs,
    };
    let (s_id, s_records) = obtain_records(&a.scoring_provider, Some(&a.scoring_model_id), &a.scoring, &remote, jobs)?;
    let (t_id, t_records) = obtain_records(&a.target_provider, Some(&a.target_model_id), &a.target, &remote, jobs)?;
    let vocab = a.vocab_size.unwrap_or(s_id.vocab_size.max(t_id.vocab_size));
    let q_ref = load_q_ref(a.q_ref.as_deref(), spec, vocab, a.ref_smoothing)?;
    let cfg = VerifyConfig {
        dataset_id: a.dataset_id,
        score: spec,
        threshold: a.threshold,
        seed: a.seed,
        jobs,
    };
    let mut report = run_verify(
        RecordSet {
            identity: &s_id,
            records: &s_records,
        },
        RecordSet {
            identity: &t_id,
            records: &t_records,
        },
        &cfg,
        q_ref.as_ref(),
    )?;
    if let Some(m) = report.manifest.as_mut() {
        m.inputs.insert("scoring".into(), a.scoring.display().to_string());
        m.inputs.insert("target".into(), a.target.display().to_string());
        m.outputs.insert("report".into(), a.out.display().to_string());
        m.created_at = a.timestamp;
    }
    report.save(&a.out)?;
    print_decision(&report);
    Ok(())
}

/// Scientific notation for p, taken from log10(p) once p itself underflows.
pub fn format_p(p: f64, log10_p: f64) -> String {
    if p >= 1e-300 || !log10_p.is_finite() {
        return format!("{p:.6e}");
    }
    let exp = log10_p.floor();
    format!("{:.6}e{}", 10f64.powf(log10_p - exp), exp as i64)
}

fn print_decision(r: &VerificationReport) {
    println!("p = {}", format_p(r.test.p_value, r.log10_p));
    println!("log10(p) = {:.2}", r.log10_p);
    println!("decision: {}", r.decision());
}

#[derive(serde::Deserialize)]
struct TextLine {
    #[serde(alias = "doc_id")]
    id: Option<String>,
    text: String,
}

fn load_texts(path: &Path) -> Result<Vec<(String, String)>> {
    if path.extension().is_some_and(|e| e == "txt") {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return Ok(body
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (format!("line-{}", i + 1), l.to_string()))
            .collect());
    }
    let rows: Vec<TextLine> = read_jsonl(path)?;
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| (r.id.unwrap_or_else(|| format!("row-{}", i + 1)), r.text))
        .collect())
}

fn cmd_dedup(a: DedupArgs) -> Result<()> {
    let cfg = CorpusConfig {
        dedup_n: a.ngram,
        dedup_overlap: a.overlap,
        bloom_bits: a.bloom_bits,
        bloom_hashes: a.bloom_hashes,
        seed: a.seed,
        ..CorpusConfig::default()
    };
    let reference: Vec<String> = load_texts(&a.reference)?.into_iter().map(|(_, t)| t).collect();
    let candidates = load_texts(&a.candidates)?;
    let texts: Vec<&str> = candidates.iter().map(|(_, t)| t.as_str()).collect();
    let outcome = dedup_against(&reference, &texts, &cfg)?;
    let kept: Vec<&str> = outcome.kept.iter().map(|&i| candidates[i].0.as_str()).collect();
    let flagged: Vec<serde_json::Value> = outcome
        .flagged
        .iter()
        .map(|f| serde_json::json!({"id": candidates[f.index].0, "overlap": f.overlap}))
        .collect();
    let mut summary = serde_json::json!({
        "kept": kept,
        "flagged": flagged,
        "warnings": outcome.warnings,
        "config": cfg,
    });
    if let Some(fraction) = a.release_fraction {
        let (release, heldout) = split_heldout(kept.clone(), fraction, cfg.seed)?;
        println!("released {}, held out {}", release.len(), heldout.len());
        summary["release"] = serde_json::json!(release);
        summary["heldout"] = serde_json::json!(heldout);
    }
    write_json(&a.out, &summary)?;
    println!("kept {}, flagged {}", kept.len(), flagged.len());
    for w in &outcome.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, jobs: usize) -> Result<()> {
    let cfg = SimulationConfig {
        vocab_size: a.vocab,
        documents: a.docs,
        doc_length: a.doc_length,
        paraphrases: a.paraphrases,
        distractor_multiple: a.distractor,
        epochs: a.epochs,
        seed: a.seed,
        strategy: a.strategy,
        alpha: a.alpha,
        k_percent: a.k_percent,
        threshold: a.threshold,
        jobs,
        world: WorldConfig {
            pretrain_tokens: a.pretrain_tokens,
            synonym_classes: a.synonym_classes,
            ..WorldConfig::default()
        },
    };
    let mut out = run_simulation(&cfg)?;
    out.manifest.created_at = a.timestamp;
    out.save(&a.out_dir)?;
    if a.export_records {
        out.export_records(&a.out_dir)?;
    }
    for (name, r) in [("member", &out.member), ("non-member", &out.non_member)] {
        println!(
            "{name}: p = {}, log10(p) = {:.2}, decision: {}",
            format_p(r.test.p_value, r.log10_p),
            r.log10_p,
            r.decision()
        );
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let r = VerificationReport::load(&a.report)?;
    print!("{}", render_report(&r));
    Ok(())
}

/// Human-readable report summary.
pub fn render_report(r: &VerificationReport) -> String {
    let mut s = String::new();
    let line = |s: &mut String, k: &str, v: String| s.push_str(&format!("{k:<22}{v}\n"));
    line(&mut s, "decision", r.decision().to_string());
    line(&mut s, "p", format_p(r.test.p_value, r.log10_p));
    line(&mut s, "log10(p)", format!("{:.2}", r.log10_p));
    line(&mut s, "threshold", format!("{:e}", r.threshold));
    line(&mut s, "t", format!("{:.6}", r.test.t_statistic));
    line(&mut s, "df", r.test.degrees_of_freedom.to_string());
    line(&mut s, "n", r.test.n.to_string());
    line(&mut s, "mean difference", format!("{:.6}", r.test.mean_difference));
    line(&mut s, "mean ratio (target)", format!("{:.6}", r.mean_ratio_target));
    line(&mut s, "mean ratio (scoring)", format!("{:.6}", r.mean_ratio_scoring));
    line(&mut s, "near-zero originals", r.near_zero_originals.to_string());
    line(&mut s, "scoring model", r.scoring_model_id.clone());
    line(&mut s, "target model", r.target_model_id.clone());
    line(&mut s, "score", r.score_method.to_string());
    line(&mut s, "seed", r.seed.to_string());
    if let Some(m) = &r.manifest {
        for (name, v) in &m.seeds {
            line(&mut s, &format!("seed[{name}]"), v.to_string());
        }
    }
    s
}

