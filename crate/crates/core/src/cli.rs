//! `chainbeam` command line.
//!
//! Every command reads an optional JSON config (`--config`) whose keys are the
//! long flag names in snake_case; flags given on the command line win.
//! Exit codes: 0 success, 1 data or validation failure, 2 scorer unavailable,
//! 3 usage error.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{rerank_chains, retrieve, RankedChain, SearchConfig, SearchError, SearchMode};
use crate::dataset::{
    ingest_distractor, read_canonical, write_canonical, write_run_manifest, DatasetError,
    ManifestEntry, RunConfig, RunManifest, SourceFormat,
};
use crate::eval::{
    additional_hop_probe, aggregate_report, chain_top2_em, probe_stats, render_sweep_table,
    MetricError, MetricsReport,
};
use crate::scoring::{ScoreError, Scorer, ScorerRegistry};
use crate::supervision::{emit_training_batch, SupervisionError, TrainingConfig};
use crate::types::{validate_example, MultiHopExample, PassageId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_SCORER: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    ScorerUnavailable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::ScorerUnavailable(_) => EXIT_SCORER,
        }
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::ScorerUnavailable(_) => CliError::ScorerUnavailable(e.to_string()),
            ScoreError::UnknownScorer(_) | ScoreError::InvalidSpec { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Score(s) => s.into(),
            SearchError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SupervisionError> for CliError {
    fn from(e: SupervisionError) -> Self {
        match e {
            SupervisionError::Search(s) => s.into(),
            SupervisionError::Score(s) => s.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Search(s) => s.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "chainbeam",
    version,
    about = "Beam search over passage chains for multi-hop retrieval"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a hotpot/musique/twowiki style dump into canonical JSONL.
    Ingest(IngestArgs),
    /// Retrieve a chain for every question and write a run manifest.
    Retrieve(CommonArgs),
    /// Score a run manifest against gold passages.
    Evaluate(EvaluateArgs),
    /// Rerank externally retrieved chains.
    Rerank(RerankArgs),
    /// Emit labeled training sequences and losses.
    TrainSignal(TrainArgs),
    /// Score one hop past the gold hop count.
    Probe(CommonArgs),
    /// Retrieve and evaluate across several beam sizes.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input dataset: canonical JSONL, or the raw dump for `ingest`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `lexical`, `lookup:<path>`, `remote:<url>` or `constant:<value>`.
    #[arg(long)]
    pub scorer: Option<String>,
    /// Hypotheses kept per hop (default 1).
    #[arg(long)]
    pub beam_size: Option<usize>,
    /// `fixed:<k>`, `threshold:<tau>` or `auto`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Hops taken before the threshold applies (default 1).
    #[arg(long)]
    pub min_hops: Option<usize>,
    /// Hard cap on hops in threshold mode (default 8).
    #[arg(long)]
    pub max_hops: Option<usize>,
    /// Seed for prefix shuffling (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Abort on the first invalid record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads for per-question processing.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Remote scorer request timeout.
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Remote scorer retries after the first failed attempt.
    #[arg(long)]
    pub retries: Option<u32>,
    /// Store wall-clock duration in the manifest (breaks byte-identical reruns).
    #[arg(long)]
    pub record_timing: bool,
    /// Do not print result tables to stdout.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// hotpot, musique or twowiki.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Run manifest to score; defaults to `<out>/manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerankArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// JSONL of `{"qid": ..., "chains": [[id, ...], ...]}`.
    #[arg(long)]
    pub chains: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Label against the gold set instead of the ordered gold chain.
    #[arg(long)]
    pub unordered: bool,
    /// Shuffle prefixes with the run seed.
    #[arg(long)]
    pub shuffle: bool,
    /// Force the gold prefix into every training beam.
    #[arg(long)]
    pub gold_forcing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated beam sizes.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub beam_sizes: Vec<usize>,
}

/// Config file contents; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub scorer: Option<String>,
    pub beam_size: Option<usize>,
    pub mode: Option<String>,
    pub min_hops: Option<usize>,
    pub max_hops: Option<usize>,
    pub seed: Option<u64>,
    pub strict: Option<bool>,
    pub workers: Option<usize>,
    pub timeout_secs: Option<f64>,
    pub retries: Option<u32>,
    pub record_timing: Option<bool>,
    pub format: Option<String>,
    pub manifest: Option<PathBuf>,
    pub chains: Option<PathBuf>,
    pub unordered: Option<bool>,
    pub shuffle: Option<bool>,
    pub gold_forcing: Option<bool>,
    pub beam_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeSpec {
    Auto,
    Explicit(SearchMode),
}

impl std::str::FromStr for ModeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            Ok(ModeSpec::Auto)
        } else {
            s.parse().map(ModeSpec::Explicit)
        }
    }
}

/// Flags merged over the config file over defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub scorer: String,
    pub beam_size: usize,
    pub mode: ModeSpec,
    pub min_hops: usize,
    pub max_hops: usize,
    pub seed: u64,
    pub strict: bool,
    pub workers: usize,
    pub timeout: Duration,
    pub retries: u32,
    pub record_timing: bool,
}

impl Settings {
    fn resolve(args: &CommonArgs, file: &FileConfig) -> Result<Self, CliError> {
        let mode_text = args
            .mode
            .clone()
            .or_else(|| file.mode.clone())
            .unwrap_or_else(|| "auto".to_string());
        let mode = mode_text.parse().map_err(CliError::Usage)?;
        let timeout_secs = args.timeout_secs.or(file.timeout_secs).unwrap_or(30.0);
        if !(timeout_secs.is_finite() && timeout_secs > 0.0) {
            return Err(CliError::Usage(format!("bad timeout {timeout_secs}")));
        }
        let workers = args
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Ok(Self {
            dataset: args.dataset.clone().or_else(|| file.dataset.clone()),
            out: args
                .out
                .clone()
                .or_else(|| file.out.clone())
                .ok_or_else(|| CliError::Usage("--out is required".into()))?,
            scorer: args
                .scorer
                .clone()
                .or_else(|| file.scorer.clone())
                .unwrap_or_else(|| "lexical".to_string()),
            beam_size: args.beam_size.or(file.beam_size).unwrap_or(1),
            mode,
            min_hops: args.min_hops.or(file.min_hops).unwrap_or(1),
            max_hops: args.max_hops.or(file.max_hops).unwrap_or(8),
            seed: args.seed.or(file.seed).unwrap_or(0),
            strict: args.strict || file.strict.unwrap_or(false),
            workers: workers.max(1),
            timeout: Duration::from_secs_f64(timeout_secs),
            retries: args.retries.or(file.retries).unwrap_or(2),
            record_timing: args.record_timing || file.record_timing.unwrap_or(false),
        })
    }

    fn dataset(&self) -> Result<&Path, CliError> {
        self.dataset
            .as_deref()
            .ok_or_else(|| CliError::Usage("--dataset is required".into()))
    }

    fn search_config(
        &self,
        beam_size: usize,
        scorer: &dyn Scorer,
    ) -> Result<SearchConfig, CliError> {
        let mode = match self.mode {
            ModeSpec::Auto => SearchMode::Threshold {
                tau: scorer.profile().default_threshold(),
            },
            ModeSpec::Explicit(m) => m,
        };
        let cfg = SearchConfig {
            beam_size,
            mode,
            min_hops: self.min_hops,
            max_hops: self.max_hops,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn build_scorer(&self) -> Result<Arc<dyn Scorer>, CliError> {
        let mut registry = ScorerRegistry::with_builtins();
        registry.options.timeout = self.timeout;
        registry.options.retries = self.retries;
        Ok(registry.build(&self.scorer)?)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
    }

    fn prepare_out(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Data(format!("{}: {e}", self.out.display())))
    }
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Data(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Data(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

/// Reads canonical examples and rejects the run if any fails validation.
fn load_examples(settings: &Settings) -> Result<Vec<MultiHopExample>, CliError> {
    let examples = read_canonical(settings.dataset()?)?;
    let mut problems = Vec::new();
    for ex in &examples {
        let v = validate_example(ex);
        if !v.is_empty() {
            problems.push(format!("{}: {}", ex.question.id, v.join("; ")));
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Data(format!(
            "{} invalid example(s): {}",
            problems.len(),
            problems.join(" | ")
        )));
    }
    if examples.is_empty() {
        return Err(CliError::Data("dataset has no examples".into()));
    }
    Ok(examples)
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Rerank(a) => cmd_rerank(a),
        Command::TrainSignal(a) => cmd_train_signal(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn cmd_ingest(args: &IngestArgs) -> Result<(), CliError> {
    let file = load_file_config(args.common.config.as_deref())?;
    let settings = Settings::resolve(&args.common, &file)?;
    let format: SourceFormat = args
        .format
        .clone()
        .or(file.format)
        .ok_or_else(|| CliError::Usage("--format is required".into()))?
        .parse()
        .map_err(CliError::Usage)?;
    let outcome = ingest_distractor(settings.dataset()?, format, settings.strict)?;
    settings.prepare_out()?;
    write_canonical(&outcome.examples, &settings.out.join("canonical.jsonl"))?;
    let skipped: Vec<_> = outcome
        .skipped
        .iter()
        .map(|(index, qid, violations)| {
            serde_json::json!({"index": index, "qid": qid, "violations": violations})
        })
        .collect();
    write_json(
        &settings.out.join("ingest_report.json"),
        &serde_json::json!({"ingested": outcome.examples.len(), "skipped": skipped}),
    )?;
    eprintln!(
        "ingested {} example(s), skipped {}",
        outcome.examples.len(),
        outcome.skipped.len()
    );
    Ok(())
}

fn run_retrieval(
    examples: &[MultiHopExample],
    scorer: &dyn Scorer,
    config: &SearchConfig,
    pool: &rayon::ThreadPool,
) -> Result<Vec<ManifestEntry>, CliError> {
    pool.install(|| {
        examples
            .par_iter()
            .map(|ex| {
                retrieve(ex, scorer, config)
                    .map(|result| ManifestEntry {
                        qid: ex.question.id.clone(),
                        result,
                    })
                    .map_err(|e| match CliError::from(e) {
                        CliError::Data(m) => CliError::Data(format!("{}: {m}", ex.question.id)),
                        other => other,
                    })
            })
            .collect()
    })
}

fn metrics_for(
    entries: &[ManifestEntry],
    examples: &[MultiHopExample],
) -> Result<MetricsReport, CliError> {
    Ok(aggregate_report(
        entries
            .iter()
            .zip(examples)
            .map(|(e, ex)| (&e.result.chain.prefix[..], ex)),
    )?)
}

fn cmd_retrieve(args: &CommonArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file = load_file_config(args.config.as_deref())?;
    let settings = Settings::resolve(args, &file)?;
    let scorer = settings.build_scorer()?;
    let config = settings.search_config(settings.beam_size, scorer.as_ref())?;
    let examples = load_examples(&settings)?;
    let pool = settings.pool()?;

    let entries = run_retrieval(&examples, scorer.as_ref(), &config, &pool)?;
    let metrics = metrics_for(&entries, &examples)?;
    let mut manifest = RunManifest::new(
        RunConfig {
            dataset: settings.dataset()?.display().to_string(),
            scorer: scorer.id(),
            search: config,
            seed: settings.seed,
        },
        entries,
    );
    manifest.metrics = Some(metrics);
    if settings.record_timing {
        manifest.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    }
    settings.prepare_out()?;
    write_run_manifest(
        &manifest,
        examples.iter().map(|e| e.question.id.as_str()),
        &settings.out.join("manifest.json"),
    )?;
    log::info!(
        "retrieved {} question(s) in {:?}",
        examples.len(),
        started.elapsed()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let file = load_file_config(args.common.config.as_deref())?;
    let settings = Settings::resolve(&args.common, &file)?;
    let manifest_path = args
        .manifest
        .clone()
        .or(file.manifest)
        .unwrap_or_else(|| settings.out.join("manifest.json"));
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    let examples = load_examples(&settings)?;
    manifest.check_complete(examples.iter().map(|e| e.question.id.as_str()))?;

    let by_qid = manifest.results_by_qid();
    let report = aggregate_report(
        examples
            .iter()
            .map(|ex| (&by_qid[ex.question.id.as_str()].chain.prefix[..], ex)),
    )?;
    settings.prepare_out()?;
    write_json(&settings.out.join("report.json"), &report)?;
    let table = report.render_table();
    write_text(&settings.out.join("report.txt"), &table)?;
    if !args.common.quiet {
        print!("{table}");
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ChainList {
    qid: String,
    chains: Vec<Vec<PassageId>>,
}

#[derive(Debug, Serialize)]
struct RerankRecord<'a> {
    qid: &'a str,
    ranked: Vec<RankedChain>,
    top2_em: Option<u8>,
}

fn cmd_rerank(args: &RerankArgs) -> Result<(), CliError> {
    let file = load_file_config(args.common.config.as_deref())?;
    let settings = Settings::resolve(&args.common, &file)?;
    let chains_path = args
        .chains
        .clone()
        .or(file.chains)
        .ok_or_else(|| CliError::Usage("--chains is required".into()))?;
    let scorer = settings.build_scorer()?;
    let examples = load_examples(&settings)?;
    let by_qid: HashMap<&str, &MultiHopExample> = examples
        .iter()
        .map(|e| (e.question.id.as_str(), e))
        .collect();

    let text = fs::read_to_string(&chains_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", chains_path.display())))?;
    let mut lists = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let list: ChainList = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{} line {}: {e}", chains_path.display(), i + 1))
        })?;
        if !by_qid.contains_key(list.qid.as_str()) {
            return Err(CliError::Data(format!(
                "chains for unknown question {}",
                list.qid
            )));
        }
        lists.push(list);
    }

    let pool = settings.pool()?;
    let ranked: Vec<Vec<RankedChain>> = pool.install(|| {
        lists
            .par_iter()
            .map(|list| {
                let ex = by_qid[list.qid.as_str()];
                rerank_chains(&ex.question, &ex.candidates, &list.chains, scorer.as_ref())
            })
            .collect::<Result<_, _>>()
    })?;

    settings.prepare_out()?;
    let mut out = String::new();
    let mut hits = Vec::new();
    for (list, ranked) in lists.iter().zip(ranked) {
        let gold = &by_qid[list.qid.as_str()].gold_set;
        let top2 = chain_top2_em(&ranked, gold).ok();
        hits.extend(top2);
        let record = RerankRecord {
            qid: &list.qid,
            ranked,
            top2_em: top2,
        };
        let v = serde_json::to_value(&record).map_err(|e| CliError::Data(e.to_string()))?;
        out.push_str(&v.to_string());
        out.push('\n');
    }
    write_text(&settings.out.join("reranked.jsonl"), &out)?;
    let mean = if hits.is_empty() {
        None
    } else {
        Some(hits.iter().map(|&h| f64::from(h)).sum::<f64>() / hits.len() as f64)
    };
    write_json(
        &settings.out.join("rerank_report.json"),
        &serde_json::json!({"n": lists.len(), "evaluated": hits.len(), "top2_em": mean}),
    )?;
    Ok(())
}

fn cmd_train_signal(args: &TrainArgs) -> Result<(), CliError> {
    let file = load_file_config(args.common.config.as_deref())?;
    let settings = Settings::resolve(&args.common, &file)?;
    let scorer = settings.build_scorer()?;
    let examples = load_examples(&settings)?;
    let shuffle = args.shuffle || file.shuffle.unwrap_or(false);
    let config = TrainingConfig {
        beam_size: settings.beam_size,
        ordered: !(args.unordered || file.unordered.unwrap_or(false)),
        shuffle_seed: shuffle.then_some(settings.seed),
        gold_forcing: args.gold_forcing || file.gold_forcing.unwrap_or(false),
    };
    let pool = settings.pool()?;
    let batches = pool.install(|| {
        examples
            .par_iter()
            .map(|ex| emit_training_batch(ex, scorer.as_ref(), &config))
            .collect::<Result<Vec<_>, _>>()
    })?;

    settings.prepare_out()?;
    let mut jsonl = Vec::new();
    for b in &batches {
        b.write_jsonl(&mut jsonl)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    let path = settings.out.join("supervision.jsonl");
    fs::write(&path, jsonl).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let per_question: Vec<_> = batches
        .iter()
        .map(|b| {
            serde_json::json!({
                "qid": b.qid,
                "per_hop_loss": b.per_hop_loss,
                "total_loss": b.total_loss,
                "negatives_per_hop": b.negatives_per_hop(),
            })
        })
        .collect();
    write_json(
        &settings.out.join("losses.json"),
        &serde_json::json!({
            "config": config,
            "scorer": scorer.id(),
            "per_question": per_question,
            "total_loss": batches.iter().map(|b| b.total_loss).sum::<f64>(),
        }),
    )?;
    Ok(())
}

fn cmd_probe(args: &CommonArgs) -> Result<(), CliError> {
    let file = load_file_config(args.config.as_deref())?;
    let settings = Settings::resolve(args, &file)?;
    let scorer = settings.build_scorer()?;
    let examples = load_examples(&settings)?;
    let pool = settings.pool()?;
    let outcomes: Vec<Result<f64, MetricError>> = pool.install(|| {
        examples
            .par_iter()
            .map(|ex| additional_hop_probe(ex, scorer.as_ref(), settings.beam_size, ex.hops()))
            .collect()
    });

    let mut values = Vec::new();
    let mut per_question = Vec::new();
    for (ex, outcome) in examples.iter().zip(outcomes) {
        match outcome {
            Ok(score) => {
                values.push((ex.hops(), score));
                per_question.push(
                    serde_json::json!({"qid": ex.question.id, "hops": ex.hops(), "score": score}),
                );
            }
            Err(MetricError::Search(SearchError::NoLegalExpansion)) => {
                log::warn!("{}: no passage left for an additional hop", ex.question.id);
                per_question.push(
                    serde_json::json!({"qid": ex.question.id, "hops": ex.hops(), "score": null}),
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    settings.prepare_out()?;
    let stats = probe_stats(&values);
    write_json(
        &settings.out.join("probe.json"),
        &serde_json::json!({
            "beam_size": settings.beam_size,
            "scorer": scorer.id(),
            "per_question": per_question,
            "probe": stats,
        }),
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    beam_size: usize,
    report: MetricsReport,
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let file = load_file_config(args.common.config.as_deref())?;
    let settings = Settings::resolve(&args.common, &file)?;
    let beam_sizes = if args.beam_sizes.is_empty() {
        file.beam_sizes.clone().unwrap_or_default()
    } else {
        args.beam_sizes.clone()
    };
    if beam_sizes.is_empty() {
        return Err(CliError::Usage("--beam-sizes is required".into()));
    }
    let scorer = settings.build_scorer()?;
    let examples = load_examples(&settings)?;
    let pool = settings.pool()?;
    settings.prepare_out()?;

    let mut rows = Vec::with_capacity(beam_sizes.len());
    for &b in &beam_sizes {
        let config = settings.search_config(b, scorer.as_ref())?;
        let entries = run_retrieval(&examples, scorer.as_ref(), &config, &pool)?;
        let metrics = metrics_for(&entries, &examples)?;
        let mut manifest = RunManifest::new(
            RunConfig {
                dataset: settings.dataset()?.display().to_string(),
                scorer: scorer.id(),
                search: config,
                seed: settings.seed,
            },
            entries,
        );
        manifest.metrics = Some(metrics.clone());
        write_run_manifest(
            &manifest,
            examples.iter().map(|e| e.question.id.as_str()),
            &settings.out.join(format!("manifest_b{b}.json")),
        )?;
        rows.push((b, metrics));
    }

    let json_rows: Vec<SweepRow> = rows
        .iter()
        .map(|(b, r)| SweepRow {
            beam_size: *b,
            report: r.clone(),
        })
        .collect();
    let by_beam: BTreeMap<String, &MetricsReport> =
        rows.iter().map(|(b, r)| (b.to_string(), r)).collect();
    write_json(
        &settings.out.join("sweep.json"),
        &serde_json::json!({"rows": json_rows, "by_beam_size": by_beam}),
    )?;
    let table = render_sweep_table(&rows);
    write_text(&settings.out.join("sweep.txt"), &table)?;
    if !args.common.quiet {
        print!("{table}");
    }
    Ok(())
}
