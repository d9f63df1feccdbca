//! `emonews` command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use emonews_core::backends::{BackendDescriptor, BackendOptions, BackendRole, BackendSet};
use emonews_core::evalkit::{boxplot_data, compare_systems, load_responses, load_session_summaries, render_table};
use emonews_core::index::{ingest_corpus, Corpus, HashEmbedder, Index};
use emonews_core::pipeline::{Pipeline, PipelineConfig, StyleTable, SystemMode};
use emonews_core::sentiment::Lexicon;
use emonews_core::Report;

use crate::config::{ServiceConfig, ENV_CONFIG_PATH};
use crate::service::SdsService;
use crate::simulate::{run_script, Script};
use crate::store::{is_data_dir, load_study};

#[derive(Debug, Parser)]
#[command(name = "emonews", version, about = "Emotion-aware news dialogue system")]
pub struct Cli {
    /// Log filter, e.g. `info` or `emonews_core=debug`.
    #[arg(long, global = true, default_value = "info", env = "RUST_LOG")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a raw JSON-Lines news dump and write the corpus.
    Ingest(IngestArgs),
    /// Embed corpus titles and write an index file.
    Index(IndexArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Run scripted dialogues through the pipeline with mock backends.
    Simulate(SimulateArgs),
    /// Compare two systems and write the statistics report.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "en")]
    pub lang: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    Hash,
    Remote,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "hash")]
    pub embedder: EmbedderKind,
    /// Base URL of the remote encoder.
    #[arg(long, required_if_eq("embedder", "remote"))]
    pub endpoint: Option<String>,
    #[arg(long, default_value = "remote")]
    pub embedder_id: String,
    #[arg(long, default_value_t = emonews_core::index::HASH_DIM)]
    pub dim: usize,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    #[arg(long, env = "EMONEWS_EMBED_TOKEN")]
    pub token: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSON config file; defaults to $EMONEWS_CONFIG.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<SystemMode>,
    #[arg(long)]
    pub listen: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    Baseline,
    Emotional,
    Both,
}

impl SimMode {
    fn modes(self) -> Vec<SystemMode> {
        match self {
            SimMode::Baseline => vec![SystemMode::Baseline],
            SimMode::Emotional => vec![SystemMode::Emotional],
            SimMode::Both => vec![SystemMode::Baseline, SystemMode::Emotional],
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: SimMode,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Hash-embedder index; built in memory when absent.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Output directory: `<mode>.jsonl` plus `<mode>/<dialogue>/<n>.wav`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub retrieval_k: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference system: a data directory, or `responses.jsonl,sessions.jsonl`.
    #[arg(long)]
    pub system_a: String,
    #[arg(long)]
    pub system_b: String,
    /// Report JSON; the table and boxplot data go next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CliError(pub String);

fn err(e: impl std::fmt::Display) -> CliError {
    CliError(e.to_string())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(err)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(err)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

pub fn ingest(args: &IngestArgs) -> Result<(), CliError> {
    let (corpus, summary) = ingest_corpus(&args.input, &args.lang).map_err(err)?;
    corpus.save(&args.out).map_err(err)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(err)?);
    Ok(())
}

pub fn index(args: &IndexArgs) -> Result<(), CliError> {
    let corpus = Corpus::load(&args.corpus).map_err(err)?;
    let index = match args.embedder {
        EmbedderKind::Hash => Index::build(&corpus, &HashEmbedder).map_err(err)?,
        EmbedderKind::Remote => {
            let mut d = BackendDescriptor::url(BackendRole::Embed, args.endpoint.as_deref().unwrap_or_default());
            d.timeout_ms = args.timeout_ms;
            d.bearer_token = args.token.clone();
            let opts = BackendOptions {
                remote_embedder_id: args.embedder_id.clone(),
                remote_embedder_dim: args.dim,
                ..BackendOptions::default()
            };
            let set = BackendSet::from_descriptors(&[d], &opts).map_err(err)?;
            Index::build(&corpus, set.embedder.as_ref()).map_err(err)?
        }
    };
    index.save(&args.out).map_err(err)?;
    println!("indexed {} articles ({}, dim {})", index.len(), index.embedder_id(), index.dim());
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let path = args.config.clone().or_else(|| std::env::var_os(ENV_CONFIG_PATH).map(PathBuf::from));
    let mut config = ServiceConfig::load(path.as_deref(), std::env::vars()).map_err(err)?;
    if let Some(m) = args.mode {
        config.mode = m;
    }
    if let Some(l) = &args.listen {
        config.listen = l.clone();
    }
    // Blocking HTTP clients must be created before the async runtime starts.
    let pipeline = config.build_pipeline().map_err(err)?;
    let report_root = config.report_root.clone().or_else(|| config.data_dir.parent().map(Path::to_path_buf));
    let service = SdsService::open(pipeline, &config.data_dir, config.blind_emotion)
        .map_err(err)?
        .with_report_root(report_root);
    let app = crate::http::router(Arc::new(service), config.auth_token.clone());

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(err)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.listen).await.map_err(err)?;
        tracing::info!(listen = %config.listen, mode = %config.mode, blind = config.blind_emotion, "serving");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                tokio::signal::ctrl_c().await.ok();
            })
            .await
            .map_err(err)
    })
}

/// Mock-backed pipeline over `corpus` for `mode`.
pub fn mock_pipeline(mode: SystemMode, corpus: &Corpus, index: Option<&Path>, k: usize) -> Result<Pipeline, CliError> {
    let backends = BackendSet::mocks();
    let index = match index {
        Some(p) => Index::load_for(p, corpus, backends.embedder.as_ref()).map_err(err)?,
        None => Index::build(corpus, backends.embedder.as_ref()).map_err(err)?,
    };
    let config = PipelineConfig { retrieval_k: k, ..PipelineConfig::default() };
    Pipeline::new(mode, config, Arc::new(index), backends, Arc::new(Lexicon::builtin()), StyleTable::default()).map_err(err)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let script = Script::load(&args.script).map_err(CliError)?;
    let corpus = Corpus::load(&args.corpus).map_err(err)?;
    fs::create_dir_all(&args.out).map_err(err)?;
    for mode in args.mode.modes() {
        let pipeline = mock_pipeline(mode, &corpus, args.index.as_deref(), args.retrieval_k)?;
        let mut records = run_script(&pipeline, &script);
        let mut lines = String::new();
        let mut failures = 0;
        for rec in &mut records {
            for (turn, audio) in rec.turns.iter_mut().zip(&rec.audio) {
                let rel = format!("{mode}/{}/{}.wav", rec.dialogue_id, turn.index);
                let path = args.out.join(&rel);
                fs::create_dir_all(path.parent().expect("has parent")).map_err(err)?;
                fs::write(&path, audio).map_err(err)?;
                turn.audio_ref = Some(rel);
            }
            failures += rec.failures.len();
            lines.push_str(&serde_json::to_string(rec).map_err(err)?);
            lines.push('\n');
        }
        let out = args.out.join(format!("{mode}.jsonl"));
        fs::write(&out, lines).map_err(err)?;
        let turns: usize = records.iter().map(|r| r.turns.len()).sum();
        println!("{mode}: {} dialogues, {turns} turns, {failures} failed turns -> {}", records.len(), out.display());
    }
    Ok(())
}

/// Reads one side of an evaluation.
pub fn load_system(
    source: &str,
) -> Result<(Vec<emonews_core::evalkit::QuestionnaireResponse>, Vec<emonews_core::evalkit::SessionSummary>), CliError> {
    let dir = Path::new(source);
    if dir.is_dir() {
        if !is_data_dir(dir) {
            return Err(CliError(format!("{source} is not a data directory")));
        }
        return load_study(dir).map_err(err);
    }
    match source.split_once(',') {
        Some((responses, sessions)) => Ok((
            load_responses(Path::new(responses)).map_err(err)?,
            load_session_summaries(Path::new(sessions)).map_err(err)?,
        )),
        None => Err(CliError(format!("{source}: expected a data directory or responses.jsonl,sessions.jsonl"))),
    }
}

pub fn evaluate_report(a: &str, b: &str) -> Result<Report, CliError> {
    let (ra, sa) = load_system(a)?;
    let (rb, sb) = load_system(b)?;
    compare_systems(&ra, &rb, &sa, &sb).map_err(err)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let report = evaluate_report(&args.system_a, &args.system_b)?;
    write_json(&args.out, &report)?;
    write_json(&args.out.with_extension("boxplot.json"), &boxplot_data(&report))?;
    let table = render_table(&report);
    fs::write(args.out.with_extension("txt"), &table).map_err(err)?;
    print!("{table}");
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

pub fn init_logging(filter: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(filter).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    init_logging(&cli.log);
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Index(a) => index(a),
        Command::Serve(a) => serve(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

