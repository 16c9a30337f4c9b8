//! The `exact` command line: build per-user indexes from preference pairs,
//! evaluate and run personalized inference, and audit the selection and
//! retrieval machinery on synthetic data.
//!
//! Exit codes: 0 success, 1 a checked bound was violated, 2 bad input,
//! 3 backend failure. Errors are printed to stderr as one JSON object.

pub mod config;

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use exact_core::attribute::{load_default_library, read_pairs, write_pairs, AttributeLibrary, PreferencePair};
use exact_core::backend::BackendError;
use exact_core::driftsim::{self, ModelSpec, SimConfig, SimReport};
use exact_core::fixture::{self, SynthConfig};
use exact_core::inference::{self, EchoGenerator, EvalMode, Generator, InferenceError};
use exact_core::remote::{RemoteEmbedder, RemoteGenerator, RemoteScorer, SCORED_REGION};
use exact_core::retrieval::{self, Embedder, EmbedderKind, HashingEmbedder, RetrievalError};
use exact_core::scoring::{Interaction, ScoreCache, Scorer, SyntheticOracle};
use exact_core::selection::{self, SelectionError};

pub use config::{BackendKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "exact", version, about = "Attribute-guided decoding-time personalization")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// Seed for the synthetic oracle and the train/test split.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Attribute library JSON; the built-in 42-attribute library otherwise.
    #[arg(long, global = true)]
    pub library: Option<PathBuf>,
    /// Where to write the JSON report (stdout otherwise).
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic preference pairs as JSON Lines.
    Synth(SynthArgs),
    /// Split pairs per user into train and test files.
    Split(SplitArgs),
    /// Build one index file per user.
    Index(IndexArgs),
    /// Pairwise accuracy of an index on held-out pairs.
    Eval(EvalArgs),
    /// Personalized generation for one prompt.
    Infer(InferArgs),
    /// Pooling versus retrieval Monte Carlo study.
    Simulate(SimulateArgs),
    /// Estimate the submodularity ratio of the set objective.
    Gamma(LatticeArgs),
    /// Compare greedy with exhaustive search on the set objective.
    AuditGreedy(LatticeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    pub users: usize,
    #[arg(long, default_value_t = 20)]
    pub pairs_per_user: usize,
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub duplicate_rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Directory receiving `<user>.index.jsonl` files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Attribute budget k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Always select exactly k attributes, even with non-positive gains.
    #[arg(long)]
    pub no_nonneg_filter: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Retrieval)]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Retrieval,
    Global,
    Base,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Retrieval => EvalMode::Retrieval,
            ModeArg::Global => EvalMode::Global,
            ModeArg::Base => EvalMode::Base,
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub prompt: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Draws per topic.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Sweep draws per topic, e.g. `n_min=1..20`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Per-cell CSV rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Only the first K' library attributes are used (K' ≤ 12).
    #[arg(long, default_value_t = 8)]
    pub library_size: usize,
    #[arg(long)]
    pub k: Option<usize>,
    /// Pairwise interaction strength of the synthetic oracle.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    pub background: f64,
}

/// Maps an error chain to an exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<BackendError>().is_some() {
            return EXIT_BACKEND;
        }
        let backend = match cause.downcast_ref::<SelectionError>() {
            Some(SelectionError::Backend(_)) => true,
            Some(SelectionError::Retrieval(RetrievalError::Backend(_))) => true,
            _ => false,
        } || matches!(cause.downcast_ref::<RetrievalError>(), Some(RetrievalError::Backend(_)))
            || matches!(
                cause.downcast_ref::<InferenceError>(),
                Some(InferenceError::Backend(_)) | Some(InferenceError::Retrieval(RetrievalError::Backend(_)))
            );
        if backend {
            return EXIT_BACKEND;
        }
    }
    EXIT_INPUT
}

pub fn error_json(err: &anyhow::Error) -> String {
    let kind = if exit_code(err) == EXIT_BACKEND { "backend" } else { "input" };
    json!({ "error": kind, "message": format!("{err:#}") }).to_string()
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

fn merged_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(b) = common.backend {
        cfg.backend = b;
    }
    if let Some(s) = common.seed {
        cfg.oracle.seed = s;
        cfg.split_seed = s;
    }
    if common.jobs.is_some() {
        cfg.jobs = common.jobs;
    }
    if common.library.is_some() {
        cfg.paths.library = common.library.clone();
    }
    if common.report.is_some() {
        cfg.paths.reports = common.report.clone();
    }
    Ok(cfg)
}

pub fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = merged_config(&cli.common)?;
    match &cli.command {
        Command::Synth(a) => {
            if let Some(t) = a.topics {
                cfg.oracle.topics = t;
            }
        }
        Command::Split(a) => {
            override_path(&mut cfg.paths.pairs, &a.pairs);
            if let Some(r) = a.ratio {
                cfg.split_ratio = r;
            }
        }
        Command::Index(a) => {
            override_path(&mut cfg.paths.pairs, &a.pairs);
            override_path(&mut cfg.paths.index, &a.out_dir);
            if let Some(k) = a.k {
                cfg.selection.budget = k;
            }
            if a.no_nonneg_filter {
                cfg.selection.nonneg_filter = false;
            }
        }
        Command::Eval(a) => {
            override_path(&mut cfg.paths.pairs, &a.pairs);
            override_path(&mut cfg.paths.index, &a.index);
        }
        Command::Infer(a) => override_path(&mut cfg.paths.index, &a.index),
        Command::Gamma(a) | Command::AuditGreedy(a) => {
            override_path(&mut cfg.paths.pairs, &a.pairs);
            if let Some(k) = a.k {
                cfg.selection.budget = k;
            }
            if let Some(rho) = a.rho {
                cfg.oracle.interaction = Some(Interaction { rho, background: a.background });
            }
        }
        Command::Simulate(_) => {}
    }
    cfg.validate()?;
    if let Some(j) = cfg.jobs {
        // a second build in the same process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }

    match cli.command {
        Command::Synth(a) => cmd_synth(&cfg, &a),
        Command::Split(a) => cmd_split(&cfg, &a),
        Command::Index(_) => cmd_index(&cfg),
        Command::Eval(a) => cmd_eval(&cfg, a.mode.into()),
        Command::Infer(a) => cmd_infer(&cfg, &a.prompt),
        Command::Simulate(a) => cmd_simulate(&cfg, &a),
        Command::Gamma(a) => cmd_gamma(&cfg, a.library_size),
        Command::AuditGreedy(a) => cmd_audit_greedy(&cfg, a.library_size),
    }
}

fn override_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!("missing --{what}"))
}

fn load_library(cfg: &RunConfig) -> Result<AttributeLibrary> {
    let lib = match &cfg.paths.library {
        None => load_default_library(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading library {}", p.display()))?;
            AttributeLibrary::from_json(&text)?
        }
    };
    if cfg.backend == BackendKind::Synthetic && lib.len() > load_default_library().len() {
        bail!("the synthetic backend supports at most {} attributes", load_default_library().len());
    }
    Ok(lib)
}

fn load_pairs(path: &Path) -> Result<Vec<PreferencePair>> {
    let file = File::open(path).with_context(|| format!("opening pairs {}", path.display()))?;
    Ok(read_pairs(BufReader::new(file)).with_context(|| format!("reading pairs {}", path.display()))?)
}

fn load_index(path: &Path) -> Result<retrieval::UserMemory> {
    Ok(retrieval::load_memory(path).with_context(|| format!("loading index {}", path.display()))?)
}

fn synthetic_oracle(cfg: &RunConfig) -> Result<SyntheticOracle> {
    let base = fixture::default_oracle(cfg.oracle.seed, cfg.oracle.topics, cfg.oracle.noise);
    Ok(match cfg.oracle.interaction {
        None => base,
        Some(i) => SyntheticOracle::new(base.spec().clone().with_interaction(i.rho, i.background)).map_err(|e| anyhow!(e))?,
    })
}

fn make_scorer(cfg: &RunConfig, library: &AttributeLibrary) -> Result<Box<dyn Scorer>> {
    Ok(match cfg.backend {
        BackendKind::Synthetic => Box::new(synthetic_oracle(cfg)?),
        BackendKind::Remote => Box::new(ScoreCache::new(RemoteScorer::new(
            cfg.remote.clone().with_env(),
            library.clone(),
            cfg.max_in_flight,
        )?)),
    })
}

fn make_embedder(cfg: &RunConfig) -> Result<Box<dyn Embedder>> {
    Ok(match cfg.embedder.kind {
        EmbedderKind::Synthetic => Box::new(HashingEmbedder::new(cfg.embedder.dimension, cfg.embedder.seed)?),
        EmbedderKind::Remote => Box::new(RemoteEmbedder::connect(cfg.remote.clone().with_env(), cfg.max_in_flight)?),
    })
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    scored_region: &'a str,
    result: T,
}

fn emit<T: Serialize>(cfg: &RunConfig, command: &str, result: T) -> Result<()> {
    let report = Report { command, config: cfg, scored_region: SCORED_REGION, result };
    let text = serde_json::to_string_pretty(&report)?;
    match &cfg.paths.reports {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text + "\n").with_context(|| format!("writing report {}", p.display()))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_synth(cfg: &RunConfig, a: &SynthArgs) -> Result<i32> {
    let pairs = fixture::synthetic_pairs(
        cfg.oracle.seed,
        SynthConfig {
            users: a.users,
            pairs_per_user: a.pairs_per_user,
            topics: cfg.oracle.topics,
            duplicate_rate: a.duplicate_rate,
        },
    );
    write_pairs_file(&a.out, &pairs)?;
    eprintln!("pairs={} users={}", pairs.len(), a.users);
    Ok(EXIT_OK)
}

fn write_pairs_file(path: &Path, pairs: &[PreferencePair]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_pairs(&mut out, pairs)?;
    out.flush()?;
    Ok(())
}

fn cmd_split(cfg: &RunConfig, a: &SplitArgs) -> Result<i32> {
    let pairs = load_pairs(required(&cfg.paths.pairs, "pairs")?)?;
    let (train, test) = inference::split_pairs(&pairs, cfg.split_ratio, cfg.split_seed)?;
    write_pairs_file(&a.train_out, &train)?;
    write_pairs_file(&a.test_out, &test)?;
    eprintln!("train={} test={}", train.len(), test.len());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct IndexSummary {
    user_id: String,
    pairs: usize,
    unique_prompts: usize,
    mean_objective: f64,
    path: PathBuf,
}

/// File name for a user's index; characters outside `[A-Za-z0-9_.-]` become `_`.
pub fn index_file_name(user_id: &str) -> String {
    let safe: String =
        user_id.chars().map(|c| if c.is_ascii_alphanumeric() || "_.-".contains(c) { c } else { '_' }).collect();
    format!("{safe}.index.jsonl")
}

pub fn cmd_index(cfg: &RunConfig) -> Result<i32> {
    let library = load_library(cfg)?;
    let pairs = load_pairs(required(&cfg.paths.pairs, "pairs")?)?;
    let out_dir = required(&cfg.paths.index, "out-dir")?;
    if pairs.is_empty() {
        bail!("pairs file is empty");
    }
    let scorer = make_scorer(cfg, &library)?;
    let embedder = make_embedder(cfg)?;
    let selection = cfg.selection.clone();

    let mut users: Vec<&str> = Vec::new();
    let mut by_user: HashMap<&str, Vec<PreferencePair>> = HashMap::new();
    for p in &pairs {
        by_user
            .entry(&p.user_id)
            .or_insert_with(|| {
                users.push(&p.user_id);
                Vec::new()
            })
            .push(p.clone());
    }
    let mut summaries = Vec::new();
    let mut names: HashMap<String, &str> = HashMap::new();
    for user in users {
        let user_pairs = &by_user[user];
        let memory = selection::build_index(user_pairs, &library, &selection, &*scorer, &*embedder)?;
        let name = index_file_name(user);
        if let Some(other) = names.insert(name.clone(), user) {
            bail!("users {other:?} and {user:?} map to the same index file {name}");
        }
        let path = out_dir.join(&name);
        retrieval::save_memory(&memory, &path)?;
        let mean_objective = memory.entries().iter().map(|e| e.objective).sum::<f64>() / memory.len() as f64;
        eprintln!(
            "user={user} pairs={} unique_prompts={} mean_objective={mean_objective:.6}",
            user_pairs.len(),
            memory.len()
        );
        summaries.push(IndexSummary {
            user_id: user.to_owned(),
            pairs: user_pairs.len(),
            unique_prompts: memory.len(),
            mean_objective,
            path,
        });
    }
    emit(cfg, "index", summaries)?;
    Ok(EXIT_OK)
}

fn cmd_eval(cfg: &RunConfig, mode: EvalMode) -> Result<i32> {
    let library = load_library(cfg)?;
    let memory = load_index(required(&cfg.paths.index, "index")?)?;
    memory.check_library(&library)?;
    let pairs: Vec<PreferencePair> = load_pairs(required(&cfg.paths.pairs, "pairs")?)?
        .into_iter()
        .filter(|p| p.user_id == memory.user_id)
        .collect();
    let scorer = make_scorer(cfg, &library)?;
    let embedder = make_embedder(cfg)?;
    let report = inference::evaluate_pairs(&memory, &pairs, &*scorer, &*embedder, mode)?;
    eprintln!("accuracy={:.6} n={}", report.accuracy, report.n);
    emit(cfg, "eval", report)?;
    Ok(EXIT_OK)
}

fn cmd_infer(cfg: &RunConfig, prompt: &str) -> Result<i32> {
    let library = load_library(cfg)?;
    let memory = load_index(required(&cfg.paths.index, "index")?)?;
    memory.check_library(&library)?;
    let embedder = make_embedder(cfg)?;
    let generator: Box<dyn Generator> = match cfg.backend {
        BackendKind::Synthetic => Box::new(EchoGenerator),
        BackendKind::Remote => Box::new(RemoteGenerator::new(cfg.remote.clone().with_env(), cfg.max_in_flight)?),
    };
    let out = inference::personalize(&memory, prompt, &library, &*generator, &cfg.decoding, &*embedder)?;
    println!("{}", out.response);
    eprintln!("{}", serde_json::to_string(&out.retrieval)?);
    Ok(EXIT_OK)
}

/// Parses `n_min=a..b` (inclusive) or `a..b`.
pub fn parse_sweep(spec: &str) -> Result<Vec<usize>> {
    let range = spec.strip_prefix("n_min=").unwrap_or(spec);
    let (a, b) = range.split_once("..").ok_or_else(|| anyhow!("sweep must look like n_min=a..b"))?;
    let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().trim_start_matches('=').parse()?);
    if a == 0 || b < a {
        bail!("sweep range {a}..{b} is empty or starts at 0");
    }
    Ok((a..=b).collect())
}

#[derive(Serialize)]
struct SimulateResult {
    reports: Vec<SimReport>,
    fit: Option<driftsim::ThresholdFit>,
}

fn write_sim_csv(path: &Path, reports: &[SimReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "k", "d", "r", "sigma", "delta", "m1", "n_min", "trials", "topic", "n_c", "pool_mse", "pool_mse_se",
        "pool_mse_analytic", "pool_bias_analytic", "pool_bias_estimate", "pool_variance_analytic",
        "retrieval_mse", "retrieval_mse_se", "retrieval_bound", "misclassification",
    ])?;
    for r in reports {
        for t in &r.per_topic {
            w.write_record(
                [
                    r.k as f64, r.d as f64, r.r, r.sigma, r.delta, r.m1 as f64, r.n_min as f64, r.trials as f64,
                    t.topic as f64, t.n_c as f64, t.pool_mse, t.pool_mse_se, t.pool_mse_analytic,
                    t.pool_bias_analytic, t.pool_bias_estimate, t.pool_variance_analytic, t.retrieval_mse,
                    t.retrieval_mse_se, t.retrieval_bound, t.misclassification,
                ]
                .map(|v| v.to_string()),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, a: &SimulateArgs) -> Result<i32> {
    let model = driftsim::make_model(&ModelSpec::new(a.k, a.d, a.r, a.sigma, cfg.oracle.seed))?;
    let sim = SimConfig::new(a.n, a.trials, a.delta, cfg.oracle.seed);
    let (reports, fit) = match &a.sweep {
        None => (vec![driftsim::run_sim(&model, &sim)?], None),
        Some(spec) => {
            let reports = driftsim::sweep(&model, &sim, &parse_sweep(spec)?)?;
            let fit = driftsim::fit_threshold(&reports);
            (reports, fit)
        }
    };
    for r in &reports {
        let bias: Vec<String> = r.per_topic.iter().map(|t| format!("{:.6}", t.pool_bias_analytic)).collect();
        eprintln!(
            "n_min={} m1={} pool_bias=[{}] max_misclassification={:.4}",
            r.n_min,
            r.m1,
            bias.join(","),
            r.max_misclassification()
        );
    }
    if let Some(p) = &a.csv {
        write_sim_csv(p, &reports)?;
    }
    emit(cfg, "simulate", SimulateResult { reports, fit })?;
    Ok(EXIT_OK)
}

fn lattice_inputs(cfg: &RunConfig, library_size: usize) -> Result<(AttributeLibrary, Vec<PreferencePair>, Box<dyn Scorer>)> {
    let full = load_library(cfg)?;
    if library_size == 0 || library_size > selection::MAX_LATTICE_ATTRIBUTES || library_size > full.len() {
        bail!(
            "library size must lie in 1..={}",
            selection::MAX_LATTICE_ATTRIBUTES.min(full.len())
        );
    }
    let library = full.truncated(library_size)?;
    let pairs = load_pairs(required(&cfg.paths.pairs, "pairs")?)?;
    let scorer = make_scorer(cfg, &full)?;
    Ok((library, pairs, scorer))
}

fn cmd_gamma(cfg: &RunConfig, library_size: usize) -> Result<i32> {
    let (library, pairs, scorer) = lattice_inputs(cfg, library_size)?;
    let estimate = selection::estimate_gamma(&pairs, &library, &*scorer)?;
    eprintln!("gamma_hat={:.6}", estimate.gamma_hat);
    emit(cfg, "gamma", estimate)?;
    Ok(EXIT_OK)
}

fn cmd_audit_greedy(cfg: &RunConfig, library_size: usize) -> Result<i32> {
    let (library, pairs, scorer) = lattice_inputs(cfg, library_size)?;
    let report =
        selection::audit_greedy_bound(&pairs, &library, cfg.selection.budget, cfg.selection.nonneg_filter, &*scorer)?;
    eprintln!(
        "greedy={:.6} optimal={:.6} gamma_hat={:.6} bound={:.6} violation={}",
        report.greedy_value, report.optimal_value, report.gamma_hat, report.bound, report.violation
    );
    let violation = report.violation;
    emit(cfg, "audit-greedy", report)?;
    Ok(if violation { EXIT_VIOLATION } else { EXIT_OK })
}
