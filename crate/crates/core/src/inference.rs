//! Online stage: prompt augmentation, personalized generation, pairwise
//! evaluation and the single-global-subset baseline.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribute::{AttributeId, AttributeLibrary, AttributeSubset, PreferencePair};
use crate::backend::BackendError;
use crate::hashing::StableHasher;
use crate::retrieval::{Embedder, IndexEntry, RetrievalError, RetrievalResult, UserMemory};
use crate::scoring::{pair_gap, Scorer};

pub const ATTRIBUTES_PREFIX: &str = "Attributes: <";
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("pair {0:?} appears in both the index and the test set")]
    OverlappingSplit(String),
    #[error("attribute {0} is not in the library")]
    UnknownAttribute(AttributeId),
    #[error("invalid decoding parameters: {0}")]
    InvalidDecoding(String),
    #[error("split ratio must lie in (0, 1), got {0}")]
    InvalidSplitRatio(f64),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_k: u32,
    pub top_p: f64,
    pub max_new_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self { temperature: 0.7, top_k: 50, top_p: 0.95, max_new_tokens: 200 }
    }
}

impl DecodingParams {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(InferenceError::InvalidDecoding(format!("temperature {} < 0", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(InferenceError::InvalidDecoding(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        Ok(())
    }
}

/// Appends `"\nAttributes: <A, B, C>"` (names in selection order). An empty
/// subset leaves the prompt unchanged.
pub fn augment_prompt(
    prompt: &str,
    subset: &[AttributeId],
    library: &AttributeLibrary,
) -> Result<String, InferenceError> {
    if subset.is_empty() {
        return Ok(prompt.to_owned());
    }
    let names = subset
        .iter()
        .map(|id| library.name(*id).ok_or(InferenceError::UnknownAttribute(*id)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(format!("{prompt}\n{ATTRIBUTES_PREFIX}{}>", names.join(", ")))
}

/// Splits an augmented prompt back into the user prompt and the attribute ids.
/// Returns `None` if the last line is not a well-formed attributes block.
pub fn parse_augmented(text: &str, library: &AttributeLibrary) -> Option<(String, Vec<AttributeId>)> {
    let (prompt, last) = text.rsplit_once('\n')?;
    let inner = last.strip_prefix(ATTRIBUTES_PREFIX)?.strip_suffix('>')?;
    let ids = inner
        .split(", ")
        .map(|name| library.id_of(name))
        .collect::<Option<Vec<_>>>()?;
    Some((prompt.to_owned(), ids))
}

/// Text generation backend.
pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn generate(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        (**self).generate(prompt, params)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn generate(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        (**self).generate(prompt, params)
    }
}

/// Returns the (augmented) prompt it was given.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoGenerator;

impl Generator for EchoGenerator {
    fn generate(&self, prompt: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        Ok(prompt.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Personalized {
    pub response: String,
    pub augmented_prompt: String,
    pub retrieval: RetrievalResult,
}

/// Retrieves the nearest stored prompt, applies its attributes and generates.
pub fn personalize<G, E>(
    memory: &UserMemory,
    prompt: &str,
    library: &AttributeLibrary,
    generator: &G,
    decoding: &DecodingParams,
    embedder: &E,
) -> Result<Personalized, InferenceError>
where
    G: Generator + ?Sized,
    E: Embedder + ?Sized,
{
    decoding.validate()?;
    let retrieval = memory.retrieve(prompt, embedder)?;
    let augmented_prompt = augment_prompt(prompt, &retrieval.entry.subset.members, library)?;
    let response = generator.generate(&augmented_prompt, decoding)?;
    Ok(Personalized { response, augmented_prompt, retrieval })
}

/// The subset of the highest-objective entry; ties go to the lowest seq.
pub fn global_subset_baseline(memory: &UserMemory) -> Result<&IndexEntry, InferenceError> {
    let mut best: Option<&IndexEntry> = None;
    for e in memory.entries() {
        if best.is_none_or(|b| e.objective > b.objective || (e.objective == b.objective && e.seq < b.seq)) {
            best = Some(e);
        }
    }
    best.ok_or(InferenceError::Retrieval(RetrievalError::EmptyMemory))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Nearest stored prompt's subset.
    Retrieval,
    /// One subset for every prompt (best training objective).
    Global,
    /// No attributes.
    Base,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub pair_id: String,
    /// Nearest stored prompt; `None` outside retrieval mode.
    pub retrieved_entry_prompt: Option<String>,
    pub similarity: Option<f64>,
    pub attributes: Vec<AttributeId>,
    pub gap_with_attrs: f64,
    pub gap_base: f64,
    /// gap_with_attrs > 0.
    pub correct: bool,
    /// gap_with_attrs − gap_base > 0.
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub user_id: String,
    pub n: usize,
    pub per_pair: Vec<PairOutcome>,
    pub accuracy: f64,
    pub improvement_accuracy: f64,
    pub retrieval_accuracy: f64,
    pub global_baseline_accuracy: f64,
    pub empty_baseline_accuracy: f64,
    pub global_subset: Vec<AttributeId>,
    /// Reserved for externally produced judgments.
    pub judgments: Option<serde_json::Value>,
}

struct Row {
    retrieval: RetrievalResult,
    base: f64,
    retrieved: f64,
    global: f64,
}

/// Pairwise accuracy of `mode` on held-out pairs; the other two modes are
/// reported as baselines. Zero gaps count as incorrect.
pub fn evaluate_pairs<S, E>(
    memory: &UserMemory,
    test_pairs: &[PreferencePair],
    scorer: &S,
    embedder: &E,
    mode: EvalMode,
) -> Result<EvalReport, InferenceError>
where
    S: Scorer + ?Sized,
    E: Embedder + ?Sized,
{
    if test_pairs.is_empty() {
        return Err(InferenceError::EmptyTestSet);
    }
    let indexed: HashSet<&str> = memory.entries().iter().flat_map(|e| e.pair_ids.iter().map(String::as_str)).collect();
    if let Some(p) = test_pairs.iter().find(|p| indexed.contains(p.pair_id.as_str())) {
        return Err(InferenceError::OverlappingSplit(p.pair_id.clone()));
    }
    let global = global_subset_baseline(memory)?.subset.members.clone();

    let rows = test_pairs
        .par_iter()
        .map(|pair| {
            let retrieval = memory.retrieve(&pair.prompt, embedder)?;
            let base = pair_gap(scorer, pair, &[])?;
            let retrieved = pair_gap(scorer, pair, &retrieval.entry.subset.members)?;
            let global = pair_gap(scorer, pair, &global)?;
            Ok(Row { retrieval, base, retrieved, global })
        })
        .collect::<Result<Vec<_>, InferenceError>>()?;

    let n = rows.len() as f64;
    let frac = |f: &dyn Fn(&Row) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / n;
    let retrieval_accuracy = frac(&|r| r.retrieved > 0.0);
    let global_baseline_accuracy = frac(&|r| r.global > 0.0);
    let empty_baseline_accuracy = frac(&|r| r.base > 0.0);

    let mut per_pair: Vec<PairOutcome> = test_pairs
        .iter()
        .zip(rows)
        .map(|(pair, row)| {
            let (prompt, sim, attrs, gap) = match mode {
                EvalMode::Retrieval => (
                    Some(row.retrieval.entry.prompt.clone()),
                    Some(row.retrieval.similarity),
                    row.retrieval.entry.subset.members.clone(),
                    row.retrieved,
                ),
                EvalMode::Global => (None, None, global.clone(), row.global),
                EvalMode::Base => (None, None, Vec::new(), row.base),
            };
            PairOutcome {
                pair_id: pair.pair_id.clone(),
                retrieved_entry_prompt: prompt,
                similarity: sim,
                attributes: attrs,
                gap_with_attrs: gap,
                gap_base: row.base,
                correct: gap > 0.0,
                improved: gap - row.base > 0.0,
            }
        })
        .collect();
    per_pair.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));

    let accuracy = per_pair.iter().filter(|p| p.correct).count() as f64 / n;
    let improvement_accuracy = per_pair.iter().filter(|p| p.improved).count() as f64 / n;
    Ok(EvalReport {
        mode,
        user_id: memory.user_id.clone(),
        n: per_pair.len(),
        per_pair,
        accuracy,
        improvement_accuracy,
        retrieval_accuracy,
        global_baseline_accuracy,
        empty_baseline_accuracy,
        global_subset: global,
        judgments: None,
    })
}

/// Per-user seeded shuffle, then the first `ratio` share of each user's
/// pairs goes to training. Users with at least two pairs keep one on each
/// side. Both halves preserve input order.
pub fn split_pairs(
    pairs: &[PreferencePair],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<PreferencePair>, Vec<PreferencePair>), InferenceError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(InferenceError::InvalidSplitRatio(ratio));
    }
    let mut by_user: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut users: Vec<&str> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        by_user
            .entry(&p.user_id)
            .or_insert_with(|| {
                users.push(&p.user_id);
                Vec::new()
            })
            .push(i);
    }
    let mut is_train = vec![false; pairs.len()];
    for user in users {
        let mut idx = by_user.remove(user).expect("grouped above");
        let mut rng = ChaCha8Rng::seed_from_u64(StableHasher::new(seed).str(user).finish());
        idx.shuffle(&mut rng);
        let n = idx.len();
        let mut cut = (ratio * n as f64).round() as usize;
        if n >= 2 {
            cut = cut.clamp(1, n - 1);
        }
        for &i in &idx[..cut.min(n)] {
            is_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = pairs.iter().cloned().zip(is_train).partition(|(_, t)| *t);
    Ok((train.into_iter().map(|(p, _)| p).collect(), test.into_iter().map(|(p, _)| p).collect()))
}

/// Subset together with its library names, for reports.
pub fn named_subset(subset: &AttributeSubset, library: &AttributeLibrary) -> Vec<String> {
    subset.members.iter().map(|id| library.name(*id).unwrap_or("?").to_owned()).collect()
}
