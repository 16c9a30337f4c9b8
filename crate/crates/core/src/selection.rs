//! Offline indexing: per-pair greedy attribute selection, the exhaustive
//! baseline, prompt-level deduplication, the dataset objective
//! `F(A) = mean over pairs of [gap(A) - gap(∅)]`, submodularity-ratio
//! estimation and the greedy approximation-bound audit.
//!
//! All argmax steps break ties towards the lowest attribute id (greedy) or
//! the lexicographically smallest id sequence (exhaustive).

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribute::{AttributeId, AttributeLibrary, AttributeSubset, PreferencePair};
use crate::backend::BackendError;
use crate::retrieval::{Embedder, IndexEntry, RetrievalError, UserMemory};
use crate::scoring::{log_sigmoid, pair_gap, Scorer};

pub const DEFAULT_ENUMERATION_CAP: u64 = 200_000;
/// Largest library for which the full 2^K lattice of F is materialized.
pub const MAX_LATTICE_ATTRIBUTES: usize = 12;
/// Slack used when checking the approximation bound.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("attribute library is empty")]
    EmptyLibrary,
    #[error("budget {budget} exceeds library size {library}")]
    BudgetTooLarge { budget: usize, library: usize },
    #[error("enumeration of {count} subsets exceeds the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u64 },
    #[error("no preference pairs given")]
    EmptyDataset,
    #[error("pairs belong to several users ({0:?} and {1:?})")]
    MixedUsers(String, String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Value greedy maximizes for a single pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionObjective {
    /// The raw log-probability gap log π(y_w|x,A) − log π(y_l|x,A).
    PairGap,
    /// Bradley–Terry log-likelihood log σ(β·[gap(A) − gap(∅)]). Same argmax
    /// as `PairGap` for every β > 0.
    PreferenceLikelihood { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub budget: usize,
    /// Stop as soon as the best marginal gain is not strictly positive.
    pub nonneg_filter: bool,
    pub objective: SelectionObjective,
    pub enumeration_cap: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            budget: 3,
            nonneg_filter: true,
            objective: SelectionObjective::PairGap,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

// ---------------------------------------------------------------------------
// Generic set-function maximization
// ---------------------------------------------------------------------------

/// Result of running greedy on an arbitrary set function.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace {
    pub subset: AttributeSubset,
    /// f(S_t) for t = 0..=|S|.
    pub path_values: Vec<f64>,
    /// Every evaluated Δ(a | S_t) was ≥ 0.
    pub monotone_along_path: bool,
    /// Number of set-function evaluations, excluding the starting value.
    pub evaluations: u64,
}

impl GreedyTrace {
    pub fn value(&self) -> f64 {
        *self.path_values.last().expect("path always holds the start value")
    }
}

/// Greedy maximization of `value` over subsets of `candidates` with at most
/// `budget` members, starting from ∅ whose value is `start_value`.
///
/// Each round evaluates `value(S ∪ {a})` for every remaining candidate
/// (in parallel) and keeps the best, lowest id first on ties.
pub fn greedy_maximize<E, F>(
    candidates: &[AttributeId],
    budget: usize,
    nonneg_filter: bool,
    start_value: f64,
    value: F,
) -> Result<GreedyTrace, E>
where
    E: Send,
    F: Fn(&[AttributeId]) -> Result<f64, E> + Sync,
{
    let mut remaining: Vec<AttributeId> = candidates.to_vec();
    remaining.sort_unstable();
    remaining.dedup();

    let mut subset = AttributeSubset::empty();
    let mut current = start_value;
    let mut path_values = vec![start_value];
    let mut monotone = true;
    let mut evaluations = 0u64;

    for _ in 0..budget.min(remaining.len()) {
        let values = remaining
            .par_iter()
            .map(|a| {
                let mut trial = subset.members.clone();
                trial.push(*a);
                value(&trial)
            })
            .collect::<Result<Vec<f64>, E>>()?;
        evaluations += values.len() as u64;

        let mut best: Option<(usize, f64)> = None;
        for (i, v) in values.iter().enumerate() {
            if *v < current {
                monotone = false;
            }
            if best.is_none_or(|(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
        let Some((i, v)) = best else { break };
        let gain = v - current;
        if nonneg_filter && !(gain > 0.0) {
            break;
        }
        subset.members.push(remaining.remove(i));
        subset.gains.push(gain);
        current = v;
        path_values.push(v);
    }

    Ok(GreedyTrace { subset, path_values, monotone_along_path: monotone, evaluations })
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Number of subsets of size 0..=k of an n-element set.
pub fn lattice_size(n: usize, k: usize) -> u128 {
    (0..=k.min(n)).map(|j| binomial(n as u64, j as u64)).sum()
}

/// Best subset found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    /// Members in ascending id order; gains are prefix marginals.
    pub subset: AttributeSubset,
    pub value: f64,
    pub evaluations: u64,
}

/// Evaluates every subset of size 0..=budget in lexicographic order and
/// returns the first maximizer.
pub fn exhaustive_maximize<E, F>(
    candidates: &[AttributeId],
    budget: usize,
    cap: u64,
    value: F,
) -> Result<ExhaustiveResult, E>
where
    E: From<SelectionError>,
    F: Fn(&[AttributeId]) -> Result<f64, E>,
{
    let mut ids: Vec<AttributeId> = candidates.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let count = lattice_size(ids.len(), budget);
    if count > u128::from(cap) {
        return Err(SelectionError::EnumerationTooLarge { count, cap }.into());
    }

    struct Search<'a, F> {
        ids: &'a [AttributeId],
        budget: usize,
        value: F,
        current: Vec<AttributeId>,
        prefix_values: Vec<f64>,
        best: Option<(Vec<f64>, Vec<AttributeId>)>,
        evaluations: u64,
    }

    impl<F> Search<'_, F> {
        fn visit<E>(&mut self, start: usize) -> Result<(), E>
        where
            F: Fn(&[AttributeId]) -> Result<f64, E>,
        {
            let v = (self.value)(&self.current)?;
            self.evaluations += 1;
            self.prefix_values.push(v);
            if self.best.as_ref().is_none_or(|(b, _)| v > *b.last().expect("non-empty")) {
                self.best = Some((self.prefix_values.clone(), self.current.clone()));
            }
            if self.current.len() < self.budget {
                for i in start..self.ids.len() {
                    self.current.push(self.ids[i]);
                    self.visit(i + 1)?;
                    self.current.pop();
                }
            }
            self.prefix_values.pop();
            Ok(())
        }
    }

    let mut search = Search {
        ids: &ids,
        budget,
        value,
        current: Vec::with_capacity(budget),
        prefix_values: Vec::with_capacity(budget + 1),
        best: None,
        evaluations: 0,
    };
    search.visit(0)?;
    let (values, members) = search.best.expect("the empty set is always evaluated");
    let gains = values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(ExhaustiveResult {
        subset: AttributeSubset { members, gains },
        value: *values.last().expect("non-empty"),
        evaluations: search.evaluations,
    })
}

// ---------------------------------------------------------------------------
// Per-pair selection
// ---------------------------------------------------------------------------

/// Greedy selection for one pair together with the gaps it achieved.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSelection {
    pub subset: AttributeSubset,
    /// gap(A*) for the selected subset.
    pub gap: f64,
    /// gap(∅).
    pub base_gap: f64,
    pub evaluations: u64,
}

fn check_library(library: &AttributeLibrary, budget: usize) -> Result<(), SelectionError> {
    if library.is_empty() {
        return Err(SelectionError::EmptyLibrary);
    }
    if budget > library.len() {
        return Err(SelectionError::BudgetTooLarge { budget, library: library.len() });
    }
    Ok(())
}

pub fn select_for_pair<S: Scorer + ?Sized>(
    pair: &PreferencePair,
    library: &AttributeLibrary,
    config: &SelectionConfig,
    scorer: &S,
) -> Result<PairSelection, SelectionError> {
    check_library(library, config.budget)?;
    let candidates: Vec<AttributeId> = library.ids().collect();
    let base_gap = pair_gap(scorer, pair, &[])?;

    let transform = |gap: f64| match config.objective {
        SelectionObjective::PairGap => gap,
        SelectionObjective::PreferenceLikelihood { beta } => log_sigmoid(beta * (gap - base_gap)),
    };
    // raw gaps of evaluated sets, so the achieved gap is known under any transform
    let raw: std::sync::Mutex<HashMap<Vec<AttributeId>, f64>> = Default::default();
    let trace = greedy_maximize(&candidates, config.budget, config.nonneg_filter, transform(base_gap), |set| {
        let gap = pair_gap(scorer, pair, set)?;
        raw.lock().expect("gap table poisoned").insert(set.to_vec(), gap);
        Ok::<_, BackendError>(transform(gap))
    })?;
    let gap = if trace.subset.is_empty() {
        base_gap
    } else {
        raw.lock().expect("gap table poisoned")[&trace.subset.members]
    };
    Ok(PairSelection { subset: trace.subset, gap, base_gap, evaluations: trace.evaluations })
}

/// Greedy attribute selection for one preference pair.
pub fn greedy_select<S: Scorer + ?Sized>(
    pair: &PreferencePair,
    library: &AttributeLibrary,
    config: &SelectionConfig,
    scorer: &S,
) -> Result<AttributeSubset, SelectionError> {
    Ok(select_for_pair(pair, library, config, scorer)?.subset)
}

/// Best subset of size ≤ `budget` for one pair by full enumeration.
pub fn exhaustive_select<S: Scorer + ?Sized>(
    pair: &PreferencePair,
    library: &AttributeLibrary,
    budget: usize,
    scorer: &S,
    cap: u64,
) -> Result<ExhaustiveResult, SelectionError> {
    check_library(library, budget)?;
    let candidates: Vec<AttributeId> = library.ids().collect();
    exhaustive_maximize(&candidates, budget, cap, |set| Ok::<_, SelectionError>(pair_gap(scorer, pair, set)?))
}

/// Runs greedy on every pair of one user, deduplicates by exact prompt
/// (highest objective wins, earliest pair on ties) and embeds the survivors.
pub fn build_index<S, E>(
    pairs: &[PreferencePair],
    library: &AttributeLibrary,
    config: &SelectionConfig,
    scorer: &S,
    embedder: &E,
) -> Result<UserMemory, SelectionError>
where
    S: Scorer + ?Sized,
    E: Embedder + ?Sized,
{
    check_library(library, config.budget)?;
    let user_id = match pairs.first() {
        Some(p) => p.user_id.clone(),
        None => return Err(SelectionError::EmptyDataset),
    };
    if let Some(other) = pairs.iter().find(|p| p.user_id != user_id) {
        return Err(SelectionError::MixedUsers(user_id, other.user_id.clone()));
    }

    let selections = pairs
        .par_iter()
        .map(|p| select_for_pair(p, library, config, scorer))
        .collect::<Result<Vec<_>, _>>()?;

    // single-threaded reduce in input order
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, (usize, Vec<String>)> = HashMap::new();
    for (i, (pair, sel)) in pairs.iter().zip(&selections).enumerate() {
        match groups.get_mut(pair.prompt.as_str()) {
            Some((best, ids)) => {
                if sel.gap > selections[*best].gap {
                    *best = i;
                }
                ids.push(pair.pair_id.clone());
            }
            None => {
                order.push(&pair.prompt);
                groups.insert(&pair.prompt, (i, vec![pair.pair_id.clone()]));
            }
        }
    }

    let embeddings = order
        .par_iter()
        .map(|p| embedder.embed(p))
        .collect::<Result<Vec<_>, _>>()?;

    let mut memory = UserMemory::new(user_id, embedder.dimension()).with_library_hash(library.content_hash());
    for (prompt, embedding) in order.iter().zip(embeddings) {
        let (best, pair_ids) = groups.remove(prompt).expect("grouped above");
        memory.append_entry(IndexEntry {
            prompt: (*prompt).to_owned(),
            embedding,
            subset: selections[best].subset.clone(),
            objective: selections[best].gap,
            seq: 0,
            pair_ids,
        })?;
    }
    Ok(memory)
}

// ---------------------------------------------------------------------------
// Dataset objective, lattice, submodularity ratio, bound audit
// ---------------------------------------------------------------------------

/// F(A) together with the per-pair terms it averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetObjective {
    pub value: f64,
    pub per_pair: Vec<f64>,
}

pub fn dataset_objective_detailed<S: Scorer + ?Sized>(
    subset: &[AttributeId],
    pairs: &[PreferencePair],
    scorer: &S,
) -> Result<DatasetObjective, SelectionError> {
    if pairs.is_empty() {
        return Err(SelectionError::EmptyDataset);
    }
    let per_pair = pairs
        .par_iter()
        .map(|p| {
            if subset.is_empty() {
                return Ok(0.0);
            }
            Ok(pair_gap(scorer, p, subset)? - pair_gap(scorer, p, &[])?)
        })
        .collect::<Result<Vec<f64>, BackendError>>()?;
    let value = per_pair.iter().sum::<f64>() / per_pair.len() as f64;
    Ok(DatasetObjective { value, per_pair })
}

/// F(A) = mean over pairs of [gap(A) − gap(∅)]; F(∅) = 0.
pub fn dataset_objective<S: Scorer + ?Sized>(
    subset: &[AttributeId],
    pairs: &[PreferencePair],
    scorer: &S,
) -> Result<f64, SelectionError> {
    Ok(dataset_objective_detailed(subset, pairs, scorer)?.value)
}

fn mask_ids(mask: u32) -> Vec<AttributeId> {
    (0..32u16).filter(|b| mask & (1 << b) != 0).map(AttributeId).collect()
}

fn ids_mask(ids: &[AttributeId]) -> u32 {
    ids.iter().fold(0, |m, id| m | (1 << id.0))
}

/// F evaluated on every subset of a small library, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveLattice {
    attributes: usize,
    pairs: usize,
    /// Σ over pairs of [gap(A) − gap(∅)]; kept unnormalized so ratios of
    /// differences are free of the 1/N rounding.
    totals: Vec<f64>,
}

impl ObjectiveLattice {
    pub fn compute<S: Scorer + ?Sized>(
        library: &AttributeLibrary,
        pairs: &[PreferencePair],
        scorer: &S,
    ) -> Result<Self, SelectionError> {
        let k = library.len();
        if k == 0 {
            return Err(SelectionError::EmptyLibrary);
        }
        if k > MAX_LATTICE_ATTRIBUTES {
            return Err(SelectionError::EnumerationTooLarge {
                count: 1u128 << k,
                cap: 1u64 << MAX_LATTICE_ATTRIBUTES,
            });
        }
        if pairs.is_empty() {
            return Err(SelectionError::EmptyDataset);
        }
        let base: Vec<f64> = pairs
            .par_iter()
            .map(|p| pair_gap(scorer, p, &[]))
            .collect::<Result<_, _>>()?;
        let totals = (0..1u32 << k)
            .into_par_iter()
            .map(|mask| {
                if mask == 0 {
                    return Ok(0.0);
                }
                let ids = mask_ids(mask);
                let mut total = 0.0;
                for (p, b) in pairs.iter().zip(&base) {
                    total += pair_gap(scorer, p, &ids)? - b;
                }
                Ok(total)
            })
            .collect::<Result<Vec<f64>, BackendError>>()?;
        Ok(Self { attributes: k, pairs: pairs.len(), totals })
    }

    /// Builds a lattice directly from F values indexed by mask (F(∅) must be 0).
    pub fn from_values(attributes: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), 1 << attributes, "one value per subset");
        Self { attributes, pairs: 1, totals: values }
    }

    pub fn attributes(&self) -> usize {
        self.attributes
    }

    pub fn value(&self, ids: &[AttributeId]) -> f64 {
        self.value_mask(ids_mask(ids))
    }

    pub fn value_mask(&self, mask: u32) -> f64 {
        self.totals[mask as usize] / self.pairs as f64
    }

    fn total(&self, mask: u32) -> f64 {
        self.totals[mask as usize]
    }

    pub fn ids(&self) -> Vec<AttributeId> {
        (0..self.attributes as u16).map(AttributeId).collect()
    }

    /// F(S ∪ {a}) ≥ F(S) for every S and a.
    pub fn is_monotone(&self) -> bool {
        let full = (1u32 << self.attributes) - 1;
        (0..=full).all(|s| {
            (0..self.attributes).all(|a| s & (1 << a) != 0 || self.total(s | (1 << a)) >= self.total(s))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaEstimate {
    /// Clamped into (0, 1].
    pub gamma_hat: f64,
    /// Minimum ratio before clamping; `None` when no (S, L) had Δ(L|S) > 0.
    pub gamma_raw: Option<f64>,
    #[serde(rename = "argmin_S")]
    pub argmin_s: Vec<AttributeId>,
    #[serde(rename = "argmin_L")]
    pub argmin_l: Vec<AttributeId>,
    /// Number of (S, L) pairs with Δ(L|S) > 0 that entered the minimum.
    pub pairs_considered: u64,
}

pub const GAMMA_FLOOR: f64 = 1e-12;

/// Submodularity ratio: min over disjoint (S, L), L ≠ ∅, Δ(L|S) > 0 of
/// Σ_{a∈L} Δ(a|S) / Δ(L|S).
pub fn estimate_gamma_from_lattice(lattice: &ObjectiveLattice) -> GammaEstimate {
    let n = lattice.attributes;
    let full = (1u32 << n) - 1;
    let mut best: Option<(f64, u32, u32)> = None;
    let mut considered = 0u64;
    for s in 0..=full {
        let fs = lattice.total(s);
        let free = full & !s;
        let singles: Vec<f64> = (0..n)
            .map(|a| if free & (1 << a) != 0 { lattice.total(s | (1 << a)) - fs } else { 0.0 })
            .collect();
        let mut l = free;
        while l != 0 {
            let joint = lattice.total(s | l) - fs;
            if joint > 0.0 {
                considered += 1;
                let sum: f64 = (0..n).filter(|a| l & (1 << a) != 0).map(|a| singles[a]).sum();
                let ratio = sum / joint;
                if best.is_none_or(|(b, _, _)| ratio < b) {
                    best = Some((ratio, s, l));
                }
            }
            l = (l - 1) & free;
        }
    }
    match best {
        Some((raw, s, l)) => GammaEstimate {
            gamma_hat: raw.clamp(GAMMA_FLOOR, 1.0),
            gamma_raw: Some(raw),
            argmin_s: mask_ids(s),
            argmin_l: mask_ids(l),
            pairs_considered: considered,
        },
        None => GammaEstimate {
            gamma_hat: 1.0,
            gamma_raw: None,
            argmin_s: Vec::new(),
            argmin_l: Vec::new(),
            pairs_considered: 0,
        },
    }
}

pub fn estimate_gamma<S: Scorer + ?Sized>(
    pairs: &[PreferencePair],
    library: &AttributeLibrary,
    scorer: &S,
) -> Result<GammaEstimate, SelectionError> {
    Ok(estimate_gamma_from_lattice(&ObjectiveLattice::compute(library, pairs, scorer)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetValue {
    pub subset: Vec<AttributeId>,
    pub value: f64,
}

/// Greedy versus exhaustive on the set objective, with the 1 − e^{−γ̂} bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetObjectiveReport {
    pub attributes: usize,
    pub budget: usize,
    pub subset_values: Vec<SubsetValue>,
    pub gamma_hat: f64,
    pub gamma_raw: Option<f64>,
    pub greedy_subset: AttributeSubset,
    pub greedy_value: f64,
    pub optimal_subset: Vec<AttributeId>,
    pub optimal_value: f64,
    /// F(S_k) / F(S*) when F(S*) > 0.
    pub ratio: Option<f64>,
    pub gap: f64,
    pub bound_factor: f64,
    pub bound: f64,
    pub monotone_along_path: bool,
    pub monotone_on_lattice: bool,
    pub violation: bool,
    pub greedy_evaluations: u64,
    pub exhaustive_evaluations: u64,
}

pub fn audit_lattice(lattice: &ObjectiveLattice, budget: usize, nonneg_filter: bool) -> SetObjectiveReport {
    let ids = lattice.ids();
    let greedy = greedy_maximize(&ids, budget, nonneg_filter, 0.0, |set| Ok::<_, SelectionError>(lattice.value(set)))
        .expect("lattice lookups are infallible");
    let exhaustive = exhaustive_maximize(&ids, budget, u64::MAX, |set| Ok::<_, SelectionError>(lattice.value(set)))
        .expect("lattice lookups are infallible");
    let gamma = estimate_gamma_from_lattice(lattice);

    let greedy_value = greedy.value();
    let optimal_value = exhaustive.value;
    let bound_factor = 1.0 - (-gamma.gamma_hat).exp();
    let bound = bound_factor * optimal_value;
    let violation = greedy.monotone_along_path && greedy_value < bound - BOUND_TOLERANCE;

    SetObjectiveReport {
        attributes: lattice.attributes,
        budget,
        subset_values: (0..1u32 << lattice.attributes)
            .map(|m| SubsetValue { subset: mask_ids(m), value: lattice.value_mask(m) })
            .collect(),
        gamma_hat: gamma.gamma_hat,
        gamma_raw: gamma.gamma_raw,
        greedy_subset: greedy.subset.clone(),
        greedy_value,
        optimal_subset: exhaustive.subset.members,
        optimal_value,
        ratio: (optimal_value > 0.0).then(|| greedy_value / optimal_value),
        gap: optimal_value - greedy_value,
        bound_factor,
        bound,
        monotone_along_path: greedy.monotone_along_path,
        monotone_on_lattice: lattice.is_monotone(),
        violation,
        greedy_evaluations: greedy.evaluations,
        exhaustive_evaluations: exhaustive.evaluations,
    }
}

pub fn audit_greedy_bound<S: Scorer + ?Sized>(
    pairs: &[PreferencePair],
    library: &AttributeLibrary,
    budget: usize,
    nonneg_filter: bool,
    scorer: &S,
) -> Result<SetObjectiveReport, SelectionError> {
    check_library(library, budget)?;
    let lattice = ObjectiveLattice::compute(library, pairs, scorer)?;
    Ok(audit_lattice(&lattice, budget, nonneg_filter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribute::load_default_library;
    use crate::retrieval::HashingEmbedder;
    use crate::scoring::{CountingScorer, SyntheticOracle, SyntheticOracleSpec};

    fn ids(v: &[u16]) -> Vec<AttributeId> {
        v.iter().copied().map(AttributeId).collect()
    }

    fn aligned_pair(oracle: &SyntheticOracle, id: &str, prompt: &str) -> PreferencePair {
        let mut w = None;
        let mut l = None;
        for i in 0.. {
            let r = format!("{prompt} reply {i}");
            if oracle.is_aligned(&r) {
                w.get_or_insert(r);
            } else {
                l.get_or_insert(r);
            }
            if w.is_some() && l.is_some() {
                break;
            }
        }
        PreferencePair::new(id, "u", prompt, w.unwrap(), l.unwrap())
    }

    fn planted_oracle(k: usize, planted: &[u16], noise: f64) -> SyntheticOracle {
        SyntheticOracle::new(SyntheticOracleSpec::planted(4, k, 1.0, noise, vec![ids(planted)])).unwrap()
    }

    #[test]
    fn lattice_size_counts() {
        assert_eq!(lattice_size(10, 3), 176);
        assert_eq!(lattice_size(42, 3), 1 + 42 + 861 + 11480);
        assert_eq!(lattice_size(5, 5), 32);
        assert_eq!(lattice_size(3, 7), 8);
    }

    #[test]
    fn greedy_recovers_planted_subset_on_full_library() {
        let lib = load_default_library();
        let planted: Vec<u16> = ["Formal", "Concise", "Principled"].iter().map(|n| lib.id_of(n).unwrap().0).collect();
        let oracle = planted_oracle(42, &planted, 0.0);
        let pair = aligned_pair(&oracle, "p", "explain the tides");
        let got = greedy_select(&pair, &lib, &SelectionConfig::default(), &oracle).unwrap();
        assert_eq!(got.members, ids(&planted));
        assert_eq!(got.gains, vec![1.0, 1.0, 1.0]);

        let ex = exhaustive_select(&pair, &lib, 3, &oracle, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(ex.subset.members, ids(&planted));
        assert_eq!(ex.evaluations as u128, lattice_size(42, 3));
    }

    #[test]
    fn budget_zero_and_nonpositive_gains() {
        let lib = load_default_library().truncated(8).unwrap();
        let oracle = planted_oracle(8, &[1, 2], 0.0);
        let pair = aligned_pair(&oracle, "p", "q");
        let cfg = SelectionConfig { budget: 0, ..Default::default() };
        let got = greedy_select(&pair, &lib, &cfg, &oracle).unwrap();
        assert!(got.members.is_empty() && got.gains.is_empty());

        // rejected response is the aligned one: every attribute lowers the gap
        let flipped = pair.swapped();
        let got = greedy_select(&flipped, &lib, &SelectionConfig::default(), &oracle).unwrap();
        assert!(got.members.is_empty());

        let cfg = SelectionConfig { nonneg_filter: false, ..Default::default() };
        let got = greedy_select(&flipped, &lib, &cfg, &oracle).unwrap();
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn errors() {
        let lib = load_default_library().truncated(4).unwrap();
        let oracle = planted_oracle(4, &[1], 0.0);
        let pair = aligned_pair(&oracle, "p", "q");
        let cfg = SelectionConfig { budget: 5, ..Default::default() };
        assert!(matches!(greedy_select(&pair, &lib, &cfg, &oracle), Err(SelectionError::BudgetTooLarge { .. })));
        let big = load_default_library();
        let big_oracle = planted_oracle(42, &[1], 0.0);
        assert!(matches!(
            exhaustive_select(&pair, &big, 10, &big_oracle, DEFAULT_ENUMERATION_CAP),
            Err(SelectionError::EnumerationTooLarge { .. })
        ));
        assert!(matches!(dataset_objective(&[], &[], &oracle), Err(SelectionError::EmptyDataset)));
    }

    #[test]
    fn exhaustive_k_equals_library_walks_full_lattice() {
        let lib = load_default_library().truncated(6).unwrap();
        let oracle = planted_oracle(6, &[0, 3], 0.0);
        let pair = aligned_pair(&oracle, "p", "q");
        let ex = exhaustive_select(&pair, &lib, 6, &oracle, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(ex.evaluations, 64);
        // {0,3} ties with supersets padded by zero-weight attributes; [0,1,2,3] is lexicographically first
        assert_eq!(ex.value, 2.0);
        assert_eq!(ex.subset.members, ids(&[0, 1, 2, 3]));
        assert_eq!(ex.subset.gains, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn greedy_call_count_is_bounded() {
        let lib = load_default_library().truncated(10).unwrap();
        let oracle = CountingScorer::new(planted_oracle(10, &[2, 5, 7], 0.0));
        let pair = aligned_pair(oracle.inner(), "p", "q");
        let cfg = SelectionConfig { budget: 3, ..Default::default() };
        let sel = select_for_pair(&pair, &lib, &cfg, &oracle).unwrap();
        assert_eq!(sel.evaluations, 10 + 9 + 8);
        assert_eq!(oracle.conditioned_calls(), 2 * (10 + 9 + 8));
        assert_eq!(oracle.base_calls(), 2);
    }

    #[test]
    fn beta_does_not_change_greedy_choice() {
        let lib = load_default_library().truncated(10).unwrap();
        let oracle = SyntheticOracle::new(
            SyntheticOracleSpec::planted(9, 10, 1.0, 0.3, vec![ids(&[1, 4, 8])]).with_interaction(0.3, 0.4),
        )
        .unwrap();
        let pair = aligned_pair(&oracle, "p", "compare two sorting algorithms");
        let reference = greedy_select(&pair, &lib, &SelectionConfig::default(), &oracle).unwrap();
        for beta in [0.1, 1.0, 10.0] {
            let cfg = SelectionConfig {
                objective: SelectionObjective::PreferenceLikelihood { beta },
                ..Default::default()
            };
            assert_eq!(greedy_select(&pair, &lib, &cfg, &oracle).unwrap().members, reference.members);
        }
    }

    #[test]
    fn dataset_objective_cases() {
        let oracle = planted_oracle(10, &[1, 2, 3], 0.0);
        let pairs: Vec<_> =
            (0..4).map(|i| aligned_pair(&oracle, &format!("p{i}"), &format!("prompt {i}"))).collect();
        assert_eq!(dataset_objective(&[], &pairs, &oracle).unwrap(), 0.0);
        assert_eq!(dataset_objective(&ids(&[1, 2, 3]), &pairs, &oracle).unwrap(), 3.0);
        assert_eq!(dataset_objective(&ids(&[1, 9]), &pairs, &oracle).unwrap(), 1.0);

        let noisy = planted_oracle(10, &[1, 2, 3], 0.4);
        let single = &pairs[..1];
        let f = dataset_objective(&ids(&[2, 5]), single, &noisy).unwrap();
        let expect = pair_gap(&noisy, &pairs[0], &ids(&[2, 5])).unwrap() - pair_gap(&noisy, &pairs[0], &[]).unwrap();
        assert_eq!(f, expect);
    }

    #[test]
    fn gamma_of_modular_function_is_one() {
        let lib = load_default_library().truncated(8).unwrap();
        let oracle = planted_oracle(8, &[0, 3, 6], 0.0);
        let pairs: Vec<_> = (0..3).map(|i| aligned_pair(&oracle, &format!("p{i}"), &format!("q{i}"))).collect();
        let g = estimate_gamma(&pairs, &lib, &oracle).unwrap();
        assert_eq!(g.gamma_hat, 1.0);
        assert_eq!(g.gamma_raw, Some(1.0));
    }

    #[test]
    fn gamma_single_attribute_is_one() {
        let lattice = ObjectiveLattice::from_values(1, vec![0.0, 2.5]);
        let g = estimate_gamma_from_lattice(&lattice);
        assert_eq!(g.gamma_hat, 1.0);
        assert_eq!(g.pairs_considered, 1);
    }

    #[test]
    fn gamma_hand_computed_supermodular() {
        // F(∅)=0, F(a)=1, F(b)=1, F(ab)=4 → S=∅, L={a,b}: (1+1)/4 = 0.5
        let lattice = ObjectiveLattice::from_values(2, vec![0.0, 1.0, 1.0, 4.0]);
        let g = estimate_gamma_from_lattice(&lattice);
        assert_eq!(g.gamma_hat, 0.5);
        assert!(g.argmin_s.is_empty());
        assert_eq!(g.argmin_l, ids(&[0, 1]));
    }

    #[test]
    fn interaction_oracle_has_gamma_below_one() {
        let lib = load_default_library().truncated(8).unwrap();
        let oracle = SyntheticOracle::new(
            SyntheticOracleSpec::planted(21, 8, 1.0, 0.0, vec![ids(&[0, 3, 6])]).with_interaction(0.5, 0.3),
        )
        .unwrap();
        let pairs: Vec<_> = (0..3).map(|i| aligned_pair(&oracle, &format!("p{i}"), &format!("q{i}"))).collect();
        let g = estimate_gamma(&pairs, &lib, &oracle).unwrap();
        assert!(g.gamma_hat < 1.0, "{g:?}");
    }

    #[test]
    fn audit_on_modular_instance() {
        let lib = load_default_library().truncated(8).unwrap();
        let oracle = planted_oracle(8, &[1, 2, 5], 0.0);
        let pairs: Vec<_> = (0..2).map(|i| aligned_pair(&oracle, &format!("p{i}"), &format!("q{i}"))).collect();
        let report = audit_greedy_bound(&pairs, &lib, 3, true, &oracle).unwrap();
        assert_eq!(report.ratio, Some(1.0));
        assert_eq!(report.gap, 0.0);
        assert!((report.bound_factor - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(!report.violation);
        assert!(report.monotone_on_lattice);
        assert_eq!(report.subset_values.len(), 256);
    }

    #[test]
    fn build_index_dedups_by_prompt() {
        let lib = load_default_library().truncated(10).unwrap();
        let oracle = planted_oracle(10, &[1, 2, 3], 0.0);
        let e = HashingEmbedder::new(16, 0).unwrap();
        let a = aligned_pair(&oracle, "a", "same prompt");
        // second pair on the same prompt whose chosen response is unaligned → lower objective
        let b = PreferencePair { pair_id: "b".into(), ..a.swapped() };
        let c = aligned_pair(&oracle, "c", "other prompt");
        let memory = build_index(&[b, a, c], &lib, &SelectionConfig::default(), &oracle, &e).unwrap();
        assert_eq!(memory.len(), 2);
        let first = &memory.entries()[0];
        assert_eq!(first.prompt, "same prompt");
        assert_eq!(first.objective, 3.0);
        assert_eq!(first.pair_ids, vec!["b".to_string(), "a".to_string()]);
        assert_eq!(first.seq, 0);
        assert_eq!(memory.entries()[1].seq, 1);
        assert!(memory.validate().is_ok());
    }

    #[test]
    fn build_index_rejects_mixed_users() {
        let lib = load_default_library().truncated(4).unwrap();
        let oracle = planted_oracle(4, &[1], 0.0);
        let e = HashingEmbedder::new(16, 0).unwrap();
        let a = aligned_pair(&oracle, "a", "x");
        let b = PreferencePair { user_id: "v".into(), ..aligned_pair(&oracle, "b", "y") };
        assert!(matches!(
            build_index(&[a, b], &lib, &SelectionConfig::default(), &oracle, &e),
            Err(SelectionError::MixedUsers(..))
        ));
    }
}
