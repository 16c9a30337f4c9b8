use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::embed::{dot, norm, normalize, Embedder};
use super::RetrievalError;
use crate::attribute::AttributeSubset;

pub const NORM_TOLERANCE: f64 = 1e-6;

/// One deduplicated prompt with the attribute subset inferred for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub prompt: String,
    pub embedding: Vec<f32>,
    pub subset: AttributeSubset,
    /// Pair gap achieved by `subset` on the pair that produced it.
    pub objective: f64,
    pub seq: u64,
    /// Ids of every training pair that carried this prompt.
    #[serde(default)]
    pub pair_ids: Vec<String>,
}

/// Per-user collection of index entries, ordered by `seq`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMemory {
    pub user_id: String,
    pub dim: usize,
    pub library_hash: Option<String>,
    entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub entry: IndexEntry,
    pub similarity: f64,
    pub runner_up_similarity: Option<f64>,
    /// `similarity - runner_up_similarity`, infinite for a single-entry memory.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Added,
    Replaced,
    Kept,
}

impl UserMemory {
    pub fn new(user_id: impl Into<String>, dim: usize) -> Self {
        Self { user_id: user_id.into(), dim, library_hash: None, entries: Vec::new() }
    }

    pub fn with_library_hash(mut self, hash: impl Into<String>) -> Self {
        self.library_hash = Some(hash.into());
        self
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, prompt: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.prompt == prompt)
    }

    fn next_seq(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.seq + 1)
    }

    /// Checks every invariant, reporting the offending entry index.
    pub fn validate(&self) -> Result<(), (usize, String)> {
        if self.dim < 2 {
            return Err((0, format!("dimension {} is below 2", self.dim)));
        }
        let mut prompts = HashSet::with_capacity(self.entries.len());
        let mut last_seq = None;
        for (i, e) in self.entries.iter().enumerate() {
            check_entry(e, self.dim).map_err(|r| (i, r))?;
            if !prompts.insert(e.prompt.as_str()) {
                return Err((i, format!("duplicate prompt {:?}", e.prompt)));
            }
            if last_seq.is_some_and(|s| e.seq <= s) {
                return Err((i, format!("seq {} does not increase", e.seq)));
            }
            last_seq = Some(e.seq);
        }
        Ok(())
    }

    pub(crate) fn from_entries_unchecked(
        user_id: String,
        dim: usize,
        library_hash: Option<String>,
        entries: Vec<IndexEntry>,
    ) -> Self {
        Self { user_id, dim, library_hash, entries }
    }

    /// Inserts a pre-embedded entry under the dedup rule: an existing prompt
    /// is replaced only by a strictly higher objective, and keeps its `seq`.
    pub fn append_entry(&mut self, mut entry: IndexEntry) -> Result<AppendOutcome, RetrievalError> {
        if entry.embedding.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, found: entry.embedding.len() });
        }
        check_entry(&entry, self.dim).map_err(RetrievalError::InvalidEntry)?;
        if let Some(existing) = self.entries.iter_mut().find(|e| e.prompt == entry.prompt) {
            let mut merged_ids = existing.pair_ids.clone();
            for id in &entry.pair_ids {
                if !merged_ids.contains(id) {
                    merged_ids.push(id.clone());
                }
            }
            let outcome = if entry.objective > existing.objective {
                entry.seq = existing.seq;
                *existing = entry;
                AppendOutcome::Replaced
            } else {
                AppendOutcome::Kept
            };
            existing.pair_ids = merged_ids;
            return Ok(outcome);
        }
        entry.seq = self.next_seq();
        self.entries.push(entry);
        Ok(AppendOutcome::Added)
    }

    /// Embeds `prompt` and appends it with `subset` (online memory update).
    pub fn append<E: Embedder + ?Sized>(
        &mut self,
        prompt: &str,
        subset: AttributeSubset,
        objective: f64,
        embedder: &E,
    ) -> Result<AppendOutcome, RetrievalError> {
        if embedder.dimension() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, found: embedder.dimension() });
        }
        let embedding = embedder.embed(prompt)?;
        self.append_entry(IndexEntry {
            prompt: prompt.to_owned(),
            embedding,
            subset,
            objective,
            seq: 0,
            pair_ids: Vec::new(),
        })
    }

    /// Top-1 exact cosine retrieval for a prompt.
    pub fn retrieve<E: Embedder + ?Sized>(
        &self,
        prompt: &str,
        embedder: &E,
    ) -> Result<RetrievalResult, RetrievalError> {
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyMemory);
        }
        if embedder.dimension() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, found: embedder.dimension() });
        }
        let query = embedder.embed(prompt)?;
        self.retrieve_vector(&query)
    }

    /// Top-1 retrieval for an already computed query vector (normalized here).
    /// Ties go to the lowest `seq`.
    pub fn retrieve_vector(&self, query: &[f32]) -> Result<RetrievalResult, RetrievalError> {
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyMemory);
        }
        if query.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch { expected: self.dim, found: query.len() });
        }
        let wide: Vec<f64> = query.iter().map(|x| f64::from(*x)).collect();
        let query = normalize(&wide).ok_or(RetrievalError::ZeroQuery)?;

        let mut best = (0usize, f64::NEG_INFINITY);
        let mut second = f64::NEG_INFINITY;
        for (i, e) in self.entries.iter().enumerate() {
            let sim = dot(&query, &e.embedding);
            if sim > best.1 {
                second = best.1;
                best = (i, sim);
            } else if sim > second {
                second = sim;
            }
        }
        let runner_up = (self.entries.len() > 1).then_some(second);
        Ok(RetrievalResult {
            entry: self.entries[best.0].clone(),
            similarity: best.1,
            runner_up_similarity: runner_up,
            margin: runner_up.map_or(f64::INFINITY, |s| best.1 - s),
        })
    }
}

fn check_entry(e: &IndexEntry, dim: usize) -> Result<(), String> {
    if e.prompt.is_empty() {
        return Err("empty prompt".into());
    }
    if e.embedding.len() != dim {
        return Err(format!("embedding has {} dimensions, expected {dim}", e.embedding.len()));
    }
    let n = norm(&e.embedding);
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(format!("embedding norm {n} is not 1"));
    }
    if !e.objective.is_finite() {
        return Err("objective is not finite".into());
    }
    let mut seen = HashSet::new();
    if !e.subset.members.iter().all(|id| seen.insert(*id)) {
        return Err("attribute subset has duplicates".into());
    }
    if !e.subset.gains.is_empty() && e.subset.gains.len() != e.subset.members.len() {
        return Err("gain trace length differs from member count".into());
    }
    Ok(())
}
