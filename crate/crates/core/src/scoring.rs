//! Conditional log-probability scoring, log π(y | x, A).
//!
//! Every consumer (greedy selection, evaluation, audits) talks to a
//! [`Scorer`]. The empty subset is the base policy π(y | x); a non-empty
//! subset is the attribute-conditioned policy π(y | x, A), i.e. the base
//! model reading the prompt with an `Attributes:` block appended.
//!
//! Two implementations ship with the crate: [`SyntheticOracle`], a seeded
//! closed-form scorer with planted per-topic preferences, and
//! [`crate::remote::RemoteScorer`], which asks an OpenAI-compatible
//! completions endpoint for echoed prompt log-probs.
//!
//! Partition functions never appear here: they are constant in the response
//! and cancel in every pairwise difference this crate computes.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::attribute::{AttributeId, PreferencePair};
use crate::backend::BackendError;
use crate::hashing::StableHasher;

/// Summed natural-log probability of a response's tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogProbScore {
    pub value: f64,
    pub token_count: usize,
}

pub trait Scorer: Send + Sync {
    /// log π(response | prompt, subset). Subset order is the order attributes
    /// would be listed in the prompt.
    fn score(
        &self,
        prompt: &str,
        subset: &[AttributeId],
        response: &str,
    ) -> Result<LogProbScore, BackendError>;

    /// Whether repeated calls with the same inputs are guaranteed to agree.
    fn deterministic(&self) -> bool {
        true
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, p: &str, a: &[AttributeId], r: &str) -> Result<LogProbScore, BackendError> {
        (**self).score(p, a, r)
    }
    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, p: &str, a: &[AttributeId], r: &str) -> Result<LogProbScore, BackendError> {
        (**self).score(p, a, r)
    }
    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn score(&self, p: &str, a: &[AttributeId], r: &str) -> Result<LogProbScore, BackendError> {
        (**self).score(p, a, r)
    }
    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    /// KL-regularization strength. Only rescales rewards; never changes a ranking.
    pub beta: f64,
    pub max_response_tokens: usize,
    pub request_timeout_secs: f64,
    pub retry_limit: u32,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { beta: 1.0, max_response_tokens: 4096, request_timeout_secs: 60.0, retry_limit: 2 }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(format!("beta must be positive and finite, got {}", self.beta));
        }
        if self.max_response_tokens == 0 {
            return Err("max_response_tokens must be positive".into());
        }
        Ok(())
    }
}

/// log π(y_w | x, A) − log π(y_l | x, A).
pub fn pair_gap<S: Scorer + ?Sized>(
    scorer: &S,
    pair: &PreferencePair,
    subset: &[AttributeId],
) -> Result<f64, BackendError> {
    let chosen = scorer.score(&pair.prompt, subset, &pair.chosen)?;
    let rejected = scorer.score(&pair.prompt, subset, &pair.rejected)?;
    Ok(chosen.value - rejected.value)
}

/// β · (log π^A(y | x) − log π(y | x)), the attribute-induced reward up to the
/// response-independent β log Z^A(x) term.
pub fn implicit_reward<S: Scorer + ?Sized>(
    scorer: &S,
    beta: f64,
    prompt: &str,
    subset: &[AttributeId],
    response: &str,
) -> Result<f64, BackendError> {
    if subset.is_empty() {
        return Ok(0.0);
    }
    let conditioned = scorer.score(prompt, subset, response)?;
    let base = scorer.score(prompt, &[], response)?;
    Ok(beta * (conditioned.value - base.value))
}

/// Numerically stable log σ(z).
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Bradley–Terry probability that y_w beats y_l given the two implicit rewards.
pub fn preference_probability(reward_chosen: f64, reward_rejected: f64) -> f64 {
    log_sigmoid(reward_chosen - reward_rejected).exp()
}

// ---------------------------------------------------------------------------
// Synthetic oracle
// ---------------------------------------------------------------------------

/// Per-topic attribute weights of the synthetic oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPreference {
    /// Ground-truth attribute set for this topic.
    pub planted: Vec<AttributeId>,
    /// Unary weight of every library attribute when the response is aligned.
    pub weights: Vec<f64>,
}

/// Pairwise attribute interactions; turns the modular oracle into a
/// weakly submodular one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    /// Pairwise terms are drawn uniformly from `[-rho, rho)`.
    pub rho: f64,
    /// Non-planted attributes get a unary weight in `[0, background · s)`.
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOracleSpec {
    pub seed: u64,
    pub library_size: usize,
    pub signal_strength: f64,
    pub noise_scale: f64,
    pub topics: Vec<TopicPreference>,
    /// Optional keyword lists, one per topic, used to route prompts to topics.
    /// Prompts without any keyword hit fall back to a hash of the prompt.
    #[serde(default)]
    pub topic_keywords: Vec<Vec<String>>,
    #[serde(default)]
    pub interaction: Option<Interaction>,
}

impl SyntheticOracleSpec {
    /// Modular oracle: planted attributes weigh `s`, everything else 0.
    pub fn planted(
        seed: u64,
        library_size: usize,
        signal_strength: f64,
        noise_scale: f64,
        planted: Vec<Vec<AttributeId>>,
    ) -> Self {
        let topics = planted
            .into_iter()
            .map(|ids| {
                let mut weights = vec![0.0; library_size];
                for id in &ids {
                    if let Some(w) = weights.get_mut(id.index()) {
                        *w = signal_strength;
                    }
                }
                TopicPreference { planted: ids, weights }
            })
            .collect();
        Self {
            seed,
            library_size,
            signal_strength,
            noise_scale,
            topics,
            topic_keywords: Vec::new(),
            interaction: None,
        }
    }

    /// Attributes planted for another topic count `-s` for this one, so a
    /// subset that helps one topic actively hurts the others.
    pub fn with_conflict(mut self) -> Self {
        let s = self.signal_strength;
        let planted: Vec<Vec<AttributeId>> = self.topics.iter().map(|t| t.planted.clone()).collect();
        for (t, topic) in self.topics.iter_mut().enumerate() {
            for (other, ids) in planted.iter().enumerate() {
                if other == t {
                    continue;
                }
                for id in ids {
                    if !topic.planted.contains(id) {
                        if let Some(w) = topic.weights.get_mut(id.index()) {
                            *w = -s;
                        }
                    }
                }
            }
        }
        self
    }

    pub fn with_interaction(mut self, rho: f64, background: f64) -> Self {
        let s = self.signal_strength;
        for (t, topic) in self.topics.iter_mut().enumerate() {
            for (a, w) in topic.weights.iter_mut().enumerate() {
                if *w == 0.0 && !topic.planted.iter().any(|id| id.index() == a) {
                    let u = StableHasher::new(self.seed).str("background").u64(t as u64).u64(a as u64).unit();
                    *w = background * s * u;
                }
            }
        }
        self.interaction = Some(Interaction { rho, background });
        self
    }

    pub fn with_keywords(mut self, keywords: Vec<Vec<String>>) -> Self {
        self.topic_keywords = keywords;
        self
    }

    pub fn topic_count(&self) -> usize {
        self.topics.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.topics.is_empty() {
            return Err("oracle needs at least one topic".into());
        }
        if !(self.signal_strength > 0.0 && self.signal_strength.is_finite()) {
            return Err("signal strength must be positive".into());
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err("noise scale must be non-negative".into());
        }
        if !self.topic_keywords.is_empty() && self.topic_keywords.len() != self.topics.len() {
            return Err("topic_keywords must have one list per topic".into());
        }
        let mut seen: Vec<Vec<AttributeId>> = Vec::new();
        for (t, topic) in self.topics.iter().enumerate() {
            if topic.weights.len() != self.library_size {
                return Err(format!("topic {t} has {} weights for a library of {}", topic.weights.len(), self.library_size));
            }
            if topic.weights.iter().any(|w| !w.is_finite()) {
                return Err(format!("topic {t} has a non-finite weight"));
            }
            if let Some(id) = topic.planted.iter().find(|id| id.index() >= self.library_size) {
                return Err(format!("topic {t} plants attribute {id} outside the library"));
            }
            let mut canonical = topic.planted.clone();
            canonical.sort_unstable();
            canonical.dedup();
            if seen.contains(&canonical) {
                return Err(format!("topic {t} repeats another topic's planted subset"));
            }
            seen.push(canonical);
        }
        if let Some(i) = &self.interaction {
            if !(i.rho >= 0.0 && i.rho.is_finite()) {
                return Err("interaction rho must be non-negative".into());
            }
        }
        Ok(())
    }
}

/// Closed-form scorer with planted, topic-dependent preferences.
///
/// ```text
/// score(y | x, A) = base(x)
///                 + match(y) · [ Σ_{a∈A} w_{t(x)}(a) + Σ_{a<b∈A} ρ·h_{t(x)}(a,b) ]
///                 + noise_scale · (u(x, y, A) − ½)
/// ```
///
/// `base(x)` depends on the prompt only, so the base policy is indifferent
/// between two responses. `match(y)` is 1 for responses the latent user
/// likes and 0 otherwise; it is a seeded hash bit of the response text (see
/// [`SyntheticOracle::is_aligned`]). `t(x)` routes the prompt to a topic.
/// Without interactions the attribute term is modular in A.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    spec: SyntheticOracleSpec,
}

impl SyntheticOracle {
    pub fn new(spec: SyntheticOracleSpec) -> Result<Self, String> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &SyntheticOracleSpec {
        &self.spec
    }

    pub fn topic_of(&self, prompt: &str) -> usize {
        let topics = self.spec.topics.len();
        if !self.spec.topic_keywords.is_empty() {
            let words = crate::retrieval::words(prompt);
            let mut best = (0usize, 0usize);
            for (t, keywords) in self.spec.topic_keywords.iter().enumerate() {
                let hits = words.iter().filter(|w| keywords.iter().any(|k| k == *w)).count();
                if hits > best.1 {
                    best = (t, hits);
                }
            }
            if best.1 > 0 {
                return best.0;
            }
        }
        (StableHasher::new(self.spec.seed).str("topic").str(prompt).finish() % topics as u64) as usize
    }

    /// Whether the latent user likes this response (`match(y) = 1`).
    pub fn is_aligned(&self, response: &str) -> bool {
        StableHasher::new(self.spec.seed).str("align").str(response).finish() & 1 == 1
    }

    /// Prompt-only baseline log-prob. A multiple of 1/32, so sums with
    /// dyadic weights stay exact.
    fn base(&self, prompt: &str) -> f64 {
        let u = StableHasher::new(self.spec.seed).str("base").str(prompt).unit();
        -(8.0 + (u * 512.0).floor() / 32.0)
    }

    fn attribute_term(&self, topic: usize, canonical: &[AttributeId]) -> f64 {
        let pref = &self.spec.topics[topic];
        let mut total: f64 = canonical.iter().map(|id| pref.weights[id.index()]).sum();
        if let Some(inter) = self.spec.interaction {
            for (i, a) in canonical.iter().enumerate() {
                for b in &canonical[i + 1..] {
                    let u = StableHasher::new(self.spec.seed)
                        .str("pair")
                        .u64(topic as u64)
                        .u64(u64::from(a.0))
                        .u64(u64::from(b.0))
                        .unit();
                    total += inter.rho * (2.0 * u - 1.0);
                }
            }
        }
        total
    }

    fn canonical(&self, subset: &[AttributeId]) -> Result<Vec<AttributeId>, BackendError> {
        let mut ids = subset.to_vec();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(BackendError::InvalidInput("subset lists an attribute twice".into()));
        }
        if let Some(id) = ids.iter().find(|id| id.index() >= self.spec.library_size) {
            return Err(BackendError::InvalidInput(format!("attribute {id} outside the oracle library")));
        }
        Ok(ids)
    }
}

impl Scorer for SyntheticOracle {
    fn score(
        &self,
        prompt: &str,
        subset: &[AttributeId],
        response: &str,
    ) -> Result<LogProbScore, BackendError> {
        if prompt.is_empty() || response.is_empty() {
            return Err(BackendError::InvalidInput("prompt and response must be non-empty".into()));
        }
        let canonical = self.canonical(subset)?;
        let mut value = self.base(prompt);
        if self.is_aligned(response) {
            value += self.attribute_term(self.topic_of(prompt), &canonical);
        }
        if self.spec.noise_scale > 0.0 {
            let mut h = StableHasher::new(self.spec.seed).str("noise").str(prompt).str(response);
            for id in &canonical {
                h = h.u64(u64::from(id.0));
            }
            value += self.spec.noise_scale * (h.unit() - 0.5);
        }
        Ok(LogProbScore { value, token_count: response.split_whitespace().count() })
    }
}

// ---------------------------------------------------------------------------
// Wrappers
// ---------------------------------------------------------------------------

/// Memoizes scores keyed by (prompt, response, canonical subset).
///
/// Orderings of the same subset share one cache slot; for remote backends
/// the first ordering scored wins.
pub struct ScoreCache<S> {
    inner: S,
    cache: Mutex<HashMap<(String, String, Vec<AttributeId>), LogProbScore>>,
}

impl<S: Scorer> ScoreCache<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("score cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: Scorer> Scorer for ScoreCache<S> {
    fn score(&self, p: &str, a: &[AttributeId], r: &str) -> Result<LogProbScore, BackendError> {
        let mut canonical = a.to_vec();
        canonical.sort_unstable();
        let key = (p.to_owned(), r.to_owned(), canonical);
        if let Some(hit) = self.cache.lock().expect("score cache poisoned").get(&key) {
            return Ok(*hit);
        }
        let score = self.inner.score(p, a, r)?;
        self.cache.lock().expect("score cache poisoned").insert(key, score);
        Ok(score)
    }

    fn deterministic(&self) -> bool {
        self.inner.deterministic()
    }
}

/// Counts scorer invocations, split by base-policy and attribute-conditioned calls.
pub struct CountingScorer<S> {
    inner: S,
    base_calls: AtomicU64,
    conditioned_calls: AtomicU64,
}

impl<S: Scorer> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, base_calls: AtomicU64::new(0), conditioned_calls: AtomicU64::new(0) }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn calls(&self) -> u64 {
        self.base_calls() + self.conditioned_calls()
    }

    /// Calls with an empty subset.
    pub fn base_calls(&self) -> u64 {
        self.base_calls.load(Ordering::Relaxed)
    }

    /// Calls with a non-empty subset.
    pub fn conditioned_calls(&self) -> u64 {
        self.conditioned_calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.base_calls.store(0, Ordering::Relaxed);
        self.conditioned_calls.store(0, Ordering::Relaxed);
    }
}

impl<S: Scorer> Scorer for CountingScorer<S> {
    fn score(&self, p: &str, a: &[AttributeId], r: &str) -> Result<LogProbScore, BackendError> {
        if a.is_empty() { &self.base_calls } else { &self.conditioned_calls }.fetch_add(1, Ordering::Relaxed);
        self.inner.score(p, a, r)
    }

    fn deterministic(&self) -> bool {
        self.inner.deterministic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribute::load_default_library;

    fn ids(v: &[u16]) -> Vec<AttributeId> {
        v.iter().copied().map(AttributeId).collect()
    }

    /// A (chosen, rejected) pair of responses whose alignment bits are (1, 0).
    fn aligned_pair(oracle: &SyntheticOracle, tag: &str) -> (String, String) {
        let mut chosen = None;
        let mut rejected = None;
        for i in 0.. {
            let r = format!("{tag} response {i}");
            match (oracle.is_aligned(&r), &chosen, &rejected) {
                (true, None, _) => chosen = Some(r),
                (false, _, None) => rejected = Some(r),
                _ => {}
            }
            if chosen.is_some() && rejected.is_some() {
                break;
            }
        }
        (chosen.unwrap(), rejected.unwrap())
    }

    fn fcp() -> Vec<AttributeId> {
        let lib = load_default_library();
        ["Formal", "Concise", "Principled"].iter().map(|n| lib.id_of(n).unwrap()).collect()
    }

    fn oracle(noise: f64) -> SyntheticOracle {
        SyntheticOracle::new(SyntheticOracleSpec::planted(11, 42, 1.0, noise, vec![fcp()])).unwrap()
    }

    #[test]
    fn planted_subset_gap_is_s_times_k() {
        let o = oracle(0.0);
        let (w, l) = aligned_pair(&o, "a");
        let pair = PreferencePair::new("p", "u", "explain tides", w, l);
        assert_eq!(pair_gap(&o, &pair, &fcp()).unwrap(), 3.0);
        assert_eq!(pair_gap(&o, &pair, &[]).unwrap(), 0.0);

        let noisy = oracle(0.2);
        let g = pair_gap(&noisy, &pair, &fcp()).unwrap();
        assert!((g - 3.0).abs() <= 0.2, "{g}");
        assert!(pair_gap(&noisy, &pair, &[]).unwrap().abs() <= 0.2);
    }

    #[test]
    fn planted_subset_beats_every_other_triple() {
        let o = oracle(0.0);
        let (w, l) = aligned_pair(&o, "b");
        let pair = PreferencePair::new("p", "u", "explain tides", w, l);
        let best = pair_gap(&o, &pair, &fcp()).unwrap();
        let mut planted_hits = 0;
        for a in 0..42u16 {
            for b in a + 1..42 {
                for c in b + 1..42 {
                    let g = pair_gap(&o, &pair, &ids(&[a, b, c])).unwrap();
                    assert!(g <= best);
                    if g == best {
                        planted_hits += 1;
                    }
                }
            }
        }
        assert_eq!(planted_hits, 1);
    }

    #[test]
    fn gap_is_antisymmetric() {
        let o = SyntheticOracle::new(
            SyntheticOracleSpec::planted(5, 42, 1.0, 0.3, vec![fcp()]).with_interaction(0.4, 0.3),
        )
        .unwrap();
        let pair = PreferencePair::new("p", "u", "why is the sky blue", "short answer", "long answer");
        for subset in [vec![], ids(&[1]), ids(&[2, 9, 30]), ids(&[40, 0])] {
            let g = pair_gap(&o, &pair, &subset).unwrap();
            let s = pair_gap(&o, &pair.swapped(), &subset).unwrap();
            assert!((g + s).abs() <= 1e-12);
        }
    }

    #[test]
    fn scores_are_deterministic() {
        let o = oracle(0.5);
        let a = o.score("q", &ids(&[1, 2]), "r").unwrap();
        let b = o.score("q", &ids(&[2, 1]), "r").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.token_count, 1);
        assert!(o.deterministic());
    }

    #[test]
    fn implicit_reward_cases() {
        let o = oracle(0.0);
        let (w, _) = aligned_pair(&o, "c");
        assert_eq!(implicit_reward(&o, 1.0, "q", &[], &w).unwrap(), 0.0);
        let r1 = implicit_reward(&o, 1.0, "q", &fcp(), &w).unwrap();
        let r2 = implicit_reward(&o, 2.0, "q", &fcp(), &w).unwrap();
        assert_eq!(r1, 3.0);
        assert_eq!(r2, 2.0 * r1);

        let noisy = oracle(0.25);
        let r = implicit_reward(&noisy, 1.0, "q", &fcp(), &w).unwrap();
        assert!((r - 3.0).abs() <= 2.0 * 0.25);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let o = oracle(0.0);
        assert!(o.score("", &[], "r").is_err());
        assert!(o.score("q", &ids(&[42]), "r").is_err());
        assert!(o.score("q", &ids(&[3, 3]), "r").is_err());
        let same = SyntheticOracleSpec::planted(1, 42, 1.0, 0.0, vec![fcp(), fcp()]);
        assert!(SyntheticOracle::new(same).is_err());
    }

    #[test]
    fn conflict_makes_foreign_attributes_negative() {
        let spec = SyntheticOracleSpec::planted(1, 10, 1.0, 0.0, vec![ids(&[0, 1]), ids(&[2, 3])])
            .with_conflict();
        assert_eq!(spec.topics[0].weights[2], -1.0);
        assert_eq!(spec.topics[1].weights[0], -1.0);
        assert_eq!(spec.topics[0].weights[0], 1.0);
        assert_eq!(spec.topics[0].weights[5], 0.0);
    }

    #[test]
    fn keyword_routing_and_fallback() {
        let spec = SyntheticOracleSpec::planted(1, 10, 1.0, 0.0, vec![ids(&[0]), ids(&[1])])
            .with_keywords(vec![vec!["recipe".into()], vec!["rust".into()]]);
        let o = SyntheticOracle::new(spec).unwrap();
        assert_eq!(o.topic_of("a Recipe for soup"), 0);
        assert_eq!(o.topic_of("borrowing in rust"), 1);
        let t = o.topic_of("something unrelated");
        assert!(t < 2);
        assert_eq!(t, o.topic_of("something unrelated"));
    }

    #[test]
    fn counting_and_cache() {
        let counting = CountingScorer::new(oracle(0.1));
        let cached = ScoreCache::new(&counting);
        cached.score("q", &[], "r").unwrap();
        cached.score("q", &ids(&[1, 2]), "r").unwrap();
        cached.score("q", &ids(&[2, 1]), "r").unwrap();
        cached.score("q", &[], "r").unwrap();
        assert_eq!(counting.base_calls(), 1);
        assert_eq!(counting.conditioned_calls(), 1);
        assert_eq!(cached.len(), 2);
        counting.reset();
        assert_eq!(counting.calls(), 0);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(log_sigmoid(-800.0).is_finite());
        assert_eq!(log_sigmoid(800.0), 0.0);
        assert!((preference_probability(2.0, 1.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    // KL-regularized optimum over a finite response set:
    //   max_π Σ π r − β Σ π log(π / π_base)
    // is attained by π_r ∝ π_base · exp(r / β), and the reward is recovered as
    // r = β log(π_r / π_base) + β log Z. Checked numerically here on random
    // instances by perturbing the optimum inside the simplex.
    fn kl_objective(pi: &[f64], base: &[f64], reward: &[f64], beta: f64) -> f64 {
        pi.iter()
            .zip(base)
            .zip(reward)
            .map(|((p, b), r)| if *p > 0.0 { p * r - beta * p * (p / b).ln() } else { 0.0 })
            .sum()
    }

    #[test]
    fn kl_regularized_optimum_and_reward_recovery() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(2..8);
            let beta = rng.random_range(0.1..5.0);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let base: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let reward: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();

            let z: f64 = base.iter().zip(&reward).map(|(b, r)| b * (r / beta).exp()).sum();
            let optimum: Vec<f64> =
                base.iter().zip(&reward).map(|(b, r)| b * (r / beta).exp() / z).collect();
            assert!((optimum.iter().sum::<f64>() - 1.0).abs() < 1e-12);

            for ((p, b), r) in optimum.iter().zip(&base).zip(&reward) {
                let recovered = beta * (p / b).ln() + beta * z.ln();
                assert!((recovered - r).abs() < 1e-9);
            }

            let best = kl_objective(&optimum, &base, &reward, beta);
            for _ in 0..20 {
                let i = rng.random_range(0..n);
                let j = (i + 1 + rng.random_range(0..n - 1)) % n;
                let eps = rng.random_range(0.0..1.0) * optimum[i];
                let mut other = optimum.clone();
                other[i] -= eps;
                other[j] += eps;
                assert!(kl_objective(&other, &base, &reward, beta) <= best + 1e-12);
            }
        }
    }
}
