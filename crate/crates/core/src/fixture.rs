//! Seeded synthetic users for the synthetic backend and the test suites.
//!
//! Prompts are built from per-topic vocabularies, so the hashing embedder
//! groups them by topic and the oracle routes them by the same keywords.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribute::{load_default_library, AttributeId, AttributeLibrary, PreferencePair};
use crate::scoring::{SyntheticOracle, SyntheticOracleSpec};

/// Keyword vocabulary per topic: cooking, tech support, data analysis, personal advice.
pub const TOPIC_VOCABULARY: [&[&str]; 4] = [
    &[
        "recipe", "bake", "oven", "flour", "garlic", "simmer", "sauce", "roast", "dough", "spices", "pasta",
        "broth", "knead", "skillet", "marinade", "dessert",
    ],
    &[
        "laptop", "router", "wifi", "driver", "reboot", "printer", "bluetooth", "firmware", "battery",
        "monitor", "keyboard", "password", "update", "cable", "screen", "charger",
    ],
    &[
        "dataset", "regression", "variance", "histogram", "outliers", "pandas", "correlation", "sampling",
        "median", "query", "pipeline", "features", "cluster", "forecast", "metrics", "spreadsheet",
    ],
    &[
        "friend", "lonely", "breakup", "motivation", "stress", "family", "career", "anxious", "gratitude",
        "habits", "sleep", "argument", "confidence", "partner", "grief", "burnout",
    ],
];

const FILLERS: &[&str] = &["how", "should", "i", "my", "the", "what", "best", "way", "to", "with"];

/// Ground-truth attribute names planted for each topic.
pub const DEFAULT_PLANTED: [[&str; 3]; 4] = [
    ["Formal", "Concise", "Principled"],
    ["Humor", "Vivid", "Internet Slang"],
    ["Analytic", "Code", "Engineer"],
    ["Empathetic", "Storyteller", "Easy"],
];

pub const DEFAULT_NOISE: f64 = 0.1;

fn planted_ids(library: &AttributeLibrary, topics: usize) -> Vec<Vec<AttributeId>> {
    DEFAULT_PLANTED[..topics]
        .iter()
        .map(|names| names.iter().map(|n| library.id_of(n).expect("default attribute")).collect())
        .collect()
}

fn keywords(topics: usize) -> Vec<Vec<String>> {
    TOPIC_VOCABULARY[..topics].iter().map(|v| v.iter().map(|w| (*w).to_owned()).collect()).collect()
}

/// Oracle over the default 42-attribute library with `topics` (1..=4)
/// conflicting topic preferences and keyword routing.
pub fn default_oracle(seed: u64, topics: usize, noise: f64) -> SyntheticOracle {
    let topics = topics.clamp(1, DEFAULT_PLANTED.len());
    let library = load_default_library();
    let spec = SyntheticOracleSpec::planted(seed, library.len(), 1.0, noise, planted_ids(&library, topics))
        .with_conflict()
        .with_keywords(keywords(topics));
    SyntheticOracle::new(spec).expect("default oracle spec is valid")
}

/// A prompt of 4..=6 topic words with two distinct filler words mixed in.
pub fn topic_prompt(rng: &mut impl Rng, topic: usize) -> String {
    let vocab = TOPIC_VOCABULARY[topic];
    let n = rng.random_range(4..=6);
    let mut words: Vec<&str> = vocab.choose_multiple(rng, n).copied().collect();
    let fillers: Vec<&str> = FILLERS.choose_multiple(rng, 2).copied().collect();
    for filler in fillers {
        let pos = rng.random_range(0..=words.len());
        words.insert(pos, filler);
    }
    words.join(" ")
}

/// Rewords a topic prompt by replacing one of its topic words with another
/// word of the same topic. Fillers and word order are kept, so the result
/// stays nearer to its source than to prompts of other topics.
pub fn paraphrase(rng: &mut impl Rng, topic: usize, source: &str) -> String {
    let vocab = TOPIC_VOCABULARY[topic];
    let mut words: Vec<&str> = source.split(' ').collect();
    let slots: Vec<usize> = (0..words.len()).filter(|i| vocab.contains(&words[*i])).collect();
    let unused: Vec<&str> = vocab.iter().copied().filter(|w| !words.contains(w)).collect();
    if let (Some(pos), Some(new)) = (slots.choose(rng), unused.choose(rng)) {
        words[*pos] = new;
    }
    words.join(" ")
}

/// First response of the form `"<stem> <i>"` whose alignment bit equals `aligned`.
pub fn response_with_alignment(oracle: &SyntheticOracle, stem: &str, aligned: bool) -> String {
    (0u32..)
        .map(|i| format!("{stem} {i}"))
        .find(|r| oracle.is_aligned(r) == aligned)
        .expect("alignment bits are balanced")
}

/// A pair whose chosen response is aligned with the user and the rejected one is not.
pub fn make_pair(oracle: &SyntheticOracle, pair_id: &str, user_id: &str, prompt: &str) -> PreferencePair {
    let chosen = response_with_alignment(oracle, &format!("answer to '{prompt}' variant"), true);
    let rejected = response_with_alignment(oracle, &format!("reply to '{prompt}' variant"), false);
    PreferencePair::new(pair_id, user_id, prompt, chosen, rejected)
}

/// Two topics with conflicting planted subsets and a stratified split.
#[derive(Debug, Clone)]
pub struct PlantedShiftFixture {
    pub library: AttributeLibrary,
    pub oracle: SyntheticOracle,
    pub train: Vec<PreferencePair>,
    pub test: Vec<PreferencePair>,
    /// Topic of each test pair, in `test` order.
    pub test_topics: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub train_per_topic: usize,
    pub test_per_topic: usize,
    pub noise: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self { train_per_topic: 8, test_per_topic: 10, noise: DEFAULT_NOISE }
    }
}

pub fn planted_shift_fixture(seed: u64, config: FixtureConfig) -> PlantedShiftFixture {
    let oracle = default_oracle(seed, 2, config.noise);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut test_topics = Vec::new();
    for topic in 0..2 {
        let mut sources = Vec::with_capacity(config.train_per_topic);
        for i in 0..config.train_per_topic {
            let prompt = topic_prompt(&mut rng, topic);
            train.push(make_pair(&oracle, &format!("train-{topic}-{i}"), "user", &prompt));
            sources.push(prompt);
        }
        for i in 0..config.test_per_topic {
            let prompt = match sources.choose(&mut rng) {
                Some(source) => paraphrase(&mut rng, topic, source),
                None => topic_prompt(&mut rng, topic),
            };
            test.push(make_pair(&oracle, &format!("test-{topic}-{i}"), "user", &prompt));
            test_topics.push(topic);
        }
    }
    PlantedShiftFixture { library: load_default_library(), oracle, train, test, test_topics }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub users: usize,
    pub pairs_per_user: usize,
    pub topics: usize,
    /// Probability that a pair reuses one of the user's earlier prompts.
    pub duplicate_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { users: 2, pairs_per_user: 20, topics: 2, duplicate_rate: 0.1 }
    }
}

/// Pairs for several users, consistent with `default_oracle(seed, topics, _)`.
pub fn synthetic_pairs(seed: u64, config: SynthConfig) -> Vec<PreferencePair> {
    let topics = config.topics.clamp(1, DEFAULT_PLANTED.len());
    let oracle = default_oracle(seed, topics, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut pairs = Vec::with_capacity(config.users * config.pairs_per_user);
    for u in 0..config.users {
        let user = format!("user{u}");
        let mut prompts: Vec<String> = Vec::new();
        for i in 0..config.pairs_per_user {
            let prompt = match prompts.choose(&mut rng) {
                Some(p) if rng.random_bool(config.duplicate_rate.clamp(0.0, 1.0)) => p.clone(),
                _ => topic_prompt(&mut rng, i % topics),
            };
            let mut pair = make_pair(&oracle, &format!("{user}-{i}"), &user, &prompt);
            if prompts.contains(&prompt) {
                // distinct responses for repeated prompts
                pair.chosen = response_with_alignment(&oracle, &format!("answer {i} to '{prompt}'"), true);
                pair.rejected = response_with_alignment(&oracle, &format!("reply {i} to '{prompt}'"), false);
            } else {
                prompts.push(prompt);
            }
            pairs.push(pair);
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{dot, Embedder, HashingEmbedder};
    use crate::scoring::pair_gap;

    #[test]
    fn prompts_route_to_their_topic() {
        let oracle = default_oracle(1, 4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for topic in 0..4 {
            for _ in 0..20 {
                assert_eq!(oracle.topic_of(&topic_prompt(&mut rng, topic)), topic);
            }
        }
    }

    #[test]
    fn pairs_have_planted_gap() {
        let oracle = default_oracle(5, 2, 0.0);
        let lib = load_default_library();
        let planted = planted_ids(&lib, 2);
        let pair = make_pair(&oracle, "p", "u", "bake garlic pasta in the oven");
        assert_eq!(pair_gap(&oracle, &pair, &planted[0]).unwrap(), 3.0);
        assert_eq!(pair_gap(&oracle, &pair, &planted[1]).unwrap(), -3.0);
        assert_eq!(pair_gap(&oracle, &pair, &[]).unwrap(), 0.0);
    }

    #[test]
    fn same_topic_prompts_are_closer() {
        let e = HashingEmbedder::new(64, 0).unwrap();
        let f = planted_shift_fixture(3, FixtureConfig::default());
        let (mut same, mut cross, mut ns, mut nc) = (0.0, 0.0, 0, 0);
        for (i, a) in f.train.iter().enumerate() {
            for b in &f.train[i + 1..] {
                let s = dot(&e.embed(&a.prompt).unwrap(), &e.embed(&b.prompt).unwrap());
                if a.pair_id[6..7] == b.pair_id[6..7] {
                    same += s;
                    ns += 1;
                } else {
                    cross += s;
                    nc += 1;
                }
            }
        }
        assert!(same / ns as f64 > cross / nc as f64 + 0.1);
    }

    #[test]
    fn synthetic_pairs_are_deterministic_and_valid() {
        let cfg = SynthConfig { users: 3, pairs_per_user: 15, topics: 3, duplicate_rate: 0.3 };
        let a = synthetic_pairs(7, cfg);
        assert_eq!(a, synthetic_pairs(7, cfg));
        assert_eq!(a.len(), 45);
        for p in &a {
            assert!(crate::attribute::validate_pair(p.clone()).is_ok());
        }
        let unique: std::collections::HashSet<_> = a.iter().filter(|p| p.user_id == "user0").map(|p| &p.prompt).collect();
        assert!(unique.len() < 15);
    }
}
