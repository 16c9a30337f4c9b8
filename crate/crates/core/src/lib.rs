//! Decoding-time personalization from pairwise preferences.
//!
//! Offline, every preference pair of a user is explained by a small set of
//! named attributes chosen greedily to widen the log-probability gap
//! between the preferred and the dispreferred response. The resulting
//! (prompt, attributes) records form a per-user memory. Online, a new
//! prompt retrieves its nearest stored prompt and is decoded with that
//! entry's attributes appended.
//!
//! The crate also carries the verification tooling used by the `exact`
//! binary: the set objective, submodularity-ratio estimation, the greedy
//! bound audit, and a Monte Carlo drift simulator.

pub mod attribute;
pub mod backend;
pub mod driftsim;
pub mod fixture;
mod hashing;
pub mod inference;
pub mod remote;
pub mod retrieval;
pub mod scoring;
pub mod selection;

pub use attribute::{
    load_default_library, read_pairs, validate_pair, write_pairs, Attribute, AttributeId, AttributeLibrary,
    AttributeSubset, LibraryError, PairError, PreferencePair,
};
pub use backend::{BackendError, RemoteConfig};
pub use driftsim::{make_model, run_sim, ModelSpec, SimConfig, SimError, SimReport, TopicModel};
pub use inference::{
    augment_prompt, evaluate_pairs, global_subset_baseline, personalize, DecodingParams, EvalMode, EvalReport,
    Generator, InferenceError,
};
pub use retrieval::{
    load_memory, save_memory, Embedder, EmbedderKind, EmbedderSpec, HashingEmbedder, IndexEntry, RetrievalError,
    RetrievalResult, UserMemory,
};
pub use scoring::{pair_gap, LogProbScore, Scorer, ScoringConfig, SyntheticOracle, SyntheticOracleSpec};
pub use selection::{
    audit_greedy_bound, build_index, dataset_objective, estimate_gamma, exhaustive_select, greedy_select,
    GammaEstimate, SelectionConfig, SelectionError, SelectionObjective, SetObjectiveReport,
};
