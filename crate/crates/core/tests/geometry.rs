//! Embedding geometry, fixture construction and drift-simulator invariants.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use exact_core::driftsim::{
    allocate_counts, make_model, max_pairwise_distance, min_pairwise_distance, pool_estimate, run_sim, ModelSpec,
    SimConfig, SimError,
};
use exact_core::fixture::{planted_shift_fixture, FixtureConfig};
use exact_core::retrieval::{dot, Embedder, HashingEmbedder};
use exact_core::scoring::Scorer;

const PAIRS: u64 = 10_000;

/// Share of random word-disjoint prompt pairs whose cosine has magnitude below 0.2.
fn near_orthogonal_rate(dim: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut hits = 0;
    for t in 0..PAIRS {
        let e = HashingEmbedder::new(dim, t).unwrap();
        let (la, lb) = (rng.random_range(4..=8), rng.random_range(4..=8));
        let a: Vec<String> = (0..la).map(|i| format!("a{t}x{i}")).collect();
        let b: Vec<String> = (0..lb).map(|i| format!("b{t}y{i}")).collect();
        if dot(&e.embed(&a.join(" ")).unwrap(), &e.embed(&b.join(" ")).unwrap()).abs() < 0.2 {
            hits += 1;
        }
    }
    hits as f64 / PAIRS as f64
}

#[test]
fn disjoint_prompts_become_near_orthogonal_as_dimension_grows() {
    let rates: Vec<(usize, f64)> = [64, 256, 1024].into_iter().map(|d| (d, near_orthogonal_rate(d))).collect();
    eprintln!("P(|cos| < 0.2) by dimension: {rates:?}");
    for w in rates.windows(2) {
        assert!(w[1].1 >= w[0].1, "rate should not fall with dimension: {rates:?}");
    }
    // at d = 64 hash collisions between ~10 shingles per prompt keep the rate near 0.88
    assert!(rates[2].1 >= 0.99, "{rates:?}");
}

#[test]
fn fixture_test_prompts_retrieve_their_own_topic() {
    for seed in 0..20 {
        let f = planted_shift_fixture(seed, FixtureConfig::default());
        let e = HashingEmbedder::new(64, seed).unwrap();
        let train: Vec<Vec<f32>> = f.train.iter().map(|p| e.embed(&p.prompt).unwrap()).collect();
        for (pair, topic) in f.test.iter().zip(&f.test_topics) {
            let q = e.embed(&pair.prompt).unwrap();
            let nearest = (0..train.len()).max_by(|a, b| dot(&q, &train[*a]).total_cmp(&dot(&q, &train[*b]))).unwrap();
            assert_eq!(f.oracle.topic_of(&f.train[nearest].prompt), *topic, "seed {seed}: {}", pair.prompt);
        }
        assert!(f.oracle.deterministic());
    }
}

#[test]
fn centers_are_exactly_r_apart() {
    for (k, d) in [(2, 2), (3, 8), (5, 5), (8, 32)] {
        let m = make_model(&ModelSpec::new(k, d, 1.5, 0.3, 9)).unwrap();
        assert!((min_pairwise_distance(&m.centers) - 1.5).abs() < 1e-9);
        assert!((max_pairwise_distance(&m.centers) - 1.5).abs() < 1e-9);
    }
    assert!(matches!(make_model(&ModelSpec::new(4, 3, 1.0, 0.1, 0)), Err(SimError::InfeasibleGeometry { .. })));
}

#[test]
fn single_topic_has_no_pooling_bias() {
    let m = make_model(&ModelSpec::new(1, 8, 1.0, 0.5, 2)).unwrap();
    let report = run_sim(&m, &SimConfig::new(20, 400, 0.05, 3)).unwrap();
    let t = &report.per_topic[0];
    assert_eq!(t.pool_bias_analytic, 0.0);
    // tr(Σ)/m1 with Σ = σ² I
    assert!((t.pool_variance_analytic - 8.0 * 0.25 / report.m1 as f64).abs() < 1e-12);
    assert!((t.pool_mse - t.pool_variance_analytic).abs() < 3.0 * t.pool_mse_se);
    assert_eq!(t.misclassification, 0.0);
}

#[test]
fn pool_estimate_is_the_sample_mean() {
    let samples = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![2.0, 3.0]];
    assert_eq!(pool_estimate(&samples).unwrap(), vec![2.0, 1.0]);
    assert!(matches!(pool_estimate(&[]), Err(SimError::EmptySamples)));
}

#[test]
fn simulation_is_seed_deterministic() {
    let m = make_model(&ModelSpec::new(3, 8, 1.0, 0.4, 5)).unwrap();
    let cfg = SimConfig::new(10, 120, 0.05, 8);
    assert_eq!(run_sim(&m, &cfg).unwrap(), run_sim(&m, &cfg).unwrap());
}

proptest! {
    #[test]
    fn allocation_sums_and_tracks_weights(raw in prop::collection::vec(0.05f64..1.0, 1..8), extra in 0usize..200) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let m1 = weights.len() + extra;
        let counts = allocate_counts(&weights, m1);
        prop_assert_eq!(counts.iter().sum::<usize>(), m1);
        for (c, w) in counts.iter().zip(&weights) {
            prop_assert!(*c >= 1);
            prop_assert!((*c as f64 - w * m1 as f64).abs() < 1.0 + weights.len() as f64);
        }
    }
}
