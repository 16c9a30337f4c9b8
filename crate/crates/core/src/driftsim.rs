//! Monte Carlo study of pooling versus topic-wise retrieval under a
//! mixture-of-topics preference model.
//!
//! Each topic `c` has a center `μ_c ∈ R^d`; a draw from topic `c` is
//! `μ_c + σ·z` with `z ~ N(0, I_d)`, so `tr(Σ_c) = dσ²`. With `n_c` draws per
//! topic (`m₁ = Σ n_c`, `p_c = n_c / m₁`) the pooled mean has
//!
//! ```text
//! E‖μ̂_pool − μ_j‖² = ‖μ̄ − μ_j‖² + (1/m₁) Σ_c p_c·dσ²,   μ̄ = Σ_c p_c μ_c
//! ```
//!
//! while the retrieval estimator (nearest estimated center of a fresh draw)
//! is bounded by `dσ²/n_j + 4δr²` whenever the misclassification rate is at
//! most `δ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot place {k} orthogonal centers in dimension {d}")]
    InfeasibleGeometry { k: usize, d: usize },
    #[error("topic {0} has no samples")]
    EmptyTopic(usize),
    #[error("no samples")]
    EmptySamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub d: usize,
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sigma: f64,
    /// Guaranteed minimum pairwise center distance.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k: usize,
    pub d: usize,
    pub r: f64,
    pub sigma: f64,
    /// Uniform when `None`.
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    /// Rejects models with `σ > max_noise_ratio · r`.
    pub max_noise_ratio: Option<f64>,
}

impl ModelSpec {
    pub fn new(k: usize, d: usize, r: f64, sigma: f64, seed: u64) -> Self {
        Self { k, d, r, sigma, weights: None, seed, max_noise_ratio: None }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Centers are `(r/√2)·q_c` for `k` seeded orthonormal directions `q_c`, so
/// every pairwise distance is `r` (the maximum is therefore ≤ 4r). Needs `k ≤ d`.
pub fn make_model(spec: &ModelSpec) -> Result<TopicModel, SimError> {
    let ModelSpec { k, d, r, sigma, .. } = *spec;
    if k == 0 || d == 0 {
        return Err(SimError::InvalidParameter("k and d must be at least 1".into()));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(SimError::InvalidParameter(format!("separation r must be positive, got {r}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SimError::InvalidParameter(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if let Some(ratio) = spec.max_noise_ratio {
        if sigma > ratio * r {
            return Err(SimError::InvalidParameter(format!("sigma {sigma} exceeds {ratio}·r")));
        }
    }
    if k > d {
        return Err(SimError::InfeasibleGeometry { k, d });
    }
    let weights = match &spec.weights {
        None => vec![1.0 / k as f64; k],
        Some(w) => {
            if w.len() != k || w.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                return Err(SimError::InvalidParameter("weights must be k non-negative numbers".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(SimError::InvalidParameter(format!("weights sum to {total}, not 1")));
            }
            w.iter().map(|p| p / total).collect()
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for q in &basis {
            let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= proj * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let scale = r / std::f64::consts::SQRT_2;
    let mut centers: Vec<Vec<f64>> = basis.into_iter().map(|q| q.into_iter().map(|x| x * scale).collect()).collect();

    // absorb rounding so the minimum distance is never below r
    let min = min_pairwise_distance(&centers);
    if min.is_finite() && min < r {
        let fix = r / min;
        centers.iter_mut().flatten().for_each(|x| *x *= fix);
    }
    Ok(TopicModel { k, d, centers, weights, sigma, r })
}

/// `∞` for fewer than two centers.
pub fn min_pairwise_distance(centers: &[Vec<f64>]) -> f64 {
    let mut min = f64::INFINITY;
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            min = min.min(sq_dist(a, b).sqrt());
        }
    }
    min
}

pub fn max_pairwise_distance(centers: &[Vec<f64>]) -> f64 {
    let mut max: f64 = 0.0;
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            max = max.max(sq_dist(a, b).sqrt());
        }
    }
    max
}

/// Arithmetic mean of all samples.
pub fn pool_estimate(samples: &[Vec<f64>]) -> Result<Vec<f64>, SimError> {
    let first = samples.first().ok_or(SimError::EmptySamples)?;
    let mut mean = vec![0.0; first.len()];
    for s in samples {
        mean.iter_mut().zip(s).for_each(|(m, x)| *m += x);
    }
    let n = samples.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Per-topic means of labelled samples.
pub fn topic_centers(samples: &[(usize, Vec<f64>)], k: usize) -> Result<Vec<Vec<f64>>, SimError> {
    let d = samples.first().ok_or(SimError::EmptySamples)?.1.len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (t, x) in samples {
        if *t >= k {
            return Err(SimError::InvalidParameter(format!("label {t} outside 0..{k}")));
        }
        counts[*t] += 1;
        sums[*t].iter_mut().zip(x).for_each(|(s, v)| *s += v);
    }
    if let Some(t) = counts.iter().position(|c| *c == 0) {
        return Err(SimError::EmptyTopic(t));
    }
    for (s, c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= *c as f64);
    }
    Ok(sums)
}

/// Nearest center by Euclidean distance, lowest index on ties.
pub fn classify(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let dist = sq_dist(x, c);
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Draws per topic under uniform weights; `m₁ = n·k`, split by weight.
    pub n: usize,
    pub trials: usize,
    pub delta: f64,
    pub seed: u64,
    /// Fresh test draws per topic and trial.
    pub test_draws: usize,
}

impl SimConfig {
    pub fn new(n: usize, trials: usize, delta: f64, seed: u64) -> Self {
        Self { n, trials, delta, seed, test_draws: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStats {
    pub topic: usize,
    pub n_c: usize,
    pub pool_mse: f64,
    pub pool_mse_se: f64,
    pub pool_mse_analytic: f64,
    /// ‖μ̄ − μ_j‖².
    pub pool_bias_analytic: f64,
    /// (1/m₁) Σ p_c dσ².
    pub pool_variance_analytic: f64,
    /// Unbiased estimate of ‖E μ̂_pool − μ_j‖² from the trials.
    pub pool_bias_estimate: f64,
    pub pool_bias_se: f64,
    pub retrieval_mse: f64,
    pub retrieval_mse_se: f64,
    /// dσ²/n_j + 4δr².
    pub retrieval_bound: f64,
    pub misclassification: f64,
    pub misclassification_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub k: usize,
    pub d: usize,
    pub r: f64,
    pub sigma: f64,
    pub delta: f64,
    pub m1: usize,
    pub n_min: usize,
    pub trials: usize,
    pub weights: Vec<f64>,
    /// Trace of the covariance of μ̂_pool across trials.
    pub pool_variance_estimate: f64,
    pub pool_variance_se: f64,
    pub per_topic: Vec<TopicStats>,
}

impl SimReport {
    pub fn max_misclassification(&self) -> f64 {
        self.per_topic.iter().map(|t| t.misclassification).fold(0.0, f64::max)
    }
}

/// Largest-remainder split of `m1` draws by weight, at least one per topic.
/// Counts sum to `max(m1, k)`.
pub fn allocate_counts(weights: &[f64], m1: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|p| p * m1 as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|a, b| (raw[*b] - raw[*b].floor()).total_cmp(&(raw[*a] - raw[*a].floor())).then(a.cmp(b)));
    let mut left = m1.saturating_sub(counts.iter().sum());
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    // every topic gets a draw; the donor is the topic most above its target
    while let Some(empty) = counts.iter().position(|c| *c == 0) {
        let donor = (0..counts.len())
            .filter(|i| counts[*i] > 1)
            .max_by(|a, b| (counts[*a] as f64 - raw[*a]).total_cmp(&(counts[*b] as f64 - raw[*b])).then(b.cmp(a)));
        if let Some(donor) = donor {
            counts[donor] -= 1;
        }
        counts[empty] = 1;
    }
    counts
}

struct Trial {
    pool: Vec<f64>,
    pool_err: Vec<f64>,
    retrieval_err: Vec<f64>,
    misclassified: Vec<f64>,
}

fn draw(rng: &mut ChaCha8Rng, center: &[f64], sigma: f64) -> Vec<f64> {
    center.iter().map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn run_trial(model: &TopicModel, counts: &[usize], cfg: &SimConfig, trial: usize) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);

    let mut samples = Vec::with_capacity(counts.iter().sum());
    for (c, n) in counts.iter().enumerate() {
        for _ in 0..*n {
            samples.push((c, draw(&mut rng, &model.centers[c], model.sigma)));
        }
    }
    let all: Vec<Vec<f64>> = samples.iter().map(|(_, x)| x.clone()).collect();
    let pool = pool_estimate(&all).expect("every topic has draws");
    let centers = topic_centers(&samples, model.k).expect("every topic has draws");

    let mut pool_err = Vec::with_capacity(model.k);
    let mut retrieval_err = Vec::with_capacity(model.k);
    let mut misclassified = Vec::with_capacity(model.k);
    for (j, mu) in model.centers.iter().enumerate() {
        pool_err.push(sq_dist(&pool, mu));
        let mut err = 0.0;
        let mut wrong = 0usize;
        for _ in 0..cfg.test_draws {
            let x = draw(&mut rng, mu, model.sigma);
            let c = classify(&x, &centers);
            if c != j {
                wrong += 1;
            }
            err += sq_dist(&centers[c], mu);
        }
        retrieval_err.push(err / cfg.test_draws as f64);
        misclassified.push(wrong as f64 / cfg.test_draws as f64);
    }
    Trial { pool, pool_err, retrieval_err, misclassified }
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Runs `cfg.trials` independent trials. Trial `t` uses the ChaCha8 stream
/// `t` under `cfg.seed`, so results do not depend on scheduling.
pub fn run_sim(model: &TopicModel, cfg: &SimConfig) -> Result<SimReport, SimError> {
    if cfg.trials < MIN_TRIALS {
        return Err(SimError::InvalidParameter(format!("at least {MIN_TRIALS} trials required, got {}", cfg.trials)));
    }
    if cfg.n == 0 || cfg.test_draws == 0 {
        return Err(SimError::InvalidParameter("n and test_draws must be positive".into()));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(SimError::InvalidParameter(format!("delta must lie in (0, 1), got {}", cfg.delta)));
    }
    let counts = allocate_counts(&model.weights, cfg.n * model.k);
    let m1: usize = counts.iter().sum();
    let eff: Vec<f64> = counts.iter().map(|c| *c as f64 / m1 as f64).collect();
    let d = model.d as f64;
    let s2 = model.sigma * model.sigma;
    let mu_bar: Vec<f64> = (0..model.d)
        .map(|i| model.centers.iter().zip(&eff).map(|(c, p)| p * c[i]).sum())
        .collect();
    let variance_analytic = eff.iter().map(|p| p * d * s2).sum::<f64>() / m1 as f64;

    let trials: Vec<Trial> = (0..cfg.trials).into_par_iter().map(|t| run_trial(model, &counts, cfg, t)).collect();
    let t = trials.len() as f64;

    // covariance of the pooled estimate across trials
    let pool_mean: Vec<f64> = (0..model.d).map(|i| trials.iter().map(|tr| tr.pool[i]).sum::<f64>() / t).collect();
    let centered: Vec<Vec<f64>> =
        trials.iter().map(|tr| tr.pool.iter().zip(&pool_mean).map(|(a, b)| a - b).collect()).collect();
    let cov = |a: usize, b: usize| centered.iter().map(|v| v[a] * v[b]).sum::<f64>() / (t - 1.0);
    let trace: f64 = (0..model.d).map(|i| cov(i, i)).sum();
    let (_, trace_se) = mean_se(centered.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>()));
    let cov_full: Vec<Vec<f64>> = (0..model.d).map(|a| (0..model.d).map(|b| cov(a, b)).collect()).collect();
    let cov_sq_trace: f64 = cov_full.iter().flatten().map(|x| x * x).sum();

    let per_topic = model
        .centers
        .iter()
        .enumerate()
        .map(|(j, mu)| {
            let (pool_mse, pool_mse_se) = mean_se(trials.iter().map(|tr| tr.pool_err[j]));
            let (retrieval_mse, retrieval_mse_se) = mean_se(trials.iter().map(|tr| tr.retrieval_err[j]));
            let (mis, mis_se) = mean_se(trials.iter().map(|tr| tr.misclassified[j]));
            let bias_analytic = sq_dist(&mu_bar, mu);
            let b: Vec<f64> = pool_mean.iter().zip(mu).map(|(m, c)| m - c).collect();
            let bcb: f64 = (0..model.d).map(|a| (0..model.d).map(|c| b[a] * cov_full[a][c] * b[c]).sum::<f64>()).sum();
            let bias_var = (4.0 * bcb / t + 2.0 * cov_sq_trace / (t * t)).max(0.0);
            TopicStats {
                topic: j,
                n_c: counts[j],
                pool_mse,
                pool_mse_se,
                pool_mse_analytic: bias_analytic + variance_analytic,
                pool_bias_analytic: bias_analytic,
                pool_variance_analytic: variance_analytic,
                pool_bias_estimate: b.iter().map(|x| x * x).sum::<f64>() - trace / t,
                pool_bias_se: bias_var.sqrt(),
                retrieval_mse,
                retrieval_mse_se,
                retrieval_bound: d * s2 / counts[j] as f64 + 4.0 * cfg.delta * model.r * model.r,
                misclassification: mis,
                misclassification_se: mis_se,
            }
        })
        .collect();

    Ok(SimReport {
        k: model.k,
        d: model.d,
        r: model.r,
        sigma: model.sigma,
        delta: cfg.delta,
        m1,
        n_min: *counts.iter().min().expect("k >= 1"),
        trials: cfg.trials,
        weights: eff,
        pool_variance_estimate: trace,
        pool_variance_se: trace_se,
        per_topic,
    })
}

/// `(σ²/r²)(d + ln(k/δ))`, the sample-size scale of the retrieval condition.
pub fn condition_scale(k: usize, d: usize, sigma: f64, r: f64, delta: f64) -> f64 {
    (sigma * sigma) / (r * r) * (d as f64 + (k as f64 / delta).ln())
}

/// Runs `run_sim` once per `n` in `n_values`, reusing the model.
pub fn sweep(model: &TopicModel, base: &SimConfig, n_values: &[usize]) -> Result<Vec<SimReport>, SimError> {
    n_values.iter().map(|n| run_sim(model, &SimConfig { n: *n, ..base.clone() })).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    /// Smallest swept n_min from which every larger n_min has misclassification ≤ δ.
    pub n_star: Option<usize>,
    pub scale: f64,
    /// n_star / scale.
    pub c: Option<f64>,
}

/// Fits the constant of `n_min ≥ C·(σ²/r²)(d + ln(k/δ))` for one sweep.
pub fn fit_threshold(reports: &[SimReport]) -> Option<ThresholdFit> {
    let first = reports.first()?;
    let mut sorted: Vec<&SimReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.n_min);
    let mut n_star = None;
    for r in sorted.iter().rev() {
        if r.max_misclassification() <= r.delta {
            n_star = Some(r.n_min);
        } else {
            break;
        }
    }
    let scale = condition_scale(first.k, first.d, first.sigma, first.r, first.delta);
    Some(ThresholdFit { n_star, scale, c: n_star.map(|n| n as f64 / scale) })
}

/// Largest per-sweep constant, so the condition holds on every fitted sweep.
/// Sweeps that never reach δ are skipped.
pub fn fit_constant(sweeps: &[Vec<SimReport>]) -> Option<f64> {
    sweeps.iter().filter_map(|s| fit_threshold(s)?.c).reduce(f64::max)
}

pub fn condition_holds(report: &SimReport, c: f64) -> bool {
    report.n_min as f64 >= c * condition_scale(report.k, report.d, report.sigma, report.r, report.delta)
}
