use criterion::{criterion_group, criterion_main, Criterion};
use exact_core::driftsim::{make_model, run_sim, ModelSpec, SimConfig};

fn simulate(c: &mut Criterion) {
    let model = make_model(&ModelSpec::new(3, 16, 1.0, 0.3, 0)).expect("feasible");
    let cfg = SimConfig::new(20, 200, 0.05, 1);
    c.bench_function("run_sim_k3_d16_200_trials", |b| b.iter(|| run_sim(&model, &cfg).expect("valid")));
}

criterion_group!(benches, simulate);
criterion_main!(benches);
