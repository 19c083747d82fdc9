use std::hint::black_box;
use criterion::{criterion_group, criterion_main, Criterion};

use bellsim_core::{
    build_probability_table, enumerate_forms, sample_direction, Experiment, NoisyState,
    PureTwoQubitState, RandomSource, Scenario, ScenarioConfig,
};

fn trial(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_trial");
    for scenario in [Scenario::Rim, Scenario::Rom, Scenario::Rotm] {
        let config = ScenarioConfig {
            alpha_ratio: 0.5,
            trials: 1,
            workers: 1,
            ..ScenarioConfig::new(scenario)
        };
        let experiment = Experiment::new(config).unwrap();
        let mut idx = 0u64;
        group.bench_function(scenario.to_string(), |b| {
            b.iter(|| {
                idx += 1;
                black_box(experiment.run_trial(idx).unwrap())
            })
        });
    }
    group.finish();
}

fn table(c: &mut Criterion) {
    let state = NoisyState::pure(PureTwoQubitState::from_ratio(0.5).unwrap());
    let mut rng = RandomSource::new(1, 1);
    let a = [sample_direction(&mut rng), sample_direction(&mut rng)];
    let b = [sample_direction(&mut rng), sample_direction(&mut rng)];
    c.bench_function("build_probability_table/2x2", |bench| {
        bench.iter(|| build_probability_table(black_box(&state), black_box(&a), black_box(&b)))
    });
    let noisy = NoisyState::new(*state.state(), 0.9).unwrap();
    c.bench_function("build_probability_table/2x2-noisy", |bench| {
        bench.iter(|| build_probability_table(black_box(&noisy), black_box(&a), black_box(&b)))
    });
}

fn forms(c: &mut Criterion) {
    c.bench_function("enumerate_forms/3", |b| b.iter(|| enumerate_forms(black_box(3))));
}

criterion_group!(benches, trial, table, forms);
criterion_main!(benches);
