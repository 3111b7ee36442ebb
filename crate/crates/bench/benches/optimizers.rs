use adafactor::factor::project_rank_one;
use adafactor::optim::{
    AdafactorConfig, AdamConfig, FactoredAdamConfig, Optimizer, OptimizerConfig, ParamSlot, ParamValue,
};
use adafactor::rng::SplitMix64;
use adafactor::tensor::DenseMatrix;
use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = SplitMix64::new(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

fn optimizer_steps(c: &mut Criterion) {
    let configs = [
        ("adam", OptimizerConfig::Adam(AdamConfig::default())),
        (
            "adam-no-momentum",
            OptimizerConfig::Adam(AdamConfig {
                beta1: 0.0,
                ..AdamConfig::default()
            }),
        ),
        ("factored-adam", OptimizerConfig::FactoredAdam(FactoredAdamConfig::default())),
        ("adafactor", OptimizerConfig::Adafactor(AdafactorConfig::default())),
        (
            "adafactor-momentum",
            OptimizerConfig::Adafactor(AdafactorConfig {
                beta1: 0.9,
                ..AdafactorConfig::default()
            }),
        ),
    ];
    let mut group = c.benchmark_group("step_512x512");
    let grad = [ParamValue::Matrix(random(512, 512, 2))];
    for (name, config) in configs {
        let slots = vec![ParamSlot::new("w", ParamValue::Matrix(random(512, 512, 1)))];
        let opt = Optimizer::new(config, &slots).unwrap();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched_ref(
                || (slots.clone(), opt.clone()),
                |(slots, opt)| opt.step(slots, &grad).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn rank_one_projection(c: &mut Criterion) {
    let v = random(512, 512, 3);
    let v = DenseMatrix::from_fn(512, 512, |i, j| v.get(i, j).abs());
    c.bench_function("project_rank_one_512x512", |b| b.iter(|| project_rank_one(&v).unwrap()));
}

criterion_group!(benches, optimizer_steps, rank_one_projection);
criterion_main!(benches);
