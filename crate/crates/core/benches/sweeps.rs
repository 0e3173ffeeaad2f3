use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relay_rd::experiments::scenarios;
use relay_rd::hysteresis::{brute_force_relay, config_update, MonotoneSegment, RelaySign, SimpleConfig};
use relay_rd::kernels::{Kernels, ThresholdDomain, TruncationPolicy};
use relay_rd::par;

fn relay_case(knots: &[f64]) -> usize {
    let mut cfg = SimpleConfig::uniform(0.05, 0.25, RelaySign::Plus);
    let mut prev = 0.0;
    for &k in knots {
        cfg = config_update(&cfg, MonotoneSegment::new(prev, k)).unwrap().0;
        prev = k;
    }
    (0..200)
        .filter(|j| {
            let x = 0.05 + 0.2 * (*j as f64 + 0.5) / 200.0;
            cfg.sign_at(x) != brute_force_relay(x, knots, RelaySign::Plus)
        })
        .count()
}

fn relay_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let paths: Vec<Vec<f64>> = (0..2000)
        .map(|_| (0..30).map(|_| rng.gen_range(-0.25..=0.25)).collect())
        .collect();
    let mut g = c.benchmark_group("relay_oracle");
    g.bench_function("parallel", |b| b.iter(|| par::map(&paths, |p| relay_case(p))));
    g.bench_function("sequential", |b| {
        b.iter(|| par::map_sequential(&paths, |p| relay_case(p)))
    });
    g.finish();
}

fn kernel_sweep(c: &mut Criterion) {
    let k = Kernels::new(
        ThresholdDomain::new(0.05, 0.25).unwrap(),
        TruncationPolicy::default(),
    );
    let taus: Vec<f64> = (0..64).map(|j| 0.005 * 100f64.powf(j as f64 / 63.0)).collect();
    let sup = |tau: &f64| {
        (0..=500)
            .map(|j| {
                let x = 0.05 + 0.2 * j as f64 / 500.0;
                (k.interval(x, *tau).unwrap() - k.half_line(x, *tau).unwrap()).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut g = c.benchmark_group("kernel_sweep");
    g.bench_function("parallel", |b| b.iter(|| par::map(&taus, sup)));
    g.bench_function("sequential", |b| b.iter(|| par::map_sequential(&taus, sup)));
    g.finish();
}

fn scenario_batch(c: &mut Criterion) {
    let run = |sc: &relay_rd::solver::config::Scenario| sc.sim.run(&sc.data, &sc.opts).unwrap().steps;
    let make = || {
        let mut v = scenarios::randomized(3, 4).unwrap();
        for sc in &mut v {
            sc.opts.stop = relay_rd::solver::StopRule::Horizon { t_end: 5.0 };
        }
        v
    };
    let mut g = c.benchmark_group("scenario_batch");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter_batched(make, |v| par::map(&v, run), BatchSize::LargeInput)
    });
    g.bench_function("sequential", |b| {
        b.iter_batched(make, |v| par::map_sequential(&v, run), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, relay_batch, kernel_sweep, scenario_batch);
criterion_main!(benches);
