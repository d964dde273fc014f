use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dephasing_core::bplus::{self, BPlusTerms};
use dephasing_core::decoherence::{DecoherenceSet, FrequencySpec, GaussianPairParams};
use dephasing_core::generator::{rate_grid, DephasingMap, DtMode};
use dephasing_core::integrator::{integrate_many, IntegratorOptions};
use dephasing_core::states::random_density_matrix;
use dephasing_core::verify::{run_verify, VerifyOptions};
use dephasing_core::{Execution, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn double_peak() -> DephasingMap {
    let p = GaussianPairParams { omega0: 0.5, delta_omega: 2.0, sigma: 1.0, k: -0.3 };
    DephasingMap::new(DecoherenceSet::from_spec(&FrequencySpec::BiGaussianDouble(p), 1.0).unwrap()).unwrap()
}

fn rates(c: &mut Criterion) {
    let map = double_peak();
    let tol = Tolerances::default();
    let grid: Vec<f64> = (0..400).map(|i| 0.0075 * i as f64 + 0.001).collect();
    let mut g = c.benchmark_group("rate_grid");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| rate_grid(&map, black_box(&grid), DtMode::Analytic, &tol, exec))
        });
    }
    g.finish();
}

fn trajectories(c: &mut Criterion) {
    let map = double_peak();
    let opts = IntegratorOptions::from_tolerances(&Tolerances::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r0s: Vec<_> = (0..16).map(|_| map.basis.to_bloch_unchecked(&random_density_matrix(4, &mut rng))).collect();
    let mut g = c.benchmark_group("integrate_many");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| integrate_many(black_box(&r0s), &map, 3.0, &opts, exec)));
    }
    g.finish();
}

fn bplus_sweep(c: &mut Criterion) {
    let preset = bplus::preset("non_markovian").unwrap();
    let terms = BPlusTerms::new(preset.state, 1.0, &Tolerances::default()).unwrap();
    let times: Vec<f64> = (0..201).map(|i| preset.horizon * i as f64 / 200.0).collect();
    let mut g = c.benchmark_group("bplus_sweep");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| exec.map(black_box(&times), |&t| terms.kappas(t).unwrap())));
    }
    g.finish();
}

fn verify(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_verify");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = VerifyOptions { exec, samples: 4, ..VerifyOptions::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_verify(black_box(&opts))));
    }
    g.finish();
}

criterion_group!(benches, rates, trajectories, bplus_sweep, verify);
criterion_main!(benches);
