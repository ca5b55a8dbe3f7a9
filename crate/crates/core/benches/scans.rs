use std::hint::black_box;

use afm_core::bifurcation::sweep_a;
use afm_core::homoclinic::{sample_both, sample_orbit, OrbitOptions, Side};
use afm_core::melnikov::scan_omega;
use afm_core::verify::{equispaced_phases, phase_scan};
use afm_core::{Execution, Params};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn reference() -> Params {
    Params::new(0.1, 1.0, 1.89)
        .unwrap()
        .with_damping(1.0)
        .unwrap()
}

fn bench_sweep(c: &mut Criterion) {
    let p = reference();
    let mut g = c.benchmark_group("sweep_a");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, 2000), |b| {
            b.iter(|| sweep_a(black_box(&p), 1.5, 2.3, 2000, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_omega_scan(c: &mut Criterion) {
    let loops = sample_both(&reference(), &OrbitOptions::default(), Execution::Parallel).unwrap();
    let omegas: Vec<f64> = (0..64).map(|k| 0.1 + 0.05 * k as f64).collect();
    let mut g = c.benchmark_group("scan_omega");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, omegas.len()), |b| {
            b.iter(|| scan_omega(black_box(&loops), &omegas, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_phase_scan(c: &mut Criterion) {
    let base = reference();
    let lp = sample_orbit(&base, Side::Right, &OrbitOptions::default()).unwrap();
    let p = base
        .with_forcing(0.7, 1.0)
        .unwrap()
        .with_epsilon(1e-4)
        .unwrap();
    let phases = equispaced_phases(&p, 8);
    let mut g = c.benchmark_group("phase_scan");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, phases.len()), |b| {
            b.iter(|| phase_scan(black_box(&p), &lp, &phases, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_sweep, bench_omega_scan, bench_phase_scan);
criterion_main!(benches);
