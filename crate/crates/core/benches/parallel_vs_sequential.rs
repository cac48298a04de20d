//! Sequential against rayon execution for the three data-parallel kernels.
//! Build with `--no-default-features` to see the fallback path, where both
//! modes run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hnls_core::field::{bilinear_l2_squared, lp_spacetime_norm, SpaceTimeGrid};
use hnls_core::propagator::FreeEvolution;
use hnls_core::weyl::{dispersive_sweep, KernelSweepConfig, SpatialPoints};
use hnls_core::{Complex64, CutoffProfile, Execution, Signature, SpectralField};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn data(sig: &Signature, m: usize) -> SpectralField {
    let half = vec![m; sig.dim()];
    SpectralField::from_fn(sig, &half, |k| {
        let s: i64 = k.iter().enumerate().map(|(j, &x)| (j as i64 + 2) * x).sum();
        Complex64::new((s as f64).cos(), (0.5 * s as f64).sin())
    })
    .unwrap()
}

fn quadrature(c: &mut Criterion) {
    let sig = Signature::unit(2, 1).unwrap();
    let f = data(&sig, 8);
    let grid = SpaceTimeGrid {
        t_max: 1.0,
        n_t: 64,
        g: 64,
        oversample: 2,
    };
    let mut group = c.benchmark_group("lp_quadrature");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| lp_spacetime_norm(black_box(&f), 4.0, &grid, &FreeEvolution, e).unwrap())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let cfg = KernelSweepConfig {
        sig: Signature::unit(2, 1).unwrap(),
        cutoff: CutoffProfile::Smooth,
        ns: vec![16, 32, 64],
        samples: 64,
        sigma: 0.1,
        seed: 1,
        points: SpatialPoints::Random,
    };
    let mut group = c.benchmark_group("kernel_sweep");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| dispersive_sweep(black_box(&cfg), e))
        });
    }
    group.finish();
}

fn resonant(c: &mut Criterion) {
    let sig = Signature::unit(2, 1).unwrap();
    let (f1, f2) = (data(&sig, 8), data(&sig, 4));
    let mut group = c.benchmark_group("resonant_product");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| bilinear_l2_squared(black_box(&f1), &f2, 1.0, e).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = quadrature, kernel, resonant
}
criterion_main!(benches);
