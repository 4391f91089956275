use std::hint::black_box;

use bdf_core::bdf_operators::cauchy::random_hermitian;
use bdf_core::bdf_operators::{ExternalDensity, Grid, Lattice};
use bdf_core::clifford::exhaustive_furry;
use bdf_core::dressed_dirac::dress;
use bdf_core::fixed_point::{f1_step, ScfOptions, ScfProblem};
use bdf_core::nonrel_hf::{Basis, BasisSpec, Integrals};
use bdf_core::vacuum_polarization::compute_b;
use bdf_core::PhysicalParams;
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kernels(c: &mut Criterion) {
    let params = PhysicalParams { alpha: 0.01, lambda: 1e3, electrons: 1, z: 1.0, nu: ExternalDensity::Gaussian { width: 0.5 } };
    let d = dress(&params, 1e-10, 50).unwrap();

    c.bench_function("dress", |b| b.iter(|| dress(black_box(&params), 1e-10, 50).unwrap()));
    c.bench_function("compute_b", |b| b.iter(|| compute_b(black_box(1.0), &d, 1e-8).unwrap()));
    c.bench_function("exhaustive_furry_5", |b| b.iter(|| exhaustive_furry(black_box(5), true)));

    let basis = Basis::atomic(&BasisSpec::default());
    c.bench_function("gaussian_integrals_14", |b| b.iter(|| Integrals::new(black_box(&basis))));

    let lat = Lattice::new(&Grid::new(8, 6.0, 1e3).unwrap(), &d).unwrap();
    let q = random_hermitian(&lat, 3, &mut ChaCha8Rng::seed_from_u64(1));
    c.bench_function("lattice_exchange_n8", |b| b.iter(|| lat.exchange(black_box(&q))));

    let problem = ScfProblem::new(&params, &d, &ScfOptions { n: 8, extent: 6.0, ..ScfOptions::default() }).unwrap();
    let state = problem.initial_state();
    let mut group = c.benchmark_group("scf");
    group.sample_size(10);
    group.bench_function("f1_step_n8", |b| b.iter(|| f1_step(&problem, black_box(&state)).unwrap()));
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
