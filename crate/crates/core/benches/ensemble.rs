use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rough_pme::geometry::{Field, Grid};
use rough_pme::par;
use rough_pme::signals::{sample_path, NoiseModel};
use rough_pme::solver::{solve_rough, Coefficient, CoefficientSet, SolverConfig};

fn ensemble(c: &mut Criterion) {
    let grid = Grid::interval(-4.0, 4.0, 127).unwrap();
    let coeffs = CoefficientSet::new(grid.clone(), vec![Coefficient::sine_1d(0.5, PI / 4.0)]).unwrap();
    let cfg = SolverConfig::new(2.0, SolverConfig::auto_delta(&grid, 2.0), 1.0 / 128.0).unwrap();
    let paths: Vec<_> = (0..8u64)
        .map(|s| sample_path(NoiseModel::brownian(1), 0.0, 0.5, 1.0 / 1024.0, s).unwrap())
        .collect();
    let x0 = Field::from_fn(grid.clone(), |p| 2.0 * (1.0 - p[0] * p[0] / 9.0).max(0.0)).unwrap();
    let run = |z: &_| solve_rough(&x0, z, &cfg, &coeffs).unwrap().final_field().max();

    let mut g = c.benchmark_group("ensemble_8_paths");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| black_box(par::map_seq(&paths, run))));
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| b.iter(|| black_box(par::map_par(&paths, run))));
    g.finish();
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
