use std::f64::consts::PI;

use rough_pme::bounds::{choose_partition, uniform_bound_u};
use rough_pme::geometry::{Field, Grid};
use rough_pme::signals::{sample_path, NoiseModel};
use rough_pme::solver::{solve_rough, Coefficient, CoefficientSet, SolverConfig};

#[test]
fn solutions_stay_below_uniform_bound() {
    let grid = Grid::interval(-1.0, 1.0, 63).unwrap();
    let coeffs = CoefficientSet::new(grid.clone(), vec![Coefficient::sine_1d(0.1, PI / 2.0)]).unwrap();
    let mut cfg = SolverConfig::new(2.0, 1e-3, 1.0 / 256.0).unwrap();
    cfg.store_every = 8;
    for seed in 0..4u64 {
        let z = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 4096.0, seed).unwrap();
        let partition = choose_partition(&z, &coeffs, 2.0).unwrap();
        let u = uniform_bound_u(&partition, &coeffs, &z, 2.0).unwrap();
        for height in [1.0, 50.0, 1e3] {
            let x0 = Field::from_fn(grid.clone(), |p| height * (1.0 - p[0] * p[0])).unwrap();
            let traj = solve_rough(&x0, &z, &cfg, &coeffs).unwrap();
            for (t, x) in traj.times.iter().zip(&traj.fields) {
                if *t < 0.05 {
                    continue;
                }
                let bound = u.x_field(*t).unwrap();
                let sup = bound.iter().copied().fold(0.0, f64::max);
                for (xi, ui) in x.values().iter().zip(&bound) {
                    assert!(xi - ui <= 1e-2 * sup, "seed {seed}, height {height}, t {t}: {xi} > {ui}");
                }
            }
        }
    }
}
