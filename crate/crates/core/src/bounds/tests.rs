use super::*;
use crate::geometry::Grid;
use crate::nonlinearity::phi;
use crate::signals::{sample_path, NoiseModel};
use crate::solver::Coefficient;
use proptest::prelude::*;
use std::f64::consts::PI;

fn unit(n: usize, radius: Option<f64>) -> (Arc<Grid>, CoefficientSet) {
    let g = match radius {
        Some(r) => Grid::interval(-1.0, 1.0, n).unwrap().with_radius(r).unwrap(),
        None => Grid::interval(-1.0, 1.0, n).unwrap(),
    };
    let c = CoefficientSet::new(g.clone(), vec![Coefficient::sine_1d(0.1, PI / 2.0)]).unwrap();
    (g, c)
}

fn constant_coeff(n: usize) -> CoefficientSet {
    let g = Grid::interval(-1.0, 1.0, n).unwrap();
    CoefficientSet::new(g, vec![Coefficient::Constant { value: 1.0 }]).unwrap()
}

#[test]
fn a_constant_examples() {
    assert!((a_constant(2.0, 1.0, 1) - 1.0).abs() < 1e-15);
    assert!((a_constant(0.5, 1.0, 1) - 0.5).abs() < 1e-15);
    let a = a_constant(3.0, 1.3, 2);
    assert!((a.powf(2.0 / 3.0) - 1.3f64.powf(2.0 / 3.0) / 4.0).abs() < 1e-14);
}

#[test]
fn zero_path_single_piece() {
    let (_, c) = unit(40, None);
    let z = SignalPath::zero(0.0, 1.0, 1.0 / 256.0, 1).unwrap();
    for m in [0.5, 2.0, 3.0] {
        assert_eq!(choose_partition(&z, &c, m).unwrap(), vec![0.0, 1.0]);
    }
    let z = SignalPath::zero(0.0, 2.5, 1.0 / 64.0, 1).unwrap();
    let p = choose_partition(&z, &c, 2.0).unwrap();
    assert_eq!(p.len(), 4);
    assert!(p.windows(2).all(|w| w[1] - w[0] <= 1.0 + 1e-12));
}

#[test]
fn constant_coefficient_threshold() {
    let c = constant_coeff(20);
    for m in [2.0, 3.0] {
        let thr = 2f64.ln() / (m - 1.0);
        let z = SignalPath::from_fn(0.0, 1.0, 1.0 / 512.0, 1, "ramp", |t| vec![2.9 * thr * t]).unwrap();
        let p = choose_partition(&z, &c, m).unwrap();
        // z rises at rate 2.9·thr, so cuts fall every 1/2.9.
        assert_eq!(p.len(), 4, "{p:?}");
        for (i, t) in p.iter().enumerate().take(3) {
            assert!((t - i as f64 / 2.9).abs() < 1e-9, "{p:?}");
        }
    }
    let z = SignalPath::from_fn(0.0, 1.0, 1.0 / 512.0, 1, "ramp", |t| vec![0.99 * 2f64.ln() * t]).unwrap();
    assert_eq!(choose_partition(&z, &c, 2.0).unwrap().len(), 2);
}

#[test]
fn rougher_paths_need_more_pieces() {
    let c = constant_coeff(20);
    for seed in 0..10 {
        let z = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 1024.0, seed).unwrap();
        let z2 = SignalPath::from_fn(0.0, 1.0, 1.0 / 1024.0, 1, "scaled", |t| {
            vec![2.0 * z.value_at(t).unwrap()[0]]
        })
        .unwrap();
        let a = choose_partition(&z, &c, 2.0).unwrap().len();
        let b = choose_partition(&z2, &c, 2.0).unwrap().len();
        assert!(b >= a, "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn partition_too_fine() {
    let c = constant_coeff(20);
    let z = SignalPath::from_fn(0.0, 1.0, 1.0 / 64.0, 1, "steep", |t| vec![1e3 * t]).unwrap();
    assert!(matches!(
        choose_partition(&z, &c, 2.0),
        Err(Error::PartitionTooFine { .. })
    ));
}

#[test]
fn supersolution_point_values() {
    let g = Grid::interval(-0.9, 0.9, 19).unwrap().with_radius(1.0).unwrap();
    let c = CoefficientSet::new(g, vec![Coefficient::sine_1d(0.1, PI / 2.0)]).unwrap();
    let z = SignalPath::zero(0.0, 1.0, 1.0 / 64.0, 1).unwrap();
    let p = [0.0, 1.0];
    let k = build_supersolution(1.0, &p, &c, &z, 2.0).unwrap();
    assert!((k.a - 1.0).abs() < 1e-15);
    // Node 9 is ξ = 0.
    assert!((k.evaluate(1.0, 9).unwrap() - 0.5).abs() < 1e-14);
    let u = uniform_bound_u(&p, &c, &z, 2.0).unwrap();
    assert!((u.evaluate(1.0, 9).unwrap() - 1.0).abs() < 1e-14);
    assert!(u.evaluate(0.0, 9).unwrap().is_infinite());
    let seq: Vec<f64> = [0.5, 0.1, 0.01, 1e-4].iter().map(|&t| u.evaluate(t, 9).unwrap()).collect();
    assert!(seq.windows(2).all(|w| w[1] > w[0]));
    assert!(u.evaluate(-0.1, 9).is_err());
    assert!(build_supersolution(0.0, &p, &c, &z, 2.0).is_err());
    assert!(build_supersolution(1.0, &p, &c, &z, 0.5).is_err());
    assert!(k.global_max().unwrap() >= k.range().1);
}

#[test]
fn sigma0_examples() {
    let s = sigma0_formula(1.0, 0.0975, 1.0, 0.1, 2.0);
    assert!((s - 0.0975f64.sqrt() / 0.1).abs() < 1e-12);
    assert!((s - 3.122).abs() < 1e-3);
    assert!(sigma0_formula(1.0, 0.0975, 1.0, 0.0, 2.0).is_infinite());
    for m in [2.0, 3.0] {
        let a = sigma0_formula(1.3, 0.2, 0.8, 0.4, m);
        let b = sigma0_formula(1.3, 0.2, 0.8, 0.8, m);
        assert!((b / a - 2f64.powf(-(m - 1.0))).abs() < 1e-12);
    }
}

#[test]
fn sigma0_bounds_initial_data() {
    let (_, c) = unit(40, None);
    for seed in 0..5 {
        let z = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 512.0, seed).unwrap();
        let p = choose_partition(&z, &c, 2.0).unwrap();
        let s0 = sigma0_for(0.7, &p, &c, &z, 2.0).unwrap();
        let k = build_supersolution(s0, &p, &c, &z, 2.0).unwrap();
        let k0 = k.field(0.0).unwrap();
        assert!(k0.iter().all(|&v| v >= 0.7 * (1.0 - 1e-12)));
    }
}

#[test]
fn joins_are_monotone() {
    let (g, c) = unit(40, None);
    for m in [1.5, 2.0, 3.0] {
        for seed in 0..20 {
            let z = sample_path(NoiseModel::brownian(1), 0.0, 2.0, 1.0 / 512.0, seed).unwrap();
            let p = choose_partition(&z, &c, m).unwrap();
            for s0 in [0.01, 1.0] {
                let k = build_supersolution(s0, &p, &c, &z, m).unwrap();
                assert!(k.sigma.windows(2).all(|w| (w[1] - 0.5 * (w[0] + k.gamma)).abs() < 1e-15));
                for i in 0..k.pieces() - 1 {
                    let t = p[i + 1];
                    for n in 0..g.len() {
                        let left = k.piece_value(i, t, n);
                        let right = k.piece_value(i + 1, t, n);
                        assert!(left <= right * (1.0 + 1e-12), "m {m} seed {seed} piece {i}");
                    }
                }
            }
        }
    }
}

fn defect(k: &PiecewiseBound, c: &CoefficientSet, z: &SignalPath, t: f64) -> Vec<f64> {
    let g = k.grid();
    let i = k.piece(t).unwrap();
    let m = k.m;
    let kv = k.field(t).unwrap();
    let mu = c.mu_values(&z.value_at(t).unwrap()).unwrap();
    let inner: Vec<f64> = kv.iter().zip(&mu).map(|(k, mu)| phi(k * (-mu).exp(), m)).collect();
    let lap = g.laplacian(&inner);
    let dt_k: Vec<f64> = kv
        .iter()
        .map(|v| match k.mode {
            BoundMode::Degenerate => -v / ((m - 1.0) * (t - k.partition[i] + k.sigma[i])),
            BoundMode::Fast => -v / ((1.0 - m) * (k.sigma[i] - t)),
        })
        .collect();
    dt_k.iter()
        .zip(&lap)
        .zip(&mu)
        .map(|((d, l), mu)| d - mu.exp() * l)
        .collect()
}

#[test]
fn supersolution_defect_nonnegative() {
    let (_, c) = unit(64, None);
    for (m, seed) in [(2.0, 1), (3.0, 2), (1.5, 3)] {
        let z = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 512.0, seed).unwrap();
        let p = choose_partition(&z, &c, m).unwrap();
        let k = build_supersolution(0.5, &p, &c, &z, m).unwrap();
        for step in 0..=64 {
            let t = step as f64 / 64.0;
            let scale = k.sup_at(t).unwrap().powf(m) * 10.0;
            let tol = scale * k.grid().h().powi(2);
            let d = defect(&k, &c, &z, t);
            let worst = d.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(worst >= -tol, "m {m} t {t}: {worst} vs {tol}");
        }
    }
}

#[test]
fn fast_mode_bound() {
    let (_, c) = unit(40, None);
    let m = 0.5;
    for seed in 0..5 {
        let z = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 512.0, seed).unwrap();
        let p = choose_partition(&z, &c, m).unwrap();
        let s = fast_sigmas(2.0, &p, &c, &z, m).unwrap();
        let k = fast_diffusion_bound(&s, &p, &c, &z, m).unwrap();
        assert_eq!(k.mode, BoundMode::Fast);
        assert_eq!(k.a, a_constant(0.5, k.radius, 1));
        assert!(k.field(0.0).unwrap().iter().all(|&v| v >= 2.0 * (1.0 - 1e-12)));
        let i = k.piece(0.3).unwrap();
        let a = k.piece_value(i, 0.3, 5);
        let b = k.piece_value(i, 0.3 + 1e-3, 5);
        assert!(b < a);
        for t in (0..=32).map(|s| s as f64 / 32.0) {
            let d = defect(&k, &c, &z, t);
            let tol = 10.0 * k.sup_at(t).unwrap().powf(m) * k.grid().h().powi(2);
            assert!(d.iter().all(|&v| v >= -tol), "seed {seed} t {t}");
        }
    }
    let z = SignalPath::zero(0.0, 1.0, 1.0 / 64.0, 1).unwrap();
    let p = [0.0, 0.5, 1.0];
    assert!(matches!(
        fast_diffusion_bound(&[0.6, 0.4], &p, &c, &z, m),
        Err(Error::SigmaOrdering(_))
    ));
    assert!(fast_diffusion_bound(&[0.6, 1.7], &p, &c, &z, m).is_ok());
    assert!(fast_diffusion_bound(&[0.6], &p, &c, &z, m).is_err());
    assert!(fast_diffusion_bound(&[0.6, 1.7], &p, &c, &z, 2.0).is_err());
}

#[test]
fn delta0_matches_brute_force() {
    let (g, c) = unit(30, None);
    let z = SignalPath::zero(0.0, 1.0, 1.0 / 64.0, 1).unwrap();
    let p = [0.0, 1.0];
    let k = build_supersolution(1.0, &p, &c, &z, 2.0).unwrap();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for s in 0..=200 {
        for v in k.field(s as f64 / 200.0).unwrap() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let d0 = delta0_for(&k).unwrap();
    assert!((d0 - lo.min(1.0 / hi)).abs() < 1e-14);
    let u = uniform_bound_u(&p, &c, &z, 2.0).unwrap();
    assert!(delta0_for(&u).is_err());

    let zb = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 512.0, 4).unwrap();
    let pb = choose_partition(&zb, &c, 2.0).unwrap();
    // Shrinking σ₀ raises K everywhere: 1/max K falls, and once it is the
    // binding term δ₀ falls with it.
    let mut prev_inv = f64::INFINITY;
    let mut prev = f64::INFINITY;
    for s0 in [4.0, 1.0, 0.25, 0.05, 0.01, 0.002] {
        let k = build_supersolution(s0, &pb, &c, &zb, 2.0).unwrap();
        let (lo, hi) = k.range();
        let d = delta0_for(&k).unwrap();
        assert!(1.0 / hi <= prev_inv);
        if 1.0 / hi <= lo {
            assert!(d <= prev);
        }
        prev_inv = 1.0 / hi;
        prev = d;
    }
    let _ = g;
}

#[test]
fn csv_export() {
    let (_, c) = unit(8, None);
    let z = SignalPath::zero(0.0, 1.0, 1.0 / 16.0, 1).unwrap();
    let k = build_supersolution(1.0, &[0.0, 1.0], &c, &z, 2.0).unwrap();
    let mut buf = Vec::new();
    k.write_csv(&mut buf, &[0.0, 0.5]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 8);
    assert!(text.starts_with("t,x,value"));
}

#[test]
fn contraction_constant_flat() {
    let (_, c) = unit(63, None);
    for t1 in [0.5, 3.0] {
        let z = SignalPath::zero(0.0, t1, 1.0 / 64.0, 1).unwrap();
        let est = contraction_estimate(&c, &z).unwrap();
        assert!((est.constant - 1.5).abs() < 1e-10, "{}", est.constant);
        assert!((est.weight_ratio - 1.5).abs() < 1e-10);
        assert_eq!(est.partition, vec![0.0, t1]);
    }
    let z = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 256.0, 9).unwrap();
    let est = contraction_estimate(&c, &z).unwrap();
    assert!(est.constant >= 1.5 && est.constant.is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bound_nonincreasing_in_sigma0(seed in 0u64..1000, s0 in 0.05f64..5.0, ratio in 1.01f64..4.0, m in 1.2f64..3.0) {
        let (g, c) = unit(16, None);
        let z = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 1024.0, seed).unwrap();
        let p = choose_partition(&z, &c, m).unwrap();
        let small = build_supersolution(s0, &p, &c, &z, m).unwrap();
        let large = build_supersolution(s0 * ratio, &p, &c, &z, m).unwrap();
        for s in 0..=16 {
            let t = s as f64 / 16.0;
            let a = small.field(t).unwrap();
            let b = large.field(t).unwrap();
            for n in 0..g.len() {
                prop_assert!(b[n] <= a[n] * (1.0 + 1e-12));
            }
        }
    }
}
