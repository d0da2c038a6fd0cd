use super::*;

fn brute_modulus(p: &SignalPath, h: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..p.len() {
        for j in i..p.len() {
            if p.time(j) - p.time(i) > h + 1e-12 {
                break;
            }
            for k in 0..p.dim() {
                best = best.max((p.get(j, k) - p.get(i, k)).abs());
            }
        }
    }
    best
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[test]
fn sample_length_matches_window() {
    let p = sample_path(NoiseModel::brownian(2), 0.0, 1.0, 0.01, 1).unwrap();
    assert_eq!(p.len(), 101);
    assert_eq!(p.dim(), 2);
    assert!((p.t1() - 1.0).abs() < 1e-12);
}

#[test]
fn rejects_bad_inputs() {
    assert!(sample_path(NoiseModel::brownian(1), 0.0, 1.0, 0.0, 1).is_err());
    assert!(sample_path(NoiseModel::brownian(1), 1.0, 0.0, 0.1, 1).is_err());
    assert!(sample_path(NoiseModel::fbm(1.2, 1), 0.0, 1.0, 0.1, 1).is_err());
}

#[test]
fn same_seed_same_path() {
    let a = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 0.01, 42).unwrap();
    let b = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 0.01, 42).unwrap();
    assert_eq!(a.to_vec(), b.to_vec());
    let c = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 0.01, 43).unwrap();
    assert_ne!(a.to_vec(), c.to_vec());
}

#[test]
fn pinned_at_time_zero() {
    let p = sample_path(NoiseModel::fbm(0.7, 2), -2.0, 1.0, 0.01, 5).unwrap();
    let i0 = p.index_of(0.0).unwrap();
    assert_eq!(p.sample(i0), vec![0.0, 0.0]);
    let q = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 0.01, 5).unwrap();
    assert_eq!(q.get(0, 0), 0.0);
}

#[test]
fn brownian_increment_variance_is_dt() {
    let dt = 0.01;
    let seeds = 10_000u64;
    let incs: Vec<f64> = (0..seeds)
        .map(|s| {
            let p = sample_path(NoiseModel::brownian(1), 0.0, 1.0, dt, s).unwrap();
            p.get(38, 0) - p.get(37, 0)
        })
        .collect();
    let sq: Vec<f64> = incs.iter().map(|x| x * x).collect();
    let (m, v) = mean_var(&sq);
    let se = (v / seeds as f64).sqrt();
    assert!((m - dt).abs() < 3.0 * se, "var {m} vs {dt} (se {se})");
}

#[test]
fn fbm_unit_time_variance_is_one() {
    for &h in &[0.3, 0.5, 0.7] {
        let seeds = 10_000u64;
        let sampler_model = NoiseModel::fbm(h, 1);
        let sq: Vec<f64> = (0..seeds)
            .map(|s| {
                let p = sample_path(sampler_model, 0.0, 1.0, 1.0 / 64.0, s).unwrap();
                let d = p.get(p.len() - 1, 0) - p.get(0, 0);
                d * d
            })
            .collect();
        let (m, v) = mean_var(&sq);
        let se = (v / seeds as f64).sqrt();
        assert!((m - 1.0).abs() < 4.0 * se, "H={h}: {m} (se {se})");
    }
}

#[test]
fn shift_by_zero_is_identity() {
    let p = sample_path(NoiseModel::brownian(2), 0.0, 1.0, 0.01, 3).unwrap();
    let q = p.shift(0.0).unwrap();
    assert_eq!(p.to_vec(), q.to_vec());
    assert_eq!(p.t0(), q.t0());
}

#[test]
fn shift_round_trip_is_bit_exact() {
    let p = sample_path(NoiseModel::fbm(0.3, 1), -1.0, 1.0, 0.01, 9).unwrap();
    let there = p.shift(0.5).unwrap();
    assert!((there.t0() + 1.5).abs() < 1e-12);
    let back = there.shift(-0.5).unwrap();
    let common = back.restrict(-1.0, 1.0).unwrap();
    assert_eq!(common.len(), p.len());
    for i in 0..p.len() {
        assert_eq!(common.get(i, 0).to_bits(), p.get(i, 0).to_bits());
    }
}

#[test]
fn shift_realizes_increment_identity() {
    // z_t - z_s = (θ_s z)_{t-s}
    let p = sample_path(NoiseModel::brownian(1), 0.0, 2.0, 0.01, 4).unwrap();
    let s = 0.73;
    let q = p.shift(s).unwrap();
    for &t in &[0.73, 1.0, 1.5, 2.0] {
        let lhs = p.value_at(t).unwrap()[0] - p.value_at(s).unwrap()[0];
        let rhs = q.value_at(t - s).unwrap()[0];
        assert!((lhs - rhs).abs() < 1e-14);
    }
    assert!(p.shift(0.735).is_err());
}

#[test]
fn shifted_brownian_increments_stay_stationary() {
    let dt = 0.01;
    let seeds = 10_000u64;
    let sq: Vec<f64> = (0..seeds)
        .map(|s| {
            let p = sample_path(NoiseModel::brownian(1), 0.0, 2.0, dt, s).unwrap();
            let q = p.shift(1.3).unwrap();
            let i = q.index_of(0.2).unwrap();
            (q.get(i + 1, 0) - q.get(i, 0)).powi(2)
        })
        .collect();
    let (m, v) = mean_var(&sq);
    let se = (v / seeds as f64).sqrt();
    assert!((m - dt).abs() < 3.0 * se);
}

#[test]
fn piecewise_linear_reproduces_affine_paths() {
    let p = SignalPath::from_fn(0.0, 1.0, 1.0 / 256.0, 1, "line", |t| vec![3.0 * t - 1.0]).unwrap();
    for level in [0, 3, 8] {
        let q = p.piecewise_linear(level).unwrap();
        assert!(q.distance(&p).unwrap() < 1e-14);
        assert!(q.kind().is_bounded_variation());
    }
    assert!(p.piecewise_linear(9).is_err());
}

#[test]
fn piecewise_linear_of_zero_is_zero() {
    let z = SignalPath::zero(0.0, 1.0, 0.01, 1).unwrap();
    let q = z.piecewise_linear(4).unwrap();
    assert_eq!(q.kind(), &PathKind::ConstantZero);
    assert!(q.to_vec().iter().all(|&v| v == 0.0));
}

#[test]
fn piecewise_linear_error_shrinks_with_level() {
    let p = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1.0 / 1024.0, 17).unwrap();
    let errs: Vec<f64> = [2, 4, 6, 8]
        .iter()
        .map(|&k| p.piecewise_linear(k).unwrap().sup_distance().unwrap())
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] <= w[0], "{errs:?}");
    }
}

#[test]
fn mollify_keeps_constants() {
    let p = SignalPath::from_fn(0.0, 1.0, 0.01, 2, "const", |_| vec![1.5, -2.0]).unwrap();
    let q = p.mollify(0.1).unwrap();
    assert!(q.distance(&p).unwrap() < 1e-13);
}

#[test]
fn mollify_error_bounded_by_modulus_on_sine() {
    let p = SignalPath::from_fn(0.0, 1.0, 1e-3, 1, "sine", |t| vec![(6.0 * t).sin()]).unwrap();
    for &eps in &[2e-3, 1e-2, 5e-2] {
        let q = p.mollify(eps).unwrap();
        let err = q.sup_distance().unwrap();
        let w = p.modulus_of_continuity(eps).unwrap();
        assert!(err <= w, "eps {eps}: err {err} modulus {w}");
    }
}

#[test]
fn mollify_bookkeeping_and_limits() {
    let p = sample_path(NoiseModel::brownian(1), 0.0, 1.0, 1e-3, 2).unwrap();
    let q = p.mollify(0.01).unwrap();
    assert_eq!(
        q.kind(),
        &PathKind::Mollified {
            parent: Box::new(PathKind::Brownian),
            eps: 0.01
        }
    );
    assert!(p.mollify(1e-3).is_err());
    // endpoints are preserved by the point reflection
    assert!((q.get(0, 0) - p.get(0, 0)).abs() < 1e-14);
    assert!((q.get(q.len() - 1, 0) - p.get(p.len() - 1, 0)).abs() < 1e-12);
    // error shrinks as the width shrinks
    let coarse = p.mollify(0.05).unwrap().sup_distance().unwrap();
    let fine = p.mollify(0.005).unwrap().sup_distance().unwrap();
    assert!(fine < coarse);
}

#[test]
fn modulus_of_linear_and_zero_paths() {
    let p = SignalPath::from_fn(0.0, 1.0, 0.01, 1, "line", |t| vec![t]).unwrap();
    assert!((p.modulus_of_continuity(0.25).unwrap() - 0.25).abs() < 1e-12);
    let z = SignalPath::zero(0.0, 1.0, 0.01, 3).unwrap();
    assert_eq!(z.modulus_of_continuity(0.3).unwrap(), 0.0);
    assert!(p.modulus_of_continuity(0.0).is_err());
}

#[test]
fn modulus_matches_brute_force() {
    let p = sample_path(NoiseModel::fbm(0.3, 2), 0.0, 1.0, 1.0 / 200.0, 8).unwrap();
    for &h in &[p.dt(), 0.03, 0.2, 1.0] {
        let fast = p.modulus_of_continuity(h).unwrap();
        let slow = brute_modulus(&p, h);
        assert_eq!(fast, slow, "h = {h}");
    }
    // single-step lag is the largest absolute increment
    let max_inc = (1..p.len())
        .flat_map(|i| (0..2).map(move |k| (i, k)))
        .map(|(i, k)| (p.get(i, k) - p.get(i - 1, k)).abs())
        .fold(0.0, f64::max);
    assert_eq!(p.modulus_of_continuity(p.dt()).unwrap(), max_inc);
}

#[test]
fn csv_round_trip_is_exact() {
    let p = sample_path(NoiseModel::fbm(0.7, 2), 0.0, 0.5, 0.01, 21).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t,z1,z2\n"));
    let q = SignalPath::read_csv(buf.as_slice(), "roundtrip").unwrap();
    assert_eq!(q.to_vec(), p.to_vec());
    assert_eq!(q.len(), p.len());
}

#[test]
fn value_at_interpolates_between_samples() {
    let p = SignalPath::from_fn(0.0, 1.0, 0.5, 1, "v", |t| vec![t * t]).unwrap();
    assert_eq!(p.value_at(0.5).unwrap()[0], 0.25);
    assert!((p.value_at(0.75).unwrap()[0] - 0.625).abs() < 1e-15);
    assert!(p.value_at(1.5).is_err());
}
