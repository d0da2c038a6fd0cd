use super::*;
use crate::signals::{sample_path, NoiseModel};
use crate::solver::Coefficient;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const PATH_DT: f64 = 1.0 / 1024.0;

fn run_with(omega: SignalPath, delta: f64, tol: f64) -> CocycleRun {
    let g = Grid::interval(-1.0, 1.0, 31).unwrap();
    let c = CoefficientSet::new(g, vec![Coefficient::sine_1d(0.1, PI / 2.0)]).unwrap();
    let mut cfg = SolverConfig::new(2.0, delta, 1.0 / 128.0).unwrap();
    cfg.newton_tol = tol;
    CocycleRun::new(omega, c, cfg).unwrap()
}

fn brownian_run(seed: u64) -> CocycleRun {
    let w = sample_path(NoiseModel::brownian(1), -4.0, 1.0, PATH_DT, seed).unwrap();
    run_with(w, 1e-4, 1e-12)
}

fn bump(g: &Arc<Grid>, height: f64, center: f64) -> Field {
    Field::from_fn(g.clone(), |p| height * (1.0 - ((p[0] - center) / 0.5).powi(2)).max(0.0)).unwrap()
}

#[test]
fn identity_and_zero() {
    let run = brownian_run(1);
    let g = run.grid().clone();
    let x = bump(&g, 1.0, 0.0);
    assert_eq!(run.cocycle(0.0, 0.3, &x).unwrap(), x);
    let zero = Field::zeros(g);
    let out = run.cocycle(0.5, -1.0, &zero).unwrap();
    assert!(out.values().iter().all(|&v| v == 0.0));
    assert!(run.cocycle(0.5, 0.8, &x).is_err());
    assert!(run.cocycle(0.5, -4.5, &x).is_err());
}

#[test]
fn cocycle_property() {
    let run = brownian_run(2);
    let g = run.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..4 {
        let s = -(rng.random_range(1..=256) as f64) / 128.0;
        let t1 = rng.random_range(1..=64) as f64 / 128.0;
        let t2 = rng.random_range(1..=64) as f64 / 128.0;
        let x = bump(&g, rng.random_range(0.2..3.0), rng.random_range(-0.3..0.3));
        let one = run.cocycle(t1 + t2, s, &x).unwrap();
        let mid = run.cocycle(t1, s, &x).unwrap();
        let two = run.cocycle(t2, s + t1, &mid).unwrap();
        let err = one.sub(&two).unwrap().norm(Norm::Lp(1.0)).unwrap();
        assert!(err <= 1e-8, "s {s} t1 {t1} t2 {t2}: {err}");
    }
}

#[test]
fn cache_reuses_results() {
    let run = brownian_run(3);
    let x = bump(run.grid(), 1.0, 0.1);
    let a = run.cocycle(0.25, -0.5, &x).unwrap();
    assert_eq!(run.cached(), 1);
    let b = run.cocycle(0.25, -0.5, &x).unwrap();
    assert_eq!(run.cached(), 1);
    assert_eq!(a, b);
    let y = bump(run.grid(), 2.0, 0.1);
    run.cocycle(0.25, -0.5, &y).unwrap();
    assert_eq!(run.cached(), 2);
}

#[test]
fn trivial_bundles() {
    let run = brownian_run(4);
    let g = run.grid().clone();
    let norms = [Norm::Lp(1.0), Norm::Lp(2.0), Norm::Linf];
    let zero = vec![Field::zeros(g.clone()); 2];
    let rep = pullback(&run, &zero, &[0.5, 1.0, 2.0], &norms).unwrap();
    assert!(rep.diameters.iter().flatten().all(|&d| d == 0.0));
    assert!(rep.sup_norms.iter().flatten().all(|&d| d == 0.0));

    let x = bump(&g, 2.0, 0.2);
    let rep = pullback(&run, &[x.clone(), x], &[0.5, 1.0, 2.0], &norms).unwrap();
    assert!(rep.diameters.iter().flatten().all(|&d| d == 0.0));
    let curve = attractor_diameter_curve(&rep).unwrap();
    assert!(curve.l1.iter().chain(&curve.linf).all(|&d| d == 0.0));
    assert!(curve.log_slope.is_none());

    assert!(pullback(&run, &zero, &[1.0, 0.5], &norms).is_err());
    assert!(pullback(&run, &zero, &[5.0], &norms).is_err());
    let short = pullback(&run, &zero, &[0.5, 1.0], &norms).unwrap();
    assert!(attractor_diameter_curve(&short).is_err());
}

#[test]
fn ordered_bundle_stays_ordered() {
    let run = brownian_run(5);
    let g = run.grid().clone();
    let bundle: Vec<Field> = [0.5, 1.0, 4.0].iter().map(|&h| bump(&g, h, 0.0)).collect();
    let rep = pullback(&run, &bundle, &[0.5, 1.0, 2.0], &[Norm::Lp(1.0), Norm::Linf]).unwrap();
    for imgs in &rep.images {
        for w in imgs.windows(2) {
            let d = w[1].sub(&w[0]).unwrap();
            assert!(d.min() >= -1e-10);
        }
    }
}

#[test]
fn absorption() {
    let run = brownian_run(6);
    let g = run.grid().clone();
    let norms = [Norm::Lp(1.0), Norm::Linf];
    let zero = vec![Field::zeros(g.clone())];
    let rep = pullback(&run, &zero, &[0.5, 1.0, 2.0], &norms).unwrap();
    let abs = absorption_check(&rep, &run, 1e-2).unwrap();
    assert_eq!(abs.len(), 2);
    assert!(abs.iter().all(|a| a.absorbed && a.margin == a.radius * 1.01));

    let big: Vec<Field> = [10.0, 1e3].iter().map(|&h| bump(&g, h, 0.1)).collect();
    let rep = pullback(&run, &big, &[1.0, 2.0], &norms).unwrap();
    let abs = absorption_check(&rep, &run, 1e-2).unwrap();
    for a in &abs {
        assert!(a.absorbed, "{a:?}");
        assert!(a.radius.is_finite() && a.radius > 0.0);
    }
    let early = pullback(&run, &big, &[0.25, 0.5], &norms).unwrap();
    assert!(absorption_check(&early, &run, 1e-2).is_err());
}

#[test]
fn deterministic_l1_diameter_nonincreasing() {
    let w = SignalPath::zero(-4.0, 0.0, PATH_DT, 1).unwrap();
    let run = run_with(w, 1e-3, 1e-11);
    let g = run.grid().clone();
    let bundle = vec![bump(&g, 3.0, -0.2), bump(&g, 0.5, 0.3), Field::zeros(g.clone())];
    let times = [0.25, 0.5, 1.0, 2.0, 4.0];
    let rep = pullback(&run, &bundle, &times, &[Norm::Lp(1.0), Norm::Linf]).unwrap();
    let curve = attractor_diameter_curve(&rep).unwrap();
    for w in curve.l1.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", curve.l1);
    }
    assert!(curve.log_slope.unwrap() < 0.0);
}

#[test]
fn report_export() {
    let run = brownian_run(8);
    let g = run.grid().clone();
    let bundle = vec![bump(&g, 1.0, 0.0), bump(&g, 2.0, 0.2)];
    let rep = pullback(&run, &bundle, &[0.5, 1.0], &[Norm::Lp(1.0), Norm::Hdual]).unwrap();
    let mut csv_buf = Vec::new();
    rep.write_csv(&mut csv_buf).unwrap();
    let text = String::from_utf8(csv_buf).unwrap();
    assert!(text.starts_with("t,diam_L1,diam_Hdual,max_sup,modulus"));
    assert_eq!(text.lines().count(), 3);
    let mut js = Vec::new();
    rep.write_json(&mut js).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
    assert_eq!(v["times"].as_array().unwrap().len(), 2);
}

#[test]
fn modulus_includes_boundary() {
    let g = Grid::interval(0.0, 1.0, 3).unwrap();
    let f = Field::new(g, vec![1.0, 1.5, 0.2]).unwrap();
    assert!((discrete_modulus(&f) - 1.3).abs() < 1e-15);
}
