use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{Grid, Norm};

/// Mass by the substitution `x = r sin θ`, with `r` the support radius;
/// the integrand stays smooth up to the endpoints.
fn mass_by_substitution(z: &Zkb, t: f64) -> f64 {
    let r = z.support_radius(t);
    let n = 20_000;
    let h = PI / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let th = -PI / 2.0 + i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * z.value(t, r * th.sin()) * r * th.cos();
    }
    acc * h / 3.0
}

#[test]
fn zkb_mass_is_conserved() {
    let z = Zkb::new(2.0, 1.0).unwrap();
    for t in [0.1, 0.5] {
        assert!((mass_by_substitution(&z, t) - 1.0).abs() < 1e-10);
    }
    let z3 = Zkb::new(3.0, 2.5).unwrap();
    assert!((mass_by_substitution(&z3, 0.3) - 2.5).abs() < 1e-8);
}

#[test]
fn zkb_constant_for_quadratic_case() {
    // m = 2: mass = (4/3) C^{3/2} / √κ with κ = 1/12.
    let z = Zkb::new(2.0, 1.0).unwrap();
    let expected = (0.75 * (1.0f64 / 12.0).sqrt()).powf(2.0 / 3.0);
    assert!((z.c - expected).abs() < 1e-12);
    assert!((z.c - 0.36056).abs() < 1e-5);
}

#[test]
fn zkb_vanishes_outside_support() {
    let z = Zkb::new(2.0, 1.0).unwrap();
    for t in [0.1, 0.6, 2.0] {
        let r = z.support_radius(t);
        assert_eq!(z.value(t, r * 1.0001), 0.0);
        assert_eq!(z.value(t, -r * 1.5), 0.0);
        assert!(z.value(t, 0.9 * r) > 0.0);
    }
    assert!(zkb_profile(0.0, 0.0, 2.0, 1.0).is_err());
    assert!(Zkb::new(1.0, 1.0).is_err());
}

#[test]
fn zkb_solves_the_porous_medium_equation() {
    let z = Zkb::new(2.0, 1.0).unwrap();
    let t = 0.4;
    let (ht, hx) = (1e-5, 1e-4);
    for x in [0.0, 0.2, -0.35, 0.5] {
        let ut = (z.value(t + ht, x) - z.value(t - ht, x)) / (2.0 * ht);
        let p = |x: f64| z.value(t, x).powi(2);
        let lap = (p(x + hx) - 2.0 * p(x) + p(x - hx)) / (hx * hx);
        assert!((ut - lap).abs() < 1e-5 * (1.0 + ut.abs()), "x = {x}: {ut} vs {lap}");
    }
}

#[test]
fn initial_condition_registry() {
    let grid = Arc::new(Grid::interval(-2.0, 2.0, 99).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let specs = [
        IcSpec::Zkb { mass: 1.0, t: 0.1 },
        IcSpec::Bump { height: 2.0, center: [0.0, 0.0], width: 1.0 },
        IcSpec::Step { height: 1.0, left: -0.5, right: 0.5 },
        IcSpec::TwoBump { height: 1.0, separation: 2.0, width: 0.5 },
        IcSpec::RandomFourier { amplitude: 3.0, modes: 5, nonnegative: false },
        IcSpec::Spike { height: 1.0, exponent: 0.5, cap: 10.0 },
    ];
    for s in &specs {
        let f = s.build(&grid, 2.0, &mut rng).unwrap();
        assert_eq!(f.len(), 99, "{}", s.name());
        assert!(f.values().iter().all(|v| v.is_finite()));
    }
    let rf = specs[4].build(&grid, 2.0, &mut rng).unwrap();
    assert!((rf.norm(Norm::Linf).unwrap() - 3.0).abs() < 1e-12);
    let nn = IcSpec::RandomFourier { amplitude: 1.0, modes: 4, nonnegative: true }
        .build(&grid, 2.0, &mut rng)
        .unwrap();
    assert!(nn.min() >= 0.0);
    let bump = specs[1].build(&grid, 2.0, &mut rng).unwrap();
    assert!((bump.max() - 2.0).abs() < 1e-12);
    let names: Vec<_> = specs.iter().map(|s| s.name()).collect();
    assert_eq!(names, ["zkb", "bump", "step", "two_bump", "random_fourier", "spike"]);
    assert!(IcSpec::Bump { height: 1.0, center: [0.0, 0.0], width: 0.0 }
        .build(&grid, 2.0, &mut rng)
        .is_err());
}

#[test]
fn every_default_config_round_trips() {
    assert_eq!(experiment_names().len(), 13);
    for name in experiment_names() {
        let cfg = default_config(name).unwrap();
        assert_eq!(cfg.experiment, name);
        let text = cfg.to_toml().unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg, "{name}");
        assert!(describe(name).unwrap().contains(name));
    }
}

#[test]
fn partial_config_merges_over_defaults() {
    let cfg = parse_config(
        "experiment = \"bounds\"\nseed = 11\n[grid]\ncells = [64]\n[params]\npaths = 2\n[solver]\ndelta = 0.01\n",
    )
    .unwrap();
    let d = default_config("bounds").unwrap();
    assert_eq!(cfg.seed, 11);
    assert_eq!(cfg.grid.cells, vec![64]);
    assert_eq!(cfg.grid.lower, d.grid.lower);
    assert_eq!(cfg.count("paths").unwrap(), 2);
    assert_eq!(cfg.count("initial_conditions").unwrap(), d.count("initial_conditions").unwrap());
    assert_eq!(cfg.solver.m, d.solver.m);
    assert!(!cfg.solver.is_auto());
}

#[test]
fn config_errors_map_to_exit_code_two() {
    for text in [
        "experiment = \"no-such-thing\"",
        "seed = 3",
        "experiment = \"bounds\"\nbogus = 1",
        "experiment = \"bounds\"\n[ic]\nkind = \"nope\"",
        "experiment = [",
    ] {
        let e = parse_config(text).unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{text}: {e}");
        assert_eq!(error_code(&e), 2);
    }
    let e = parse_config("experiment = \"no-such-thing\"").unwrap_err();
    assert!(e.to_string().contains("oracle"));
    let mut cfg = default_config("oracle").unwrap();
    cfg.noise.kind = NoiseChoice::Brownian;
    assert_eq!(exit_code(&run_experiment(&cfg, None)), 2);
    let mut cfg = default_config("bounds").unwrap();
    cfg.params.remove("paths");
    assert_eq!(exit_code(&run_experiment(&cfg, None)), 2);
}

#[test]
fn report_records_relations() {
    let mut r = Report::default();
    assert!(r.at_most("a", 1.0, 2.0, BoundKind::Theory));
    assert!(!r.at_least("b", 1.0, 2.0, BoundKind::Tolerance));
    assert!(!r.passed());
    assert_eq!(r.assertion("b").unwrap().relation, Relation::AtLeast);
    assert!(!r.at_most("nan", f64::NAN, 1.0, BoundKind::Tolerance));
}

fn small_fbm() -> ExperimentConfig {
    let mut cfg = default_config("fbm-covariance").unwrap();
    cfg.params.insert("samples".into(), Param::Num(400.0));
    cfg.params.insert("hursts".into(), Param::List(vec![0.3, 0.7]));
    cfg
}

#[test]
fn summaries_are_reproducible() {
    let cfg = small_fbm();
    let a = crate::par::with_threads(1, || run_experiment(&cfg, None)).unwrap();
    let b = crate::par::with_threads(4, || run_experiment(&cfg, None)).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    let c = run_experiment(&other, None).unwrap();
    assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
}

#[test]
fn artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_experiment(&small_fbm(), Some(dir.path())).unwrap();
    for name in ["config.toml", "covariance.json", "summary.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
        assert!(s.artifacts.iter().any(|a| a == name));
    }
    let reread = load_config(&dir.path().join("config.toml")).unwrap();
    assert_eq!(reread, small_fbm());
    let on_disk = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert_eq!(on_disk, s.to_json().unwrap());
}

#[test]
fn derived_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for stream in 0..4 {
        for i in 0..256 {
            assert!(seen.insert(derive_seed(9, stream, i)));
        }
    }
    assert_eq!(derive_seed(9, 1, 5), derive_seed(9, 1, 5));
}
