use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::config::{config, sine_x, ExperimentConfig, GridSpec, NoiseChoice, NoiseSpec, Param, SolverSpec, TimeSpec};
use super::ic::{IcSpec, Zkb};
use super::{derive_seed, rng_for, BoundKind, ExperimentInfo, Output, Report};
use crate::bounds::{
    choose_partition, contraction_estimate, delta0_for, fast_diffusion_bound, fast_sigmas, uniform_bound_u,
};
use crate::geometry::{Field, Grid, Norm};
use crate::par;
use crate::rds::{absorption_check, attractor_diameter_curve, pullback, CocycleRun};
use crate::signals::{sample_path, NoiseModel, SignalPath};
use crate::solver::{
    solve_direct_bv, solve_rough, solve_transformed, very_weak_residual, CoefficientSet, SolverConfig,
    TestFunction, Trajectory,
};
use crate::{Error, Result};

pub(super) static REGISTRY: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "oracle",
        description: "Deterministic porous-medium run from a ZKB snapshot, compared in L1 with the exact \
                      source solution at the final time.",
        defaults: oracle_defaults,
        runner: oracle,
    },
    ExperimentInfo {
        name: "self-convergence",
        description: "The oracle setup on nested grids; observed L1 order against the finest run.",
        defaults: self_convergence_defaults,
        runner: self_convergence,
    },
    ExperimentInfo {
        name: "residual",
        description: "Very-weak residual of the oracle run against the registry test functions under \
                      joint refinement of the time step and the mesh.",
        defaults: residual_defaults,
        runner: residual,
    },
    ExperimentInfo {
        name: "bounds",
        description: "Random bounded initial data driven by Brownian paths stay below the \
                      data-independent supersolution U.",
        defaults: bounds_defaults,
        runner: bounds,
    },
    ExperimentInfo {
        name: "fast-diffusion",
        description: "Fast-diffusion runs (m < 1) stay below the explicit fast-diffusion supersolution.",
        defaults: fast_defaults,
        runner: fast_diffusion,
    },
    ExperimentInfo {
        name: "comparison",
        description: "Ordered pairs of initial data driven by the same path stay ordered.",
        defaults: comparison_defaults,
        runner: comparison,
    },
    ExperimentInfo {
        name: "contraction",
        description: "L1 growth of differences of solutions against the computed contraction constant.",
        defaults: contraction_defaults,
        runner: contraction,
    },
    ExperimentInfo {
        name: "wong-zakai",
        description: "Solutions driven by piecewise-linear approximations converge in the dual norm as \
                      the level rises; mollified and piecewise-linear approximations agree.",
        defaults: wong_zakai_defaults,
        runner: wong_zakai,
    },
    ExperimentInfo {
        name: "transformation",
        description: "Direct backward Euler for bounded-variation drivers against the transformed \
                      scheme; the gap halves when level and time step are refined together.",
        defaults: transformation_defaults,
        runner: transformation,
    },
    ExperimentInfo {
        name: "cocycle",
        description: "One long solve against two consecutive solves over the shifted path.",
        defaults: cocycle_defaults,
        runner: cocycle,
    },
    ExperimentInfo {
        name: "absorption",
        description: "Pullback images of large data lie in the absorbing ball of radius sup U_1.",
        defaults: absorption_defaults,
        runner: absorption,
    },
    ExperimentInfo {
        name: "attractor",
        description: "Pullback diameters of initial-data bundles shrink for Brownian and fractional drivers.",
        defaults: attractor_defaults,
        runner: attractor,
    },
    ExperimentInfo {
        name: "fbm-covariance",
        description: "Empirical covariance of the fractional Brownian motion generator against the exact \
                      covariance.",
        defaults: fbm_defaults,
        runner: fbm_covariance,
    },
];

const STREAM_PATH: u64 = 1;
const STREAM_IC: u64 = 2;
const STREAM_SAMPLE: u64 = 3;

fn params(items: &[(&str, Param)]) -> BTreeMap<String, Param> {
    items.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn tols(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn num(v: f64) -> Param {
    Param::Num(v)
}

fn list(v: &[f64]) -> Param {
    Param::List(v.to_vec())
}

/// Domain `(−4, 4)` with `f₁ = 0.5 sin(πx/4)`, `m = 2`, Brownian driver.
fn base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        experiment: name.to_string(),
        seed: 20_240_601,
        grid: GridSpec::interval(-4.0, 4.0, 200),
        solver: SolverSpec::new(2.0, 1.0 / 256.0),
        time: TimeSpec { t0: 0.0, t1: 1.0 },
        noise: NoiseSpec {
            kind: NoiseChoice::Brownian,
            dt: 1.0 / 65536.0,
            hurst: None,
        },
        coefficients: vec![sine_x(0.5, PI / 4.0)],
        ic: IcSpec::RandomFourier {
            amplitude: 5.0,
            modes: 8,
            nonnegative: false,
        },
        params: BTreeMap::new(),
        tolerances: BTreeMap::new(),
    }
}

struct Setup {
    grid: Arc<Grid>,
    coeffs: CoefficientSet,
    solver: SolverConfig,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let grid = cfg.grid.build()?;
    let coeffs = cfg.coefficient_set(&grid)?;
    let solver = cfg.solver.resolve(&grid)?;
    Ok(Setup { grid, coeffs, solver })
}

fn path(cfg: &ExperimentConfig, coeffs: &CoefficientSet, t0: f64, t1: f64, i: u64) -> Result<SignalPath> {
    cfg.noise
        .sample(coeffs.len(), t0, t1, derive_seed(cfg.seed, STREAM_PATH, i))
        .map_err(config)
}

/// Random-Fourier initial data with sup norm drawn from `[lo, 1]·amplitude`.
fn random_ic(cfg: &ExperimentConfig, grid: &Arc<Grid>, i: u64, lo: f64, nonnegative: bool) -> Result<Field> {
    let (amplitude, modes) = match cfg.ic {
        IcSpec::RandomFourier { amplitude, modes, .. } => (amplitude, modes),
        _ => return Err(Error::Config("this experiment needs ic.kind = \"random_fourier\"".into())),
    };
    let mut rng = rng_for(cfg.seed, STREAM_IC, i);
    let scale = rng.random_range(lo..=1.0);
    IcSpec::RandomFourier {
        amplitude: amplitude * scale,
        modes,
        nonnegative,
    }
    .build(grid, cfg.solver.m, &mut rng)
}

fn h_distance(a: &Field, b: &Field) -> Result<f64> {
    a.sub(b)?.norm(Norm::Hdual)
}

fn l1(f: &Field) -> Result<f64> {
    f.norm(Norm::Lp(1.0))
}

fn window(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    let TimeSpec { t0, t1 } = cfg.time;
    if !(t0 < t1) {
        return Err(Error::Config("time.t0 must be below time.t1".into()));
    }
    Ok((t0, t1))
}

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------- oracle

fn oracle_defaults() -> ExperimentConfig {
    let mut c = base("oracle");
    c.grid = GridSpec::interval(-4.0, 4.0, 800);
    c.solver = SolverSpec::new(2.0, 2.5e-4);
    c.time = TimeSpec { t0: 0.1, t1: 0.5 };
    c.noise = NoiseSpec {
        kind: NoiseChoice::Zero,
        dt: 2.5e-4,
        hurst: None,
    };
    c.ic = IcSpec::Zkb { mass: 1.0, t: 0.1 };
    c.params = params(&[("store_every", num(200.0)), ("support_check_time", num(0.6))]);
    c.tolerances = tols(&[("l1_relative_error", 0.02)]);
    c
}

fn zkb_of(cfg: &ExperimentConfig) -> Result<(Zkb, f64)> {
    match cfg.ic {
        IcSpec::Zkb { mass, t } => Ok((Zkb::new(cfg.solver.m, mass).map_err(config)?, t)),
        _ => Err(Error::Config("this experiment needs ic.kind = \"zkb\"".into())),
    }
}

fn check_zero_noise(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.noise.kind != NoiseChoice::Zero {
        return Err(Error::Config("this experiment compares with a deterministic solution; use noise.kind = \"zero\"".into()));
    }
    Ok(())
}

/// Runs the oracle problem on a grid with `cells` cells and step `dt`,
/// storing `Y` (equal to `X` for the zero path).
fn oracle_run(cfg: &ExperimentConfig, cells: usize, dt: f64, store_every: usize) -> Result<(Trajectory, CoefficientSet, SignalPath)> {
    let (t0, t1) = window(cfg)?;
    let grid = cfg.grid.build_with_cells(&vec![cells; cfg.grid.lower.len()])?;
    let coeffs = cfg.coefficient_set(&grid)?;
    let mut spec = cfg.solver.clone();
    spec.dt = dt;
    let mut solver = spec.resolve(&grid)?;
    solver.store_every = store_every;
    let z = SignalPath::zero(t0, t1, dt, coeffs.len()).map_err(config)?;
    let x0 = cfg.ic.build(&grid, cfg.solver.m, &mut rng_for(cfg.seed, STREAM_IC, 0))?;
    let traj = solve_transformed(&x0, &z, &solver, &coeffs)?;
    Ok((traj, coeffs, z))
}

fn oracle(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    check_zero_noise(cfg)?;
    let (zkb, t_ic) = zkb_of(cfg)?;
    let (t0, t1) = window(cfg)?;
    let half_width = cfg
        .grid
        .lower
        .iter()
        .map(|a| a.abs())
        .chain(cfg.grid.upper.iter().map(|b| b.abs()))
        .fold(f64::INFINITY, f64::min);
    let check_t = cfg.param("support_check_time")?;
    rep.at_most(
        "support_radius",
        zkb.support_radius(t_ic + check_t - t0),
        half_width,
        BoundKind::Theory,
    );
    let cells = cfg.grid.cells[0];
    let (traj, _, _) = oracle_run(cfg, cells, cfg.solver.dt, cfg.count("store_every")?.max(1))?;
    let grid = traj.grid().clone();
    let exact = Field::from_fn(grid.clone(), |p| zkb.value(t_ic + t1 - t0, p[0]))?;
    let num = traj.final_field();
    let diff = num.sub(&exact)?;
    let err = l1(&diff)?;
    let rel = err / l1(&exact)?;
    rep.at_most("l1_relative_error", rel, cfg.tolerance("l1_relative_error")?, BoundKind::Tolerance);
    #[derive(Serialize)]
    struct ErrorReport {
        time: f64,
        cells: usize,
        delta: f64,
        l1_error: f64,
        l1_relative_error: f64,
        linf_error: f64,
        mass_exact: f64,
        mass_numeric: f64,
    }
    let er = ErrorReport {
        time: t1,
        cells,
        delta: traj.config.delta,
        l1_error: err,
        l1_relative_error: rel,
        linf_error: diff.norm(Norm::Linf)?,
        mass_exact: grid.integrate(exact.values()),
        mass_numeric: grid.integrate(num.values()),
    };
    rep.metric("delta", traj.config.delta);
    rep.metric("l1_error", err);
    out.file("solution.csv", |w| traj.write_csv(w))?;
    out.json("error.json", &er)?;
    Ok(())
}

// ---------------------------------------------------------------- self-convergence

fn self_convergence_defaults() -> ExperimentConfig {
    let mut c = oracle_defaults();
    c.experiment = "self-convergence".into();
    c.params = params(&[
        ("cells", list(&[100.0, 200.0, 400.0, 800.0])),
        ("reference_cells", num(1600.0)),
    ]);
    c.tolerances = tols(&[("min_order", 0.8)]);
    c
}

/// Values of a fine 1D/2D field at the nodes of a nested coarse grid.
fn restrict_nested(fine: &Field, coarse: &Arc<Grid>) -> Result<Field> {
    let fg = fine.grid();
    let mut ratios = Vec::new();
    for (fa, ca) in fg.axes().iter().zip(coarse.axes()) {
        let r = (fa.n + 1) as f64 / (ca.n + 1) as f64;
        if r.fract() != 0.0 || fa.a != ca.a || fa.b != ca.b {
            return Err(Error::Config("reference grid must refine every run grid by a whole factor".into()));
        }
        ratios.push(r as usize);
    }
    let fnx = fg.axes()[0].n;
    let cnx = coarse.axes()[0].n;
    let values = (0..coarse.len())
        .map(|idx| {
            let (i, j) = (idx % cnx, idx / cnx);
            let fi = (i + 1) * ratios[0] - 1;
            let fj = if ratios.len() == 2 { (j + 1) * ratios[1] - 1 } else { 0 };
            fine.values()[fj * fnx + fi]
        })
        .collect();
    Field::new(coarse.clone(), values)
}

fn self_convergence(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    check_zero_noise(cfg)?;
    let cells: Vec<usize> = cfg.list("cells")?.into_iter().map(|c| c as usize).collect();
    let reference = cfg.count("reference_cells")?;
    if cells.len() < 2 {
        return Err(Error::Config("params.cells needs at least two resolutions".into()));
    }
    let mut all = cells.clone();
    all.push(reference);
    let runs = par::try_map(&all, |&n| oracle_run(cfg, n, cfg.solver.dt, usize::MAX).map(|r| r.0))?;
    let fine = runs.last().expect("reference run").final_field().clone();
    let mut h = Vec::new();
    let mut errors = Vec::new();
    for (n, traj) in cells.iter().zip(&runs) {
        let coarse = traj.final_field();
        let r = restrict_nested(&fine, coarse.grid())?;
        errors.push(l1(&coarse.sub(&r)?)?);
        h.push((cfg.grid.upper[0] - cfg.grid.lower[0]) / *n as f64);
    }
    let order = loglog_slope(&h, &errors);
    let pairwise: Vec<f64> = (1..errors.len())
        .map(|i| (errors[i - 1] / errors[i]).ln() / (h[i - 1] / h[i]).ln())
        .collect();
    rep.at_least("observed_order", order, cfg.tolerance("min_order")?, BoundKind::Tolerance);
    rep.metric("cells", &cells);
    rep.metric("l1_errors", &errors);
    rep.metric("pairwise_orders", &pairwise);
    out.json(
        "convergence.json",
        &serde_json::json!({ "cells": cells, "h": h, "l1_errors": errors, "order": order, "pairwise_orders": pairwise }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------- residual

fn residual_defaults() -> ExperimentConfig {
    let mut c = oracle_defaults();
    c.experiment = "residual".into();
    c.params = params(&[
        ("cells", list(&[100.0, 200.0, 400.0, 800.0])),
        ("dt", list(&[2e-3, 1e-3, 5e-4, 2.5e-4])),
    ]);
    c.tolerances = tols(&[("min_slope", 0.8)]);
    c
}

fn residual(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    check_zero_noise(cfg)?;
    let cells: Vec<usize> = cfg.list("cells")?.into_iter().map(|c| c as usize).collect();
    let dts = cfg.list("dt")?;
    if cells.len() != dts.len() || cells.len() < 2 {
        return Err(Error::Config("params.cells and params.dt need equal lengths ≥ 2".into()));
    }
    let jobs: Vec<(usize, f64)> = cells.iter().copied().zip(dts.iter().copied()).collect();
    let fns = TestFunction::registry();
    let table = par::try_map(&jobs, |&(n, dt)| -> Result<Vec<f64>> {
        let (traj, coeffs, z) = oracle_run(cfg, n, dt, 1)?;
        fns.iter().map(|eta| very_weak_residual(&traj, eta, &coeffs, &z)).collect()
    })?;
    let min_slope = cfg.tolerance("min_slope")?;
    let mut rows = Vec::new();
    for (k, eta) in fns.iter().enumerate() {
        let r: Vec<f64> = table.iter().map(|row| row[k]).collect();
        let slope = loglog_slope(&dts, &r);
        rep.at_least(
            &format!("slope_q{}_k{}", eta.q, eta.k[0]),
            slope,
            min_slope,
            BoundKind::Tolerance,
        );
        rows.push(serde_json::json!({ "q": eta.q, "k": eta.k[0], "residuals": r, "slope": slope }));
    }
    rep.metric("dt", &dts);
    out.json("residuals.json", &serde_json::json!({ "cells": cells, "dt": dts, "functions": rows }))?;
    Ok(())
}

// ---------------------------------------------------------------- bounds

fn bounds_defaults() -> ExperimentConfig {
    let mut c = base("bounds");
    c.params = params(&[
        ("paths", num(10.0)),
        ("initial_conditions", num(50.0)),
        ("t_min", num(0.05)),
        ("store_every", num(4.0)),
    ]);
    c.tolerances = tols(&[("relative_excess", 1e-2)]);
    c
}

/// `max_node (X_t − B_t) / ‖B_t‖_∞` over stored times `t ≥ t_min`.
fn worst_excess(traj: &Trajectory, bound: &[Vec<f64>], t_min: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for ((t, f), b) in traj.times.iter().zip(&traj.fields).zip(bound) {
        if *t < t_min - 1e-12 {
            continue;
        }
        let sup = b.iter().copied().fold(0.0, f64::max);
        let ex = f
            .values()
            .iter()
            .zip(b)
            .map(|(x, u)| x - u)
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(ex / sup);
    }
    worst
}

fn bounds(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let mut solver = s.solver.clone();
    solver.store_every = cfg.count("store_every")?.max(1);
    let (t0, t1) = window(cfg)?;
    let n_paths = cfg.count("paths")?;
    let n_ic = cfg.count("initial_conditions")?;
    let t_min = cfg.param("t_min")?;
    let m = solver.m;

    let per_path = par::try_map(&(0..n_paths as u64).collect::<Vec<_>>(), |&p| -> Result<_> {
        let z = path(cfg, &s.coeffs, t0, t1, p)?;
        let partition = choose_partition(&z, &s.coeffs, m)?;
        let u = uniform_bound_u(&partition, &s.coeffs, &z, m)?;
        Ok((z, partition, u))
    })?;
    let jobs: Vec<(usize, u64)> = (0..n_paths)
        .flat_map(|p| (0..n_ic as u64).map(move |j| (p, j)))
        .collect();
    let results = par::try_map(&jobs, |&(p, j)| -> Result<(f64, Vec<f64>)> {
        let (z, _, u) = &per_path[p];
        let x0 = random_ic(cfg, &s.grid, j, 0.1, false)?;
        let traj = solve_rough(&x0, z, &solver, &s.coeffs)?;
        let ub: Vec<Vec<f64>> = traj
            .times
            .iter()
            .map(|&t| if t < t_min - 1e-12 { Ok(Vec::new()) } else { u.x_field(t) })
            .collect::<Result<_>>()?;
        let sups = ub.iter().map(|b| b.iter().copied().fold(0.0, f64::max)).collect();
        Ok((worst_excess(&traj, &ub, t_min), sups))
    })?;
    let worst = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    rep.at_most(
        "max_relative_excess",
        worst,
        cfg.tolerance("relative_excess")?,
        BoundKind::Theory,
    );
    let pieces: Vec<usize> = per_path.iter().map(|(_, p, _)| p.len() - 1).collect();
    let gamma: Vec<f64> = per_path.iter().map(|(_, _, u)| u.gamma).collect();
    let u_final: Vec<f64> = per_path
        .iter()
        .map(|(_, _, u)| u.x_sup_at(t1))
        .collect::<Result<_>>()?;
    rep.metric("pieces", &pieces);
    rep.metric("gamma", &gamma);
    rep.metric("u_sup_final", &u_final);
    if out.enabled() {
        let (z, _, u) = &per_path[0];
        let times: Vec<f64> = (1..=20).map(|k| t0 + (t1 - t0) * k as f64 / 20.0).collect();
        out.file("bound_U.csv", |w| u.write_csv(w, &times))?;
        out.file("path.csv", |w| z.write_csv(w))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- fast diffusion

fn fast_defaults() -> ExperimentConfig {
    let mut c = base("fast-diffusion");
    c.solver = SolverSpec::new(0.5, 1.0 / 256.0);
    c.noise.dt = 1.0 / 16384.0;
    c.ic = IcSpec::Bump {
        height: 2.0,
        center: [0.0, 0.0],
        width: 2.0,
    };
    c.params = params(&[("paths", num(3.0))]);
    c.tolerances = tols(&[("relative_excess", 1e-2)]);
    c
}

fn fast_diffusion(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let (t0, t1) = window(cfg)?;
    let m = s.solver.m;
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Config("fast-diffusion needs 0 < solver.m < 1".into()));
    }
    let x0 = cfg.ic.build(&s.grid, m, &mut rng_for(cfg.seed, STREAM_IC, 0))?;
    let n_paths = cfg.count("paths")?;
    let runs = par::try_map(&(0..n_paths as u64).collect::<Vec<_>>(), |&p| -> Result<_> {
        let z = path(cfg, &s.coeffs, t0, t1, p)?;
        let partition = choose_partition(&z, &s.coeffs, m)?;
        let mu0 = s.coeffs.mu_values(&z.value_at(t0)?)?;
        let y0_sup = x0
            .values()
            .iter()
            .zip(&mu0)
            .map(|(x, mu)| (x * mu.exp()).abs())
            .fold(0.0, f64::max);
        let sigma = fast_sigmas(y0_sup, &partition, &s.coeffs, &z, m)?;
        let k = fast_diffusion_bound(&sigma, &partition, &s.coeffs, &z, m)?;
        let mut solver = s.solver.clone();
        let d0 = delta0_for(&k)?;
        if cfg.solver.is_auto() {
            solver.delta = solver.delta.min(d0);
        }
        let traj = solve_rough(&x0, &z, &solver, &s.coeffs)?;
        let kb: Vec<Vec<f64>> = traj.times.iter().map(|&t| k.x_field(t)).collect::<Result<_>>()?;
        Ok((worst_excess(&traj, &kb, t0), solver.delta, d0, partition.len() - 1))
    })?;
    let worst = runs.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    rep.at_most(
        "max_relative_excess",
        worst,
        cfg.tolerance("relative_excess")?,
        BoundKind::Theory,
    );
    rep.metric("delta", runs.iter().map(|r| r.1).collect::<Vec<_>>());
    rep.metric("delta0", runs.iter().map(|r| r.2).collect::<Vec<_>>());
    rep.metric("pieces", runs.iter().map(|r| r.3).collect::<Vec<_>>());
    out.json("fast_diffusion.json", &rep.metrics)?;
    Ok(())
}

// ---------------------------------------------------------------- comparison

fn comparison_defaults() -> ExperimentConfig {
    let mut c = base("comparison");
    c.noise.dt = 1.0 / 1024.0;
    c.params = params(&[("paths", num(10.0)), ("pairs_per_path", num(10.0))]);
    c.tolerances = tols(&[("min_gap", -1e-8)]);
    c
}

fn comparison(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let (t0, t1) = window(cfg)?;
    let n_paths = cfg.count("paths")?;
    let n_pairs = cfg.count("pairs_per_path")?;
    let paths: Vec<SignalPath> = (0..n_paths as u64)
        .map(|p| path(cfg, &s.coeffs, t0, t1, p))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..n_paths)
        .flat_map(|p| (0..n_pairs as u64).map(move |j| (p, j)))
        .collect();
    let gaps = par::try_map(&jobs, |&(p, j)| -> Result<f64> {
        let lower = random_ic(cfg, &s.grid, 2 * j, 0.1, false)?;
        let lift = random_ic(cfg, &s.grid, 2 * j + 1, 0.1, true)?;
        let upper = Field::new(
            s.grid.clone(),
            lower.values().iter().zip(lift.values()).map(|(a, b)| a + b).collect(),
        )?;
        let a = solve_rough(&lower, &paths[p], &s.solver, &s.coeffs)?;
        let b = solve_rough(&upper, &paths[p], &s.solver, &s.coeffs)?;
        let mut gap = f64::INFINITY;
        for (fa, fb) in a.fields.iter().zip(&b.fields) {
            gap = gap.min(fb.sub(fa)?.min());
        }
        Ok(gap)
    })?;
    let worst = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    rep.at_least("min_ordered_gap", worst, cfg.tolerance("min_gap")?, BoundKind::Tolerance);
    rep.metric("pairs", gaps.len());
    out.json("comparison.json", &serde_json::json!({ "min_gaps": gaps }))?;
    Ok(())
}

// ---------------------------------------------------------------- contraction

fn contraction_defaults() -> ExperimentConfig {
    let mut c = comparison_defaults();
    c.experiment = "contraction".into();
    c.tolerances = BTreeMap::new();
    c
}

fn contraction(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let (t0, t1) = window(cfg)?;
    let n_paths = cfg.count("paths")?;
    let n_pairs = cfg.count("pairs_per_path")?;
    let per_path = par::try_map(&(0..n_paths as u64).collect::<Vec<_>>(), |&p| -> Result<_> {
        let z = path(cfg, &s.coeffs, t0, t1, p)?;
        let est = contraction_estimate(&s.coeffs, &z)?;
        Ok((z, est))
    })?;
    let jobs: Vec<(usize, u64)> = (0..n_paths)
        .flat_map(|p| (0..n_pairs as u64).map(move |j| (p, j)))
        .collect();
    let ratios = par::try_map(&jobs, |&(p, j)| -> Result<(f64, f64)> {
        let (z, _) = &per_path[p];
        let x1 = random_ic(cfg, &s.grid, 2 * j, 0.1, false)?;
        let x2 = random_ic(cfg, &s.grid, 2 * j + 1, 0.1, false)?;
        let a = solve_rough(&x1, z, &s.solver, &s.coeffs)?;
        let b = solve_rough(&x2, z, &s.solver, &s.coeffs)?;
        let d0 = x1.sub(&x2)?;
        let (n0, p0) = (l1(&d0)?, d0.positive_part_l1());
        let (mut full, mut pos) = (0.0f64, 0.0f64);
        for (fa, fb) in a.fields.iter().zip(&b.fields) {
            let d = fa.sub(fb)?;
            full = full.max(l1(&d)? / n0);
            pos = pos.max(d.positive_part_l1() / p0);
        }
        Ok((full, pos))
    })?;
    let mut worst_full: f64 = 0.0;
    let mut worst_pos: f64 = 0.0;
    for (&(p, _), &(full, pos)) in jobs.iter().zip(&ratios) {
        let c = per_path[p].1.constant;
        worst_full = worst_full.max(full / c);
        worst_pos = worst_pos.max(pos / c);
    }
    rep.at_most("l1_ratio_over_constant", worst_full, 1.0, BoundKind::Theory);
    rep.at_most("positive_part_ratio_over_constant", worst_pos, 1.0, BoundKind::Theory);
    let constants: Vec<f64> = per_path.iter().map(|(_, e)| e.constant).collect();
    let weight_ratios: Vec<f64> = per_path.iter().map(|(_, e)| e.weight_ratio).collect();
    let max_full = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
    rep.metric("constants", &constants);
    rep.metric("weight_ratios", &weight_ratios);
    rep.metric("max_measured_ratio", max_full);
    out.json(
        "contraction.json",
        &serde_json::json!({ "constants": constants, "weight_ratios": weight_ratios, "ratios": ratios }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------- Wong-Zakai

fn wong_zakai_defaults() -> ExperimentConfig {
    let mut c = base("wong-zakai");
    let t = 0.25;
    c.time = TimeSpec { t0: 0.0, t1: t };
    c.solver = SolverSpec::new(2.0, t / 1024.0);
    c.noise.dt = t / 4096.0;
    c.ic = IcSpec::Bump {
        height: 1.0,
        center: [0.0, 0.0],
        width: 2.0,
    };
    c.params = params(&[
        ("levels", list(&[4.0, 5.0, 6.0, 7.0, 8.0, 9.0])),
        ("reference_level", num(10.0)),
        ("mollify_level", num(8.0)),
    ]);
    c.tolerances = tols(&[
        ("finest_distance", 1e-3),
        ("nonmonotone_steps", 1.0),
        ("nonmonotone_increase", 0.2),
        ("sequence_factor", 3.0),
    ]);
    c
}

fn wong_zakai(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let (t0, t1) = window(cfg)?;
    let z = path(cfg, &s.coeffs, t0, t1, 0)?;
    let x0 = cfg.ic.build(&s.grid, s.solver.m, &mut rng_for(cfg.seed, STREAM_IC, 0))?;
    let levels: Vec<u32> = cfg.list("levels")?.into_iter().map(|l| l as u32).collect();
    let reference = cfg.count("reference_level")? as u32;
    let moll_level = cfg.count("mollify_level")? as u32;
    if levels.is_empty() || !levels.contains(&moll_level) {
        return Err(Error::Config("params.levels must contain params.mollify_level".into()));
    }
    let mut drivers: Vec<SignalPath> = levels
        .iter()
        .chain(std::iter::once(&reference))
        .map(|&l| z.piecewise_linear(l).map_err(config))
        .collect::<Result<_>>()?;
    drivers.push(z.mollify((t1 - t0) / (1u64 << moll_level) as f64).map_err(config)?);
    let finals = par::try_map(&drivers, |d| -> Result<Field> {
        Ok(solve_rough(&x0, d, &s.solver, &s.coeffs)?.final_field().clone())
    })?;
    let nl = levels.len();
    let reference_field = &finals[nl];
    let dist: Vec<f64> = finals[..nl]
        .iter()
        .map(|f| h_distance(f, reference_field))
        .collect::<Result<_>>()?;
    let mut violations = 0usize;
    let mut worst_increase: f64 = 0.0;
    for w in dist.windows(2) {
        if w[1] > w[0] {
            violations += 1;
            worst_increase = worst_increase.max(w[1] / w[0] - 1.0);
        }
    }
    rep.at_most(
        "finest_level_distance",
        dist[nl - 1],
        cfg.tolerance("finest_distance")?,
        BoundKind::Tolerance,
    );
    rep.at_most(
        "nonmonotone_steps",
        violations as f64,
        cfg.tolerance("nonmonotone_steps")?,
        BoundKind::Tolerance,
    );
    rep.at_most(
        "nonmonotone_increase",
        worst_increase,
        cfg.tolerance("nonmonotone_increase")?,
        BoundKind::Tolerance,
    );
    let k = levels.iter().position(|&l| l == moll_level).expect("checked above");
    let seq = h_distance(&finals[nl + 1], &finals[k])?;
    rep.at_most(
        "mollified_vs_piecewise_linear",
        seq,
        cfg.tolerance("sequence_factor")? * dist[k],
        BoundKind::Tolerance,
    );
    rep.metric("levels", &levels);
    rep.metric("h_distances", &dist);
    rep.metric("mollified_distance", seq);
    out.json(
        "wong_zakai.json",
        &serde_json::json!({ "levels": levels, "reference_level": reference, "h_distances": dist, "mollified_vs_level": seq }),
    )?;
    if out.enabled() {
        out.file("path.csv", |w| z.write_csv(w))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- transformation

fn transformation_defaults() -> ExperimentConfig {
    let mut c = wong_zakai_defaults();
    c.experiment = "transformation".into();
    c.params = params(&[("level", num(8.0)), ("dt_refinement", num(4.0))]);
    c.tolerances = tols(&[("ratio_min", 0.375), ("ratio_max", 0.625)]);
    c
}

fn transformation(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let (t0, t1) = window(cfg)?;
    let z = path(cfg, &s.coeffs, t0, t1, 0)?;
    let x0 = cfg.ic.build(&s.grid, s.solver.m, &mut rng_for(cfg.seed, STREAM_IC, 0))?;
    let level = cfg.count("level")? as u32;
    let refine = cfg.param("dt_refinement")?;
    let setups = [(level, s.solver.dt), (level + 1, s.solver.dt / refine)];
    let dists = par::try_map(&setups, |&(l, dt)| -> Result<f64> {
        let zl = z.piecewise_linear(l).map_err(config)?;
        let mut solver = s.solver.clone();
        solver.dt = dt;
        let a = solve_direct_bv(&x0, &zl, &solver, &s.coeffs)?;
        let b = solve_rough(&x0, &zl, &solver, &s.coeffs)?;
        h_distance(a.final_field(), b.final_field())
    })?;
    let ratio = dists[1] / dists[0];
    rep.at_least("refined_over_coarse", ratio, cfg.tolerance("ratio_min")?, BoundKind::Tolerance);
    rep.at_most("refined_over_coarse_upper", ratio, cfg.tolerance("ratio_max")?, BoundKind::Tolerance);
    rep.metric("h_distances", &dists);
    out.json("transformation.json", &serde_json::json!({ "h_distances": dists, "ratio": ratio }))?;
    Ok(())
}

// ---------------------------------------------------------------- cocycle

fn cocycle_defaults() -> ExperimentConfig {
    let mut c = base("cocycle");
    c.grid = GridSpec::interval(-4.0, 4.0, 100);
    c.solver = SolverSpec::new(2.0, 1.0 / 128.0);
    c.solver.delta = super::DeltaSpec::Value(1e-4);
    c.solver.newton_tol = 1e-12;
    c.time = TimeSpec { t0: 0.0, t1: 2.0 };
    c.noise.dt = 1.0 / 1024.0;
    c.params = params(&[("samples", num(20.0))]);
    c.tolerances = tols(&[("l1_defect", 1e-8)]);
    c
}

fn cocycle(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let (t0, t1) = window(cfg)?;
    let omega = path(cfg, &s.coeffs, t0, t1, 0)?;
    let run = CocycleRun::new(omega, s.coeffs.clone(), s.solver.clone()).map_err(config)?;
    let dt = s.solver.dt;
    let steps = ((t1 - t0) / dt).round() as u64;
    let samples = cfg.count("samples")?;
    let cases: Vec<(f64, f64, Field)> = (0..samples as u64)
        .map(|i| -> Result<_> {
            let mut rng = rng_for(cfg.seed, STREAM_SAMPLE, i);
            let a = rng.random_range(1..steps);
            let b = rng.random_range(1..=steps - a);
            let x = random_ic(cfg, &s.grid, i, 0.1, false)?;
            Ok((a as f64 * dt, b as f64 * dt, x))
        })
        .collect::<Result<_>>()?;
    let defects = par::try_map(&cases, |(a, b, x)| -> Result<f64> {
        let one = run.cocycle(a + b, t0, x)?;
        let mid = run.cocycle(*a, t0, x)?;
        let two = run.cocycle(*b, t0 + a, &mid)?;
        l1(&one.sub(&two)?)
    })?;
    let worst = defects.iter().copied().fold(0.0, f64::max);
    rep.at_most("max_l1_defect", worst, cfg.tolerance("l1_defect")?, BoundKind::Tolerance);
    let st: Vec<(f64, f64)> = cases.iter().map(|(a, b, _)| (*a, *b)).collect();
    out.json("cocycle.json", &serde_json::json!({ "s_t": st, "l1_defects": defects }))?;
    Ok(())
}

// ---------------------------------------------------------------- absorption

fn absorption_defaults() -> ExperimentConfig {
    let mut c = base("absorption");
    c.grid = GridSpec::interval(-4.0, 4.0, 100);
    c.solver = SolverSpec::new(2.0, 1.0 / 128.0);
    c.solver.delta = super::DeltaSpec::Value(1e-5);
    c.time = TimeSpec { t0: -4.0, t1: 0.0 };
    c.ic = IcSpec::RandomFourier {
        amplitude: 1.0,
        modes: 8,
        nonnegative: true,
    };
    c.params = params(&[
        ("paths", num(3.0)),
        ("bundle", num(8.0)),
        ("sup_min", num(1.0)),
        ("sup_max", num(1000.0)),
        ("times", list(&[1.0, 2.0, 4.0])),
    ]);
    c.tolerances = tols(&[("radius_rtol", 1e-2)]);
    c
}

/// Random-Fourier data with sup norms spaced geometrically in `[lo, hi]`.
fn geometric_bundle(cfg: &ExperimentConfig, grid: &Arc<Grid>, n: usize, lo: f64, hi: f64) -> Result<Vec<Field>> {
    let (modes, nonnegative) = match cfg.ic {
        IcSpec::RandomFourier { modes, nonnegative, .. } => (modes, nonnegative),
        _ => return Err(Error::Config("this experiment needs ic.kind = \"random_fourier\"".into())),
    };
    (0..n)
        .map(|j| {
            let frac = if n > 1 { j as f64 / (n - 1) as f64 } else { 1.0 };
            let amplitude = lo * (hi / lo).powf(frac);
            IcSpec::RandomFourier {
                amplitude,
                modes,
                nonnegative,
            }
            .build(grid, cfg.solver.m, &mut rng_for(cfg.seed, STREAM_IC, j as u64))
        })
        .collect()
}

fn absorption(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let (t0, t1) = window(cfg)?;
    let times = cfg.list("times")?;
    let bundle = geometric_bundle(
        cfg,
        &s.grid,
        cfg.count("bundle")?,
        cfg.param("sup_min")?,
        cfg.param("sup_max")?,
    )?;
    let rtol = cfg.tolerance("radius_rtol")?;
    let n_paths = cfg.count("paths")?;
    let mut worst = BTreeMap::new();
    let mut radii = Vec::new();
    for p in 0..n_paths as u64 {
        let omega = path(cfg, &s.coeffs, t0, t1, p)?;
        let run = CocycleRun::new(omega, s.coeffs.clone(), s.solver.clone()).map_err(config)?;
        let report = pullback(&run, &bundle, &times, &[Norm::Lp(1.0), Norm::Linf])?;
        let checks = absorption_check(&report, &run, rtol)?;
        for c in &checks {
            let e = worst.entry(format!("{}", c.time)).or_insert(0.0f64);
            *e = e.max(c.max_sup / c.radius);
        }
        radii.push(checks[0].radius);
        if p == 0 {
            out.file("pullback.csv", |w| report.write_csv(w))?;
            out.json("absorption.json", &checks)?;
        }
    }
    for (t, ratio) in &worst {
        rep.at_most(&format!("sup_over_radius_t{t}"), *ratio, 1.0 + rtol, BoundKind::Theory);
    }
    rep.metric("radii", &radii);
    Ok(())
}

// ---------------------------------------------------------------- attractor

fn attractor_defaults() -> ExperimentConfig {
    let mut c = base("attractor");
    c.grid = GridSpec::interval(-4.0, 4.0, 100);
    c.solver = SolverSpec::new(2.0, 1.0 / 64.0);
    c.time = TimeSpec { t0: -4.0, t1: 0.0 };
    c.noise.dt = 1.0 / 1024.0;
    c.params = params(&[
        ("hursts", list(&[0.5, 0.3, 0.7])),
        ("omegas", num(10.0)),
        ("bundle", num(8.0)),
        ("times", list(&[0.5, 4.0])),
    ]);
    c.tolerances = tols(&[("shrink_factor", 0.5), ("min_successes", 9.0)]);
    c
}

fn attractor(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let s = setup(cfg)?;
    let (t0, t1) = window(cfg)?;
    let mut times = cfg.list("times")?;
    if times.len() != 2 {
        return Err(Error::Config("params.times must hold an early and a late pullback time".into()));
    }
    // The diameter curve needs three points; the midpoint is reported only.
    times.insert(1, 0.5 * (times[0] + times[1]));
    let bundle: Vec<Field> = (0..cfg.count("bundle")? as u64)
        .map(|j| random_ic(cfg, &s.grid, j, 0.1, false))
        .collect::<Result<_>>()?;
    let factor = cfg.tolerance("shrink_factor")?;
    let omegas = cfg.count("omegas")?;
    let mut curves = BTreeMap::new();
    for (hi, &h) in cfg.list("hursts")?.iter().enumerate() {
        let model = if h == 0.5 { NoiseModel::brownian(s.coeffs.len()) } else { NoiseModel::fbm(h, s.coeffs.len()) };
        let mut successes = 0usize;
        let mut rows = Vec::new();
        for w in 0..omegas as u64 {
            let seed = derive_seed(cfg.seed, STREAM_PATH, 1000 * hi as u64 + w);
            let omega = sample_path(model, t0, t1, cfg.noise.dt, seed).map_err(config)?;
            let run = CocycleRun::new(omega, s.coeffs.clone(), s.solver.clone()).map_err(config)?;
            let report = pullback(&run, &bundle, &times, &[Norm::Lp(1.0), Norm::Linf])?;
            let curve = attractor_diameter_curve(&report)?;
            let (early, late) = (curve.l1[0], curve.l1[2]);
            if late <= factor * early {
                successes += 1;
            }
            rows.push(curve);
        }
        rep.at_least(
            &format!("successes_h{h}"),
            successes as f64,
            cfg.tolerance("min_successes")?,
            BoundKind::Tolerance,
        );
        curves.insert(format!("{h}"), rows);
    }
    out.json("diameters.json", &curves)?;
    Ok(())
}

// ---------------------------------------------------------------- fBm covariance

fn fbm_defaults() -> ExperimentConfig {
    let mut c = base("fbm-covariance");
    c.time = TimeSpec { t0: 0.0, t1: 1.0 };
    c.noise = NoiseSpec {
        kind: NoiseChoice::Fbm,
        dt: 1.0 / 64.0,
        hurst: Some(0.5),
    };
    c.params = params(&[
        ("hursts", list(&[0.3, 0.5, 0.7])),
        ("samples", num(10000.0)),
        (
            "s",
            list(&[0.25, 0.25, 0.5, 0.125, 0.5, 1.0, 0.75, 0.375, 0.0625, 0.875]),
        ),
        (
            "t",
            list(&[0.25, 0.5, 0.5, 1.0, 1.0, 1.0, 0.25, 0.625, 0.9375, 0.875]),
        ),
    ]);
    c.tolerances = tols(&[("standard_errors", 4.0)]);
    c
}

fn fbm_covariance(cfg: &ExperimentConfig, rep: &mut Report, out: &mut Output) -> Result<()> {
    let (t0, t1) = window(cfg)?;
    let ss = cfg.list("s")?;
    let ts = cfg.list("t")?;
    if ss.len() != ts.len() || ss.is_empty() {
        return Err(Error::Config("params.s and params.t must be nonempty and of equal length".into()));
    }
    let n = cfg.count("samples")?;
    if n < 2 {
        return Err(Error::Config("params.samples must be at least 2".into()));
    }
    let band = cfg.tolerance("standard_errors")?;
    let mut table = BTreeMap::new();
    for &h in &cfg.list("hursts")? {
        let seeds: Vec<u64> = (0..n as u64).map(|i| derive_seed(cfg.seed, STREAM_SAMPLE, i)).collect();
        let products = par::try_map(&seeds, |&seed| -> Result<Vec<f64>> {
            let z = sample_path(NoiseModel::fbm(h, 1), t0, t1, cfg.noise.dt, seed).map_err(config)?;
            ss.iter()
                .zip(&ts)
                .map(|(&s, &t)| Ok(z.value_at(s)?[0] * z.value_at(t)?[0]))
                .collect()
        })?;
        let mut worst: f64 = 0.0;
        let mut rows = Vec::new();
        for k in 0..ss.len() {
            let xs: Vec<f64> = products.iter().map(|p| p[k]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let (s, t) = (ss[k] - t0, ts[k] - t0);
            let exact = 0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (t - s).abs().powf(2.0 * h));
            let zscore = (mean - exact).abs() / se;
            worst = worst.max(zscore);
            rows.push(serde_json::json!({ "s": s, "t": t, "estimate": mean, "exact": exact, "standard_error": se }));
        }
        rep.at_most(&format!("max_z_h{h}"), worst, band, BoundKind::Tolerance);
        table.insert(format!("{h}"), rows);
    }
    out.json("covariance.json", &table)?;
    Ok(())
}
