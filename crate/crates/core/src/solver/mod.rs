//! Time integration of the transformed equation
//! `∂_t Y = e^{μ} Δ(Φ(e^{−μ}) Φ^δ(Y))`, `μ_t = −Σ f_k z_t^{(k)}`,
//! its untransformed form `X = e^{−μ} Y`, the direct scheme for
//! bounded-variation signals, limit solutions for rough initial data, and a
//! very-weak-formulation residual.

mod coeffs;
mod residual;
mod scheme;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{Field, Grid, Norm};
use crate::nonlinearity::PhiSpec;
use crate::signals::SignalPath;
use crate::{par, Error, Result};

pub use coeffs::{mu_field, Coefficient, CoefficientSet, Jet, MuField};
pub use residual::{very_weak_residual, TestFunction};
pub use scheme::StepStats;

use scheme::{Coefs, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub m: f64,
    pub delta: f64,
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max")]
    pub newton_max: usize,
    /// Keep every `store_every`-th step (the final step is always kept).
    #[serde(default = "default_store")]
    pub store_every: usize,
    /// Also record the `H` norm and the `Ψ^δ` energy balance.
    #[serde(default)]
    pub diagnostics: bool,
    /// How many times a failed step may be split in half.
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max() -> usize {
    50
}
fn default_store() -> usize {
    1
}
fn default_halvings() -> u32 {
    6
}

impl SolverConfig {
    pub fn new(m: f64, delta: f64, dt: f64) -> Result<Self> {
        let cfg = Self {
            m,
            delta,
            dt,
            newton_tol: default_tol(),
            newton_max: default_max(),
            store_every: default_store(),
            diagnostics: false,
            max_halvings: default_halvings(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `δ = h^{2/(m+1)}`, capped below 1.
    pub fn auto_delta(grid: &Grid, m: f64) -> f64 {
        grid.h().powf(2.0 / (m + 1.0)).min(0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step {} must be positive", self.dt)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max == 0 || self.store_every == 0 {
            return Err(Error::invalid("newton_tol, newton_max and store_every must be positive"));
        }
        PhiSpec::new(self.m, self.delta).map(|_| ())
    }

    pub fn phi_spec(&self) -> Result<PhiSpec> {
        self.validate()?;
        PhiSpec::new(self.m, self.delta)
    }
}

/// Which variable a trajectory stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum State {
    /// The transformed variable `Y = e^{μ} X`.
    Y,
    /// The physical variable `X`.
    X,
}

/// Per-stored-time diagnostics. Norms are of the stored state; the energy
/// terms refer to `Y`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub l1: f64,
    /// `‖·‖_{m+1}^{m+1}`.
    pub lm1: f64,
    pub linf: f64,
    pub hdual: Option<f64>,
    /// `h^d Σ Ψ^δ(Y)`.
    pub energy: Option<f64>,
    /// Cumulative dissipated energy since the start of the run.
    pub dissipation: Option<f64>,
    /// Cumulative energy input from the variation of `μ`.
    pub source: Option<f64>,
    /// Cumulative round-off/tolerance slack in the energy balance.
    pub slack: Option<f64>,
    pub stats: StepStats,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub state: State,
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub diagnostics: Vec<Diagnostics>,
    pub config: SolverConfig,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    state: State,
    config: &'a SolverConfig,
    seed: Option<u64>,
    times: &'a [f64],
    diagnostics: &'a [Diagnostics],
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<Grid> {
        self.fields[0].grid()
    }

    pub fn initial(&self) -> &Field {
        &self.fields[0]
    }

    pub fn final_field(&self) -> &Field {
        self.fields.last().expect("trajectories are never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectories are never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Stored field at time `t` (nearest stored time within 1e-9).
    pub fn at(&self, t: f64) -> Option<&Field> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|i| &self.fields[i])
    }

    /// Long-format CSV `t,x[,y],value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let grid = self.grid();
        let dim = grid.dim();
        let mut w = csv::Writer::from_writer(writer);
        if dim == 1 {
            w.write_record(["t", "x", "value"])?;
        } else {
            w.write_record(["t", "x", "y", "value"])?;
        }
        let pts = grid.points();
        for (t, f) in self.times.iter().zip(&self.fields) {
            for (p, v) in pts.iter().zip(f.values()) {
                let mut row = vec![format!("{t:.16e}")];
                row.extend(p[..dim].iter().map(|c| format!("{c:.16e}")));
                row.push(format!("{v:.16e}"));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar with the configuration echo, seed and diagnostics.
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(
            writer,
            &Sidecar {
                state: self.state,
                config: &self.config,
                seed: self.seed,
                times: &self.times,
                diagnostics: &self.diagnostics,
            },
        )?;
        Ok(())
    }
}

fn check_inputs(field: &Field, z: &SignalPath, coeffs: &CoefficientSet) -> Result<()> {
    if !Arc::ptr_eq(field.grid(), coeffs.grid()) && field.len() != coeffs.grid().len() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.grid().len(),
            got: field.len(),
        });
    }
    if z.dim() != coeffs.len() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.len(),
            got: z.dim(),
        });
    }
    Ok(())
}

fn step_count(z: &SignalPath, dt: f64) -> Result<usize> {
    let span = z.t1() - z.t0();
    let n = (span / dt).round();
    if n < 1.0 || (n * dt - span).abs() > 1e-9 * span.max(dt) {
        return Err(Error::invalid(format!(
            "window [{}, {}] is not a whole number of solver steps of {dt}",
            z.t0(),
            z.t1()
        )));
    }
    Ok(n as usize)
}

/// The kind of implicit step being taken.
#[derive(Clone, Copy)]
enum Scheme {
    Transformed,
    Direct,
}

struct Stepper<'a> {
    grid: &'a Grid,
    spec: PhiSpec,
    cfg: &'a SolverConfig,
    coeffs: &'a CoefficientSet,
    z: &'a SignalPath,
    scheme: Scheme,
}

impl Stepper<'_> {
    fn one(&self, u: &[f64], t: f64, t_next: f64) -> Result<(Vec<f64>, StepStats)> {
        let dt = t_next - t;
        let z1 = self.z.value_at(t_next)?;
        let (c, e, a);
        let coefs = match self.scheme {
            Scheme::Transformed => {
                let mu = self.coeffs.mu_values(&z1)?;
                e = mu.iter().map(|v| v.exp()).collect::<Vec<_>>();
                a = mu.iter().map(|v| (-self.cfg.m * v).exp()).collect::<Vec<_>>();
                Coefs {
                    c: None,
                    e: Some(&e),
                    a: Some(&a),
                }
            }
            Scheme::Direct => {
                let z0 = self.z.value_at(t)?;
                let dz: Vec<f64> = z1.iter().zip(&z0).map(|(b, a)| b - a).collect();
                c = self
                    .coeffs
                    .drift(&dz)?
                    .into_iter()
                    .map(|g| 1.0 - g)
                    .collect::<Vec<_>>();
                if c.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::invalid("signal increment too large for the direct scheme step"));
                }
                Coefs {
                    c: Some(&c),
                    e: None,
                    a: None,
                }
            }
        };
        Problem {
            grid: self.grid,
            spec: &self.spec,
            dt,
            tol: self.cfg.newton_tol,
            max_iter: self.cfg.newton_max,
            coefs,
        }
        .solve(u)
    }

    /// One step, retried as two half steps on failure.
    fn step(&self, u: &[f64], t: f64, t_next: f64, depth: u32) -> Result<(Vec<f64>, StepStats)> {
        match self.one(u, t, t_next) {
            Ok(r) => Ok(r),
            Err(e @ (Error::NewtonDiverged { .. } | Error::NonFinite(_) | Error::InvalidParameter(_)))
                if depth < self.cfg.max_halvings =>
            {
                let mid = 0.5 * (t + t_next);
                let (v, s1) = self.step(u, t, mid, depth + 1).map_err(|_| e)?;
                let (w, s2) = self.step(&v, mid, t_next, depth + 1)?;
                Ok((w, s1.merge(s2)))
            }
            Err(e) => Err(e),
        }
    }
}

fn weighted_norms(field: &Field, m: f64) -> (f64, f64, f64) {
    let g = field.grid();
    let mut l1 = 0.0;
    let mut lm = 0.0;
    let mut linf: f64 = 0.0;
    for (w, v) in g.weights().iter().zip(field.values()) {
        let a = v.abs();
        l1 += w * a;
        lm += w * a.powf(m + 1.0);
        linf = linf.max(a);
    }
    (l1, lm, linf)
}

/// Split of `W = dt ⟨Φ^δ(Y'), e^{μ'} Δ_h(a Φ^δ(Y'))⟩_h` into dissipation and
/// source terms by summation by parts over lattice edges.
fn energy_split(grid: &Grid, c: &[f64], w: &[f64], dt: f64) -> (f64, f64) {
    let vol = grid.cell_volume();
    let mut dis = 0.0;
    let mut src = 0.0;
    let mut edge = |i: Option<usize>, j: Option<usize>, h: f64| {
        let (wi, ci) = i.map_or((0.0, f64::NAN), |i| (w[i], c[i]));
        let (wj, cj) = j.map_or((0.0, f64::NAN), |j| (w[j], c[j]));
        let ci = if ci.is_nan() { cj } else { ci };
        let cj = if cj.is_nan() { ci } else { cj };
        let dw = wj - wi;
        dis += 0.5 * (ci + cj) * dw * dw / (h * h);
        src -= 0.5 * (wi + wj) * (cj - ci) * dw / (h * h);
    };
    let axes = grid.axes();
    match axes {
        [x] => {
            let h = x.h();
            for k in 0..=x.n {
                let i = k.checked_sub(1);
                let j = (k < x.n).then_some(k);
                edge(i, j, h);
            }
        }
        [x, y] => {
            let (nx, ny) = (x.n, y.n);
            for r in 0..ny {
                for k in 0..=nx {
                    let i = k.checked_sub(1).map(|k| r * nx + k);
                    let j = (k < nx).then_some(r * nx + k);
                    edge(i, j, x.h());
                }
            }
            for col in 0..nx {
                for k in 0..=ny {
                    let i = k.checked_sub(1).map(|k| k * nx + col);
                    let j = (k < ny).then_some(k * nx + col);
                    edge(i, j, y.h());
                }
            }
        }
        _ => unreachable!(),
    }
    (dt * vol * dis, dt * vol * src)
}

struct EnergyBook {
    dissipation: f64,
    source: f64,
    slack: f64,
}

#[allow(clippy::too_many_arguments)]
fn drive(
    y0: Vec<f64>,
    z: &SignalPath,
    cfg: &SolverConfig,
    coeffs: &CoefficientSet,
    scheme: Scheme,
    state: State,
    emit: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
) -> Result<Trajectory> {
    let spec = cfg.phi_spec()?;
    let grid = coeffs.grid().clone();
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial condition"));
    }
    let steps = step_count(z, cfg.dt)?;
    let t0 = z.t0();
    let stepper = Stepper {
        grid: &grid,
        spec: spec.clone(),
        cfg,
        coeffs,
        z,
        scheme,
    };
    let mu_at = |t: f64| -> Result<Vec<f64>> {
        match scheme {
            Scheme::Transformed => coeffs.mu_values(&z.value_at(t)?),
            Scheme::Direct => Ok(vec![0.0; grid.len()]),
        }
    };
    let energy_of = |y: &[f64]| grid.cell_volume() * y.iter().map(|&v| spec.psi(v)).sum::<f64>();

    let record = |y: &[f64], mu: &[f64], stats: StepStats, book: &EnergyBook| -> Result<(Field, Diagnostics)> {
        let field = Field::new(grid.clone(), emit(y, mu))?;
        let (l1, lm1, linf) = weighted_norms(&field, cfg.m);
        let mut d = Diagnostics {
            l1,
            lm1,
            linf,
            stats,
            ..Default::default()
        };
        if cfg.diagnostics {
            d.hdual = Some(field.norm(Norm::Hdual)?);
            d.energy = Some(energy_of(y));
            d.dissipation = Some(book.dissipation);
            d.source = Some(book.source);
            d.slack = Some(book.slack);
        }
        Ok((field, d))
    };

    let mut book = EnergyBook {
        dissipation: 0.0,
        source: 0.0,
        slack: 0.0,
    };
    let mut times = vec![t0];
    let mut fields = Vec::new();
    let mut diags = Vec::new();
    let mu0 = mu_at(t0)?;
    let (f0, d0) = record(&y0, &mu0, StepStats::default(), &book)?;
    fields.push(f0);
    diags.push(d0);

    let mut y = y0;
    let mut pending = StepStats::default();
    for k in 0..steps {
        let t = t0 + k as f64 * cfg.dt;
        let t_next = if k + 1 == steps { z.t1() } else { t0 + (k + 1) as f64 * cfg.dt };
        let (y_next, stats) = stepper.step(&y, t, t_next, 0).map_err(|e| Error::Step {
            step: k,
            time: t,
            source: Box::new(e),
        })?;
        if y_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Step {
                step: k,
                time: t,
                source: Box::new(Error::NonFinite("solution")),
            });
        }
        let mu_next = mu_at(t_next)?;
        if cfg.diagnostics {
            let (c, w): (Vec<f64>, Vec<f64>) = match scheme {
                Scheme::Transformed => mu_next
                    .iter()
                    .zip(&y_next)
                    .map(|(&mu, &v)| (((cfg.m + 1.0) * mu).exp(), (-cfg.m * mu).exp() * spec.value(v)))
                    .unzip(),
                Scheme::Direct => y_next.iter().map(|&v| (1.0, spec.value(v))).unzip(),
            };
            let (dis, src) = energy_split(&grid, &c, &w, t_next - t);
            book.dissipation += dis;
            book.source += src;
            let tol = cfg.newton_tol * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            let phi_l1: f64 = y_next.iter().map(|&v| spec.value(v).abs()).sum();
            book.slack += grid.cell_volume() * phi_l1 * tol.max(stats.residual);
        }
        pending = pending.merge(stats);
        y = y_next;
        if (k + 1) % cfg.store_every == 0 || k + 1 == steps {
            let (f, d) = record(&y, &mu_next, pending, &book)?;
            times.push(t_next);
            fields.push(f);
            diags.push(d);
            pending = StepStats::default();
        }
    }
    Ok(Trajectory {
        state,
        times,
        fields,
        diagnostics: diags,
        config: cfg.clone(),
        seed: z.seed(),
    })
}

/// One backward-Euler step of the transformed equation from `t` to `t + dt`.
pub fn step_transformed(
    y: &Field,
    t: f64,
    z: &SignalPath,
    cfg: &SolverConfig,
    coeffs: &CoefficientSet,
) -> Result<Field> {
    check_inputs(y, z, coeffs)?;
    let grid = coeffs.grid();
    let stepper = Stepper {
        grid,
        spec: cfg.phi_spec()?,
        cfg,
        coeffs,
        z,
        scheme: Scheme::Transformed,
    };
    let (v, _) = stepper.step(y.values(), t, t + cfg.dt, 0)?;
    Field::new(grid.clone(), v)
}

/// Integrates the transformed equation over the window of `z`.
pub fn solve_transformed(
    y0: &Field,
    z: &SignalPath,
    cfg: &SolverConfig,
    coeffs: &CoefficientSet,
) -> Result<Trajectory> {
    check_inputs(y0, z, coeffs)?;
    drive(
        y0.values().to_vec(),
        z,
        cfg,
        coeffs,
        Scheme::Transformed,
        State::Y,
        &|y, _| y.to_vec(),
    )
}

/// Solves for `X` via `Y = e^{μ} X`, returning `X_t = e^{−μ_t} Y_t`.
pub fn solve_rough(
    x0: &Field,
    z: &SignalPath,
    cfg: &SolverConfig,
    coeffs: &CoefficientSet,
) -> Result<Trajectory> {
    check_inputs(x0, z, coeffs)?;
    let mu0 = coeffs.mu_values(&z.value_at(z.t0())?)?;
    let y0 = x0
        .values()
        .iter()
        .zip(&mu0)
        .map(|(x, mu)| x * mu.exp())
        .collect();
    drive(y0, z, cfg, coeffs, Scheme::Transformed, State::X, &|y, mu| {
        y.iter().zip(mu).map(|(y, mu)| y * (-mu).exp()).collect()
    })
}

/// Backward Euler applied to `X` directly, with the noise term
/// `Σ f_k X' (z_{t+dt} − z_t)`; requires a bounded-variation signal.
pub fn solve_direct_bv(
    x0: &Field,
    z: &SignalPath,
    cfg: &SolverConfig,
    coeffs: &CoefficientSet,
) -> Result<Trajectory> {
    check_inputs(x0, z, coeffs)?;
    if !z.kind().is_bounded_variation() {
        return Err(Error::NotBoundedVariation(format!("{:?}", z.kind())));
    }
    drive(
        x0.values().to_vec(),
        z,
        cfg,
        coeffs,
        Scheme::Direct,
        State::X,
        &|x, _| x.to_vec(),
    )
}

/// Result of solving from clamped versions of rough initial data.
#[derive(Debug, Clone)]
pub struct LimitSolution {
    pub levels: Vec<f64>,
    /// `sup_t ‖X^{(L_{i+1})}_t − X^{(L_i)}_t‖_{L¹}` for consecutive levels.
    pub increments: Vec<f64>,
    /// `‖clamp_{L_{i+1}} X0 − clamp_{L_i} X0‖_{L¹}`.
    pub initial_increments: Vec<f64>,
    /// Finest-level trajectory.
    pub trajectory: Trajectory,
    /// Last Cauchy increment, an error estimate for the finest level.
    pub tail: f64,
}

pub fn limit_solution(
    x0: &Field,
    clamp_levels: &[f64],
    z: &SignalPath,
    cfg: &SolverConfig,
    coeffs: &CoefficientSet,
) -> Result<LimitSolution> {
    if clamp_levels.is_empty()
        || clamp_levels.windows(2).any(|w| !(w[0] < w[1]))
        || !(clamp_levels[0] > 0.0)
    {
        return Err(Error::invalid("clamp levels must be positive and strictly increasing"));
    }
    let clamped: Vec<Field> = clamp_levels
        .iter()
        .map(|&l| x0.map(|v| v.clamp(-l, l)))
        .collect::<Result<_>>()?;
    let mut runs = par::try_map(&clamped, |x| solve_rough(x, z, cfg, coeffs))?;
    let mut increments = Vec::new();
    let mut initial_increments = Vec::new();
    for i in 1..runs.len() {
        let (a, b) = (&runs[i - 1], &runs[i]);
        let mut sup: f64 = 0.0;
        for (fa, fb) in a.fields.iter().zip(&b.fields) {
            sup = sup.max(fb.sub(fa)?.norm(Norm::Lp(1.0))?);
        }
        increments.push(sup);
        initial_increments.push(clamped[i].sub(&clamped[i - 1])?.norm(Norm::Lp(1.0))?);
    }
    let tail = increments.last().copied().unwrap_or(0.0);
    Ok(LimitSolution {
        levels: clamp_levels.to_vec(),
        increments,
        initial_increments,
        trajectory: runs.pop().expect("at least one level"),
        tail,
    })
}
