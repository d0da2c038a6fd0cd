//! The random dynamical system generated by the rough equation over a fixed
//! noise realization `ω`: cocycle evaluation, pullback runs, absorption and
//! empirical attractor diameters.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::bounds::{choose_partition, uniform_bound_u};
use crate::geometry::{Field, Grid, Norm};
use crate::par;
use crate::signals::SignalPath;
use crate::solver::{solve_rough, CoefficientSet, SolverConfig, Trajectory};
use crate::{Error, Result};

type Key = (i64, i64, u64);

/// Evaluates `φ(t, θ_s ω) x` for one stored realization `ω`.
#[derive(Debug)]
pub struct CocycleRun {
    omega: SignalPath,
    coeffs: CoefficientSet,
    cfg: SolverConfig,
    cache: RwLock<HashMap<Key, (Vec<f64>, Field)>>,
}

fn content_hash(values: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    for v in values {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

impl CocycleRun {
    pub fn new(omega: SignalPath, coeffs: CoefficientSet, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if omega.dim() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: coeffs.len(),
                got: omega.dim(),
            });
        }
        let ratio = cfg.dt / omega.dt();
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::invalid(format!(
                "solver step {} must be a whole multiple of the signal spacing {}",
                cfg.dt,
                omega.dt()
            )));
        }
        Ok(Self {
            omega,
            coeffs,
            cfg,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn omega(&self) -> &SignalPath {
        &self.omega
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.coeffs.grid()
    }

    pub fn cached(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// `θ_s ω` restricted to `[0, t]`.
    pub fn window(&self, t: f64, s: f64) -> Result<SignalPath> {
        let out = || Error::WindowOutOfRange {
            start: s,
            end: s + t,
            t0: self.omega.t0(),
            t1: self.omega.t1(),
        };
        if t < 0.0 || s < self.omega.t0() - 1e-12 || s + t > self.omega.t1() + 1e-12 {
            return Err(out());
        }
        self.omega.shift(s)?.restrict(0.0, t)
    }

    /// The full trajectory of `τ ↦ φ(τ, θ_s ω) x` for `τ ∈ [0, t]`.
    pub fn trajectory(&self, t: f64, s: f64, x: &Field) -> Result<Trajectory> {
        solve_rough(x, &self.window(t, s)?, &self.cfg, &self.coeffs)
    }

    /// `φ(t, θ_s ω) x`, i.e. the solution started from `x` at time `s`
    /// and evaluated at `s + t`.
    pub fn cocycle(&self, t: f64, s: f64, x: &Field) -> Result<Field> {
        if !Arc::ptr_eq(x.grid(), self.grid()) {
            return Err(Error::invalid("initial field lives on a different grid"));
        }
        if t == 0.0 {
            if s < self.omega.t0() - 1e-12 || s > self.omega.t1() + 1e-12 {
                return Err(Error::WindowOutOfRange {
                    start: s,
                    end: s,
                    t0: self.omega.t0(),
                    t1: self.omega.t1(),
                });
            }
            return Ok(x.clone());
        }
        let dt = self.omega.dt();
        let key = (
            (s / dt).round() as i64,
            (t / dt).round() as i64,
            content_hash(x.values()),
        );
        if let Ok(cache) = self.cache.read() {
            if let Some((ic, out)) = cache.get(&key) {
                if ic.as_slice() == x.values() {
                    return Ok(out.clone());
                }
            }
        }
        let out = self.trajectory(t, s, x)?.final_field().clone();
        if let Ok(mut cache) = self.cache.write() {
            cache.insert(key, (x.values().to_vec(), out.clone()));
        }
        Ok(out)
    }
}

/// Free-function form of [`CocycleRun::cocycle`].
pub fn cocycle(run: &CocycleRun, t: f64, s: f64, x: &Field) -> Result<Field> {
    run.cocycle(t, s, x)
}

fn norm_name(n: &Norm) -> String {
    match n {
        Norm::Lp(p) => format!("L{p}"),
        Norm::Linf => "Linf".into(),
        Norm::H10 => "H10".into(),
        Norm::Hdual => "Hdual".into(),
    }
}

/// Largest difference between neighbouring nodes (boundary value 0 included).
pub fn discrete_modulus(field: &Field) -> f64 {
    let g = field.grid();
    let v = field.values();
    let mut out: f64 = 0.0;
    match g.axes() {
        [x] => {
            let at = |i: isize| if i < 0 || i >= x.n as isize { 0.0 } else { v[i as usize] };
            for i in -1..x.n as isize {
                out = out.max((at(i + 1) - at(i)).abs());
            }
        }
        [x, y] => {
            let (nx, ny) = (x.n as isize, y.n as isize);
            let at = |i: isize, j: isize| {
                if i < 0 || j < 0 || i >= nx || j >= ny {
                    0.0
                } else {
                    v[(j * nx + i) as usize]
                }
            };
            for j in -1..ny {
                for i in -1..nx {
                    out = out.max((at(i + 1, j) - at(i, j)).abs());
                    out = out.max((at(i, j + 1) - at(i, j)).abs());
                }
            }
        }
        _ => unreachable!(),
    }
    out
}

/// Pullback images `φ(t_n, θ_{−t_n} ω) x_j` of an initial-condition bundle.
#[derive(Debug, Clone, Serialize)]
pub struct PullbackReport {
    pub times: Vec<f64>,
    pub norms: Vec<String>,
    /// `diameters[n][k]`: largest pairwise distance at `t_n` in norm `k`.
    pub diameters: Vec<Vec<f64>>,
    /// `sup_norms[n][j]`: `‖φ(t_n, θ_{−t_n} ω) x_j‖_∞`.
    pub sup_norms: Vec<Vec<f64>>,
    /// Largest neighbouring-node difference over the bundle at each time.
    pub modulus: Vec<f64>,
    #[serde(skip)]
    pub images: Vec<Vec<Field>>,
    #[serde(skip)]
    norm_kinds: Vec<Norm>,
}

impl PullbackReport {
    pub fn norm_kinds(&self) -> &[Norm] {
        &self.norm_kinds
    }

    pub fn diameter(&self, n: usize, norm: Norm) -> Option<f64> {
        let k = self.norm_kinds.iter().position(|&m| m == norm)?;
        Some(self.diameters[n][k])
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// One row per pullback time: `t, diam_<norm>..., max_sup, modulus`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.norms.iter().map(|n| format!("diam_{n}")));
        header.push("max_sup".into());
        header.push("modulus".into());
        w.write_record(&header)?;
        for (n, &t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t}")];
            row.extend(self.diameters[n].iter().map(|d| format!("{d:.16e}")));
            let sup = self.sup_norms[n].iter().copied().fold(0.0, f64::max);
            row.push(format!("{sup:.16e}"));
            row.push(format!("{:.16e}", self.modulus[n]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every `(t_n, x_j)` pullback solve over the fixed `ω` and collects
/// bundle diameters in each requested norm.
pub fn pullback(run: &CocycleRun, bundle: &[Field], times: &[f64], norms: &[Norm]) -> Result<PullbackReport> {
    if bundle.is_empty() || times.is_empty() {
        return Err(Error::invalid("pullback needs a nonempty bundle and time list"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(Error::invalid("pullback times must be positive and strictly increasing"));
    }
    if -times[times.len() - 1] < run.omega.t0() - 1e-12 {
        return Err(Error::WindowOutOfRange {
            start: -times[times.len() - 1],
            end: 0.0,
            t0: run.omega.t0(),
            t1: run.omega.t1(),
        });
    }
    let jobs: Vec<(usize, usize)> = (0..times.len())
        .flat_map(|n| (0..bundle.len()).map(move |j| (n, j)))
        .collect();
    let flat = par::try_map(&jobs, |&(n, j)| run.cocycle(times[n], -times[n], &bundle[j]))?;
    let mut images: Vec<Vec<Field>> = vec![Vec::with_capacity(bundle.len()); times.len()];
    for ((n, _), f) in jobs.iter().zip(flat) {
        images[*n].push(f);
    }
    let mut diameters = Vec::with_capacity(times.len());
    let mut sup_norms = Vec::with_capacity(times.len());
    let mut modulus = Vec::with_capacity(times.len());
    for imgs in &images {
        let mut d = vec![0.0f64; norms.len()];
        for a in 0..imgs.len() {
            for b in a + 1..imgs.len() {
                let diff = imgs[b].sub(&imgs[a])?;
                for (k, &nm) in norms.iter().enumerate() {
                    d[k] = d[k].max(diff.norm(nm)?);
                }
            }
        }
        diameters.push(d);
        sup_norms.push(imgs.iter().map(|f| f.norm(Norm::Linf)).collect::<Result<Vec<_>>>()?);
        modulus.push(imgs.iter().map(discrete_modulus).fold(0.0, f64::max));
    }
    Ok(PullbackReport {
        times: times.to_vec(),
        norms: norms.iter().map(norm_name).collect(),
        diameters,
        sup_norms,
        modulus,
        images,
        norm_kinds: norms.to_vec(),
    })
}

/// Result of checking one pullback time against the absorbing ball.
#[derive(Debug, Clone, Serialize)]
pub struct Absorption {
    pub time: f64,
    /// `‖U₁(θ_{−1} ω)‖_∞` at the level of `X`.
    pub radius: f64,
    pub max_sup: f64,
    /// `radius·(1 + rtol) − max_sup`.
    pub margin: f64,
    pub absorbed: bool,
}

/// Radius of the absorbing ball: the sup of `e^{−μ_1} U_1` built on the
/// window `[−1, 0]` of `ω`, i.e. on `θ_{−1} ω` over `[0, 1]`.
pub fn absorbing_radius(run: &CocycleRun) -> Result<f64> {
    let w = run.window(1.0, -1.0)?;
    let m = run.cfg.m;
    let partition = choose_partition(&w, &run.coeffs, m)?;
    let u = uniform_bound_u(&partition, &run.coeffs, &w, m)?;
    u.x_sup_at(1.0)
}

/// Checks `‖image‖_∞ ≤ ‖U₁(θ_{−1} ω)‖_∞ (1 + rtol)` for every pullback time
/// `t_n ≥ 1`; earlier times are skipped.
pub fn absorption_check(report: &PullbackReport, run: &CocycleRun, rtol: f64) -> Result<Vec<Absorption>> {
    let keep: Vec<usize> = (0..report.times.len())
        .filter(|&n| report.times[n] >= 1.0 - 1e-12)
        .collect();
    if keep.is_empty() {
        return Err(Error::invalid("absorption needs pullback times of at least 1"));
    }
    let radius = absorbing_radius(run)?;
    Ok(keep
        .into_iter()
        .map(|n| {
            let max_sup = report.sup_norms[n].iter().copied().fold(0.0, f64::max);
            let margin = radius * (1.0 + rtol) - max_sup;
            Absorption {
                time: report.times[n],
                radius,
                max_sup,
                margin,
                absorbed: margin >= 0.0,
            }
        })
        .collect())
}

/// Pullback diameter decay with a least-squares slope of `log diam` against `t`.
#[derive(Debug, Clone, Serialize)]
pub struct DiameterCurve {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
    /// `None` when fewer than two positive L¹ diameters exist.
    pub log_slope: Option<f64>,
}

pub fn attractor_diameter_curve(report: &PullbackReport) -> Result<DiameterCurve> {
    if report.times.len() < 3 {
        return Err(Error::invalid("a diameter curve needs at least three pullback times"));
    }
    let col = |norm: Norm| -> Result<Vec<f64>> {
        (0..report.times.len())
            .map(|n| {
                report
                    .diameter(n, norm)
                    .ok_or_else(|| Error::invalid(format!("report lacks the {} norm", norm_name(&norm))))
            })
            .collect()
    };
    let l1 = col(Norm::Lp(1.0))?;
    let linf = col(Norm::Linf)?;
    let pts: Vec<(f64, f64)> = report
        .times
        .iter()
        .zip(&l1)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    let log_slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        sxy / sxx
    });
    Ok(DiameterCurve {
        times: report.times.clone(),
        l1,
        linf,
        log_slope,
    })
}

#[cfg(test)]
mod tests;
