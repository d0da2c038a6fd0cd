//! Experiment configuration: TOML files layered over per-experiment defaults.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ic::IcSpec;
use crate::geometry::{Axis, Grid};
use crate::signals::{sample_path, NoiseModel, SignalPath};
use crate::solver::{Coefficient, CoefficientSet, SolverConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub time: TimeSpec,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub coefficients: Vec<Coefficient>,
    pub ic: IcSpec,
    /// Experiment-specific knobs.
    #[serde(default)]
    pub params: BTreeMap<String, Param>,
    /// Assertion thresholds, by name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// A rectangle split into `cells` equal intervals per axis
/// (`cells − 1` interior nodes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl GridSpec {
    pub fn interval(a: f64, b: f64, cells: usize) -> Self {
        Self {
            lower: vec![a],
            upper: vec![b],
            cells: vec![cells],
            radius: None,
        }
    }

    pub fn build(&self) -> Result<Arc<Grid>> {
        self.build_with_cells(&self.cells)
    }

    pub fn build_with_cells(&self, cells: &[usize]) -> Result<Arc<Grid>> {
        let d = self.lower.len();
        if d == 0 || d > 2 || self.upper.len() != d || cells.len() != d {
            return Err(Error::Config(
                "grid.lower, grid.upper and grid.cells must all have length 1 or 2".into(),
            ));
        }
        let mut axes = Vec::with_capacity(d);
        for k in 0..d {
            if cells[k] < 2 {
                return Err(Error::Config("grid.cells must be at least 2".into()));
            }
            axes.push(Axis {
                a: self.lower[k],
                b: self.upper[k],
                n: cells[k] - 1,
            });
        }
        Grid::build(axes, self.radius).map_err(config)
    }
}

/// `δ`: a number, or `"auto"` for `h^{2/(m+1)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub m: f64,
    pub dt: f64,
    pub delta: DeltaSpec,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max")]
    pub newton_max: usize,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_newton_max() -> usize {
    50
}
fn default_halvings() -> u32 {
    6
}

impl SolverSpec {
    pub fn new(m: f64, dt: f64) -> Self {
        Self {
            m,
            dt,
            delta: DeltaSpec::Named("auto".into()),
            newton_tol: default_tol(),
            newton_max: default_newton_max(),
            max_halvings: default_halvings(),
        }
    }

    pub fn is_auto(&self) -> bool {
        matches!(&self.delta, DeltaSpec::Named(s) if s == "auto")
    }

    /// Solver settings for `grid`, with `δ` resolved.
    pub fn resolve(&self, grid: &Grid) -> Result<SolverConfig> {
        let delta = match &self.delta {
            DeltaSpec::Value(v) => *v,
            DeltaSpec::Named(s) if s == "auto" => SolverConfig::auto_delta(grid, self.m),
            DeltaSpec::Named(s) => {
                return Err(Error::Config(format!("solver.delta must be a number or \"auto\", got {s:?}")))
            }
        };
        let mut cfg = SolverConfig::new(self.m, delta, self.dt).map_err(config)?;
        cfg.newton_tol = self.newton_tol;
        cfg.newton_max = self.newton_max;
        cfg.max_halvings = self.max_halvings;
        cfg.validate().map_err(config)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChoice {
    Zero,
    Brownian,
    Fbm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseChoice,
    /// Sample spacing of the driving path.
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
}

impl NoiseSpec {
    pub fn model(&self, dim: usize) -> Result<Option<NoiseModel>> {
        Ok(match self.kind {
            NoiseChoice::Zero => None,
            NoiseChoice::Brownian => Some(NoiseModel::brownian(dim)),
            NoiseChoice::Fbm => {
                let h = self
                    .hurst
                    .ok_or_else(|| Error::Config("noise.hurst is required for fbm".into()))?;
                if !(h > 0.0 && h < 1.0) {
                    return Err(Error::Config(format!("noise.hurst must lie in (0, 1), got {h}")));
                }
                Some(NoiseModel::fbm(h, dim))
            }
        })
    }

    /// A path on `[t0, t1]`; the zero model ignores `seed`.
    pub fn sample(&self, dim: usize, t0: f64, t1: f64, seed: u64) -> Result<SignalPath> {
        match self.model(dim)? {
            None => SignalPath::zero(t0, t1, self.dt, dim),
            Some(model) => sample_path(model, t0, t1, self.dt, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Num(f64),
    List(Vec<f64>),
}

impl ExperimentConfig {
    pub fn param(&self, key: &str) -> Result<f64> {
        match self.params.get(key) {
            Some(Param::Num(v)) => Ok(*v),
            Some(Param::List(_)) => Err(Error::Config(format!("params.{key} must be a number"))),
            None => Err(Error::Config(format!("missing params.{key}"))),
        }
    }

    pub fn count(&self, key: &str) -> Result<usize> {
        let v = self.param(key)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Config(format!("params.{key} must be a nonnegative integer")));
        }
        Ok(v as usize)
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        match self.params.get(key) {
            Some(Param::List(v)) => Ok(v.clone()),
            Some(Param::Num(v)) => Ok(vec![*v]),
            None => Err(Error::Config(format!("missing params.{key}"))),
        }
    }

    pub fn tolerance(&self, key: &str) -> Result<f64> {
        self.tolerances
            .get(key)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing tolerances.{key}")))
    }

    pub fn coefficient_set(&self, grid: &Arc<Grid>) -> Result<CoefficientSet> {
        if self.coefficients.is_empty() {
            return Err(Error::Config("at least one coefficient is required".into()));
        }
        CoefficientSet::new(grid.clone(), self.coefficients.clone()).map_err(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub(crate) fn config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(msg) => Error::Config(msg),
        other => other,
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses a configuration file: it must name an `experiment`; everything
/// else defaults to that experiment's settings, table by table.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let over: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let name = over
        .get("experiment")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("the config must set `experiment = \"<name>\"`".into()))?;
    let base_cfg = super::default_config(name)?;
    let mut base = toml::Value::try_from(&base_cfg).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut base, over);
    let cfg: ExperimentConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    Ok(cfg)
}

/// Convenience for sine coefficients constant in the second coordinate.
pub fn sine_x(amp: f64, freq: f64) -> Coefficient {
    Coefficient::sine_1d(amp, freq)
}
