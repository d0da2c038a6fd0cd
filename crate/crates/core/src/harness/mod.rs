//! Experiment orchestration: configuration, named experiment suites,
//! deterministic seeding and result emission.
//!
//! Each experiment writes its artifacts plus `config.toml` (the effective
//! configuration) and `summary.json` (every assertion with its measured
//! value, bound and the kind of bound) into the output directory.

mod config;
mod experiments;
mod ic;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Result};

pub use config::{
    parse_config, DeltaSpec, ExperimentConfig, GridSpec, NoiseChoice, NoiseSpec, Param, SolverSpec, TimeSpec,
};
pub use ic::{zkb_profile, IcSpec, Zkb};

/// What a bound is: a quantity from the theory (a constant or explicit
/// supersolution) or a numerical tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Theory,
    Tolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub kind: BoundKind,
    pub passed: bool,
}

/// Assertions and auxiliary measurements produced by one experiment.
#[derive(Debug, Default, Clone, Serialize)]
pub struct Report {
    pub assertions: Vec<Assertion>,
    pub metrics: BTreeMap<String, serde_json::Value>,
}

impl Report {
    fn push(&mut self, name: &str, measured: f64, relation: Relation, bound: f64, kind: BoundKind) -> bool {
        let passed = match relation {
            Relation::AtMost => measured <= bound,
            Relation::AtLeast => measured >= bound,
        };
        self.assertions.push(Assertion {
            name: name.to_string(),
            measured,
            relation,
            bound,
            kind,
            passed,
        });
        passed
    }

    /// Records `measured ≤ bound`.
    pub fn at_most(&mut self, name: &str, measured: f64, bound: f64, kind: BoundKind) -> bool {
        self.push(name, measured, Relation::AtMost, bound, kind)
    }

    /// Records `measured ≥ bound`.
    pub fn at_least(&mut self, name: &str, measured: f64, bound: f64, kind: BoundKind) -> bool {
        self.push(name, measured, Relation::AtLeast, bound, kind)
    }

    pub fn metric<T: Serialize>(&mut self, name: &str, value: T) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.metrics.insert(name.to_string(), v);
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub artifacts: Vec<String>,
    pub config: ExperimentConfig,
}

impl Summary {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Artifact sink; with no directory nothing is written.
#[derive(Debug, Default)]
pub struct Output {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl Output {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            written: Vec::new(),
        })
    }

    pub fn enabled(&self) -> bool {
        self.dir.is_some()
    }

    pub fn file(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        if let Some(d) = &self.dir {
            let mut w = BufWriter::new(File::create(d.join(name))?);
            f(&mut w)?;
            w.flush()?;
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.file(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            Ok(())
        })
    }
}

type Runner = fn(&ExperimentConfig, &mut Report, &mut Output) -> Result<()>;

pub struct ExperimentInfo {
    pub name: &'static str,
    pub description: &'static str,
    defaults: fn() -> ExperimentConfig,
    runner: Runner,
}

/// All named experiments.
pub fn experiments() -> &'static [ExperimentInfo] {
    experiments::REGISTRY
}

pub fn experiment_names() -> Vec<&'static str> {
    experiments().iter().map(|e| e.name).collect()
}

fn lookup(name: &str) -> Result<&'static ExperimentInfo> {
    experiments().iter().find(|e| e.name == name).ok_or_else(|| {
        Error::Config(format!(
            "unknown experiment {name:?}; valid names: {}",
            experiment_names().join(", ")
        ))
    })
}

/// The built-in configuration of an experiment.
pub fn default_config(name: &str) -> Result<ExperimentConfig> {
    Ok((lookup(name)?.defaults)())
}

/// Human-readable description plus the default configuration as TOML.
pub fn describe(name: &str) -> Result<String> {
    let info = lookup(name)?;
    Ok(format!(
        "{}\n\n{}\n\ndefault configuration:\n\n{}",
        info.name,
        info.description,
        (info.defaults)().to_toml()?
    ))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Runs an experiment, writing artifacts, `config.toml` and `summary.json`
/// into `out` when given.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Summary> {
    let info = lookup(&cfg.experiment)?;
    let mut output = Output::new(out)?;
    let toml_text = cfg.to_toml()?;
    output.file("config.toml", |w| {
        w.write_all(toml_text.as_bytes())?;
        Ok(())
    })?;
    let mut report = Report::default();
    (info.runner)(cfg, &mut report, &mut output)?;
    let mut artifacts = output.written.clone();
    if output.enabled() {
        artifacts.push("summary.json".into());
    }
    let summary = Summary {
        experiment: cfg.experiment.clone(),
        seed: cfg.seed,
        passed: report.passed(),
        assertions: report.assertions,
        metrics: report.metrics,
        artifacts,
        config: cfg.clone(),
    };
    output.file("summary.json", |w| summary.write_json(w))?;
    Ok(summary)
}

/// Process exit code for an outcome: 0 all assertions pass, 1 an assertion
/// failed, 2 configuration error, 3 solver failure.
pub fn exit_code(outcome: &Result<Summary>) -> i32 {
    match outcome {
        Ok(s) if s.passed => 0,
        Ok(_) => 1,
        Err(e) => error_code(e),
    }
}

pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::WindowOutOfRange { .. }
        | Error::NotBoundedVariation(_)
        | Error::SigmaOrdering(_) => 2,
        _ => 3,
    }
}

/// Independent seed for item `i` of stream `stream`.
pub fn derive_seed(seed: u64, stream: u64, i: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r.set_word_pos(2 * i as u128);
    r.random()
}

pub fn rng_for(seed: u64, stream: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, i))
}

#[cfg(test)]
mod tests;
