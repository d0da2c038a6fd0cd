//! Driving signals `z: [t0, t1] → R^N` and their bounded-variation
//! approximations.
//!
//! A [`SignalPath`] is a uniformly sampled path. Shifts (`θ_s`) are
//! represented by re-anchoring a shared sample buffer, so composing shifts
//! never accumulates rounding: shifting by `s` and then by `-s` returns the
//! original samples bit for bit.

mod fbm;

use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use fbm::{fgn_autocovariance, FgnSampler};

/// Relative slack used to decide whether a time falls on the sample grid.
const GRID_SNAP: f64 = 1e-9;

/// The noise law used by [`sample_path`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Brownian,
    Fbm { hurst: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(flatten)]
    pub kind: NoiseKind,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
}

fn default_dimension() -> usize {
    1
}

impl NoiseModel {
    pub fn brownian(dimension: usize) -> Self {
        Self {
            kind: NoiseKind::Brownian,
            dimension,
        }
    }

    pub fn fbm(hurst: f64, dimension: usize) -> Self {
        Self {
            kind: NoiseKind::Fbm { hurst },
            dimension,
        }
    }

    /// Hurst index of the model (1/2 for Brownian motion).
    pub fn hurst(&self) -> f64 {
        match self.kind {
            NoiseKind::Brownian => 0.5,
            NoiseKind::Fbm { hurst } => hurst,
        }
    }
}

/// Provenance of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathKind {
    Brownian,
    Fbm { hurst: f64 },
    PiecewiseLinear { parent: Box<PathKind>, level: u32 },
    Mollified { parent: Box<PathKind>, eps: f64 },
    ConstantZero,
    Custom { label: String },
}

impl PathKind {
    /// Whether paths of this kind have finite variation (approximations,
    /// the zero path and user-supplied smooth paths).
    pub fn is_bounded_variation(&self) -> bool {
        matches!(
            self,
            PathKind::PiecewiseLinear { .. }
                | PathKind::Mollified { .. }
                | PathKind::ConstantZero
                | PathKind::Custom { .. }
        )
    }
}

/// A uniformly sampled `R^N`-valued path.
#[derive(Debug, Clone)]
pub struct SignalPath {
    samples: Arc<Vec<f64>>,
    dim: usize,
    dt: f64,
    /// Index (into `samples`, in units of `dim`) of the first sample in the window.
    first: usize,
    len: usize,
    /// Sample whose value is subtracted from every reading (the shift anchor).
    anchor: Option<usize>,
    t0: f64,
    kind: PathKind,
    seed: Option<u64>,
    sup_distance: Option<f64>,
}

fn sample_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("sample spacing must be positive, got {dt}")));
    }
    if !(t0 < t1) {
        return Err(Error::invalid(format!("empty time window [{t0}, {t1}]")));
    }
    let steps = ((t1 - t0) / dt).round();
    if (steps * dt - (t1 - t0)).abs() > GRID_SNAP * (t1 - t0).abs().max(dt) * 1e3 {
        return Err(Error::invalid(format!(
            "window [{t0}, {t1}] is not a whole number of steps of {dt}"
        )));
    }
    Ok(steps as usize + 1)
}

impl SignalPath {
    /// Builds a path from row-major samples (`len × dim`).
    pub fn from_samples(t0: f64, dt: f64, dim: usize, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::invalid("sample buffer length must be a positive multiple of the dimension"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("sample spacing must be positive, got {dt}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal samples"));
        }
        let len = values.len() / dim;
        Ok(Self {
            samples: Arc::new(values),
            dim,
            dt,
            first: 0,
            len,
            anchor: None,
            t0,
            kind,
            seed: None,
            sup_distance: None,
        })
    }

    /// The identically zero path.
    pub fn zero(t0: f64, t1: f64, dt: f64, dim: usize) -> Result<Self> {
        let len = sample_count(t0, t1, dt)?;
        Self::from_samples(t0, dt, dim, vec![0.0; len * dim], PathKind::ConstantZero)
    }

    /// Samples a deterministic function on the uniform grid.
    pub fn from_fn(
        t0: f64,
        t1: f64,
        dt: f64,
        dim: usize,
        label: &str,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let len = sample_count(t0, t1, dt)?;
        let mut values = Vec::with_capacity(len * dim);
        for i in 0..len {
            let v = f(t0 + i as f64 * dt);
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            values.extend(v);
        }
        Self::from_samples(
            t0,
            dt,
            dim,
            values,
            PathKind::Custom {
                label: label.to_string(),
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t0 + (self.len - 1) as f64 * self.dt
    }

    pub fn kind(&self) -> &PathKind {
        &self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Sup-distance to the parent path, for approximations.
    pub fn sup_distance(&self) -> Option<f64> {
        self.sup_distance
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Component `k` of sample `i`.
    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        let raw = self.samples[(self.first + i) * self.dim + k];
        match self.anchor {
            Some(a) => raw - self.samples[a * self.dim + k],
            None => raw,
        }
    }

    /// Sample `i` as a vector.
    pub fn sample(&self, i: usize) -> Vec<f64> {
        (0..self.dim).map(|k| self.get(i, k)).collect()
    }

    /// All samples, row-major.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len * self.dim);
        for i in 0..self.len {
            for k in 0..self.dim {
                out.push(self.get(i, k));
            }
        }
        out
    }

    /// Window index of time `t` when it lies on the sample grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let r = x.round();
        if (x - r).abs() <= GRID_SNAP * x.abs().max(1.0) && r >= 0.0 && (r as usize) < self.len {
            Some(r as usize)
        } else {
            None
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = GRID_SNAP * self.dt;
        if t < self.t0 - slack || t > self.t1() + slack {
            return Err(Error::WindowOutOfRange {
                start: t,
                end: t,
                t0: self.t0,
                t1: self.t1(),
            });
        }
        Ok(())
    }

    /// Path value at an arbitrary time: the sample itself on grid points,
    /// linear interpolation between them.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        if let Some(i) = self.index_of(t) {
            return Ok(self.sample(i));
        }
        let x = ((t - self.t0) / self.dt).clamp(0.0, (self.len - 1) as f64);
        let i = (x.floor() as usize).min(self.len - 2);
        let w = x - i as f64;
        Ok((0..self.dim)
            .map(|k| (1.0 - w) * self.get(i, k) + w * self.get(i + 1, k))
            .collect())
    }

    /// Restriction to the sub-window `[a, b]`; both ends must be sample times.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        let out_of_range = || Error::WindowOutOfRange {
            start: a,
            end: b,
            t0: self.t0,
            t1: self.t1(),
        };
        let ia = self.index_of(a).ok_or_else(out_of_range)?;
        let ib = self.index_of(b).ok_or_else(out_of_range)?;
        if ib <= ia {
            return Err(out_of_range());
        }
        let mut out = self.clone();
        out.first = self.first + ia;
        out.len = ib - ia + 1;
        out.t0 = self.time(ia);
        Ok(out)
    }

    /// The shifted path `t ↦ z_{t+s} − z_s`, i.e. the realization under `θ_s`.
    ///
    /// `s` must be a sample time of this window. The result lives on
    /// `[t0 − s, t1 − s]`.
    pub fn shift(&self, s: f64) -> Result<Self> {
        let js = self.index_of(s).ok_or(Error::WindowOutOfRange {
            start: s,
            end: s,
            t0: self.t0,
            t1: self.t1(),
        })?;
        let mut out = self.clone();
        out.anchor = Some(self.first + js);
        out.t0 = -(js as f64) * self.dt;
        Ok(out)
    }

    /// Largest component-wise absolute value.
    pub fn sup_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.len {
            for k in 0..self.dim {
                m = m.max(self.get(i, k).abs());
            }
        }
        m
    }

    /// Sampled total variation `Σ_i ‖z_{i+1} − z_i‖_∞`.
    pub fn total_variation(&self) -> f64 {
        (1..self.len)
            .map(|i| {
                (0..self.dim)
                    .map(|k| (self.get(i, k) - self.get(i - 1, k)).abs())
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    /// Sup over samples of the ∞-norm distance to another path on the same grid.
    pub fn distance(&self, other: &SignalPath) -> Result<f64> {
        if self.len != other.len || self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.len * self.dim,
                got: other.len * other.dim,
            });
        }
        let mut d: f64 = 0.0;
        for i in 0..self.len {
            for k in 0..self.dim {
                d = d.max((self.get(i, k) - other.get(i, k)).abs());
            }
        }
        Ok(d)
    }

    /// `sup { ‖z_t − z_s‖_∞ : sampled s, t with |t − s| ≤ h }`.
    pub fn modulus_of_continuity(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) || h > self.t1() - self.t0 + GRID_SNAP * self.dt {
            return Err(Error::invalid(format!("lag {h} outside (0, window length]")));
        }
        let lag = ((h / self.dt) * (1.0 + GRID_SNAP)).floor() as usize;
        let lag = lag.min(self.len - 1);
        if lag == 0 {
            return Ok(0.0);
        }
        let mut best: f64 = 0.0;
        for k in 0..self.dim {
            best = best.max(window_range(self.len, lag + 1, |i| self.get(i, k)));
        }
        Ok(best)
    }

    /// Dyadic piecewise-linear interpolant at `level` (mesh `(t1 − t0) / 2^level`),
    /// resampled on this path's grid.
    pub fn piecewise_linear(&self, level: u32) -> Result<Self> {
        let span = self.t1() - self.t0;
        let pieces = 1usize
            .checked_shl(level)
            .ok_or_else(|| Error::invalid(format!("level {level} too large")))?;
        let mesh = span / pieces as f64;
        if mesh < self.dt * (1.0 - GRID_SNAP) {
            return Err(Error::invalid(format!(
                "level {level} mesh {mesh:.3e} is finer than the sample spacing {:.3e}",
                self.dt
            )));
        }
        let knots: Vec<Vec<f64>> = (0..=pieces)
            .map(|j| self.value_at((self.t0 + j as f64 * mesh).min(self.t1())))
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.len * self.dim);
        for i in 0..self.len {
            let x = (i as f64 * self.dt) / mesh;
            let r = x.round();
            if (x - r).abs() <= GRID_SNAP * x.max(1.0) {
                values.extend_from_slice(&knots[r as usize]);
                continue;
            }
            let j = (x.floor() as usize).min(pieces - 1);
            let w = x - j as f64;
            for k in 0..self.dim {
                values.push((1.0 - w) * knots[j][k] + w * knots[j + 1][k]);
            }
        }
        let kind = match self.kind {
            PathKind::ConstantZero => PathKind::ConstantZero,
            _ => PathKind::PiecewiseLinear {
                parent: Box::new(self.kind.clone()),
                level,
            },
        };
        self.derived(values, kind)
    }

    /// Convolution with a smooth compactly supported bump of total width
    /// `eps`; the path is extended past both ends by point reflection
    /// `z(t1 + u) = 2 z(t1) − z(t1 − u)`, which keeps endpoint values and
    /// affine paths unchanged.
    pub fn mollify(&self, eps: f64) -> Result<Self> {
        if !(eps >= 2.0 * self.dt * (1.0 - GRID_SNAP)) {
            return Err(Error::invalid(format!(
                "mollifier width {eps:.3e} below twice the sample spacing {:.3e}",
                self.dt
            )));
        }
        let radius = 0.5 * eps;
        let half = (radius / self.dt).ceil() as usize;
        if half >= self.len {
            return Err(Error::invalid("mollifier wider than the path window"));
        }
        let mut weights: Vec<f64> = (0..=2 * half)
            .map(|j| {
                let u = (j as f64 - half as f64) * self.dt / radius;
                if u.abs() < 1.0 {
                    (-1.0 / (1.0 - u * u)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        // Symmetrize explicitly so affine paths are reproduced to round-off.
        for j in 0..half {
            let avg = 0.5 * (weights[j] + weights[2 * half - j]);
            weights[j] = avg;
            weights[2 * half - j] = avg;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        let last = self.len as isize - 1;
        let ext = |i: isize, k: usize| -> f64 {
            if i < 0 {
                2.0 * self.get(0, k) - self.get((-i) as usize, k)
            } else if i > last {
                2.0 * self.get(last as usize, k) - self.get((2 * last - i) as usize, k)
            } else {
                self.get(i as usize, k)
            }
        };
        let mut values = Vec::with_capacity(self.len * self.dim);
        for i in 0..self.len as isize {
            for k in 0..self.dim {
                let v: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * ext(i + j as isize - half as isize, k))
                    .sum();
                values.push(v);
            }
        }
        let kind = match self.kind {
            PathKind::ConstantZero => PathKind::ConstantZero,
            _ => PathKind::Mollified {
                parent: Box::new(self.kind.clone()),
                eps,
            },
        };
        let out = self.derived(values, kind)?;
        if let (Some(d), Ok(w)) = (out.sup_distance, self.modulus_of_continuity(radius)) {
            // Reflection can at most double the interior bound near the ends.
            debug_assert!(d <= 2.0 * w + 1e-12 * (1.0 + w), "mollifier error {d} vs modulus {w}");
        }
        Ok(out)
    }

    fn derived(&self, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        let mut out = Self::from_samples(self.t0, self.dt, self.dim, values, kind)?;
        out.seed = self.seed;
        out.sup_distance = Some(out.distance(self)?);
        Ok(out)
    }

    /// Writes `t,z1,...,zN` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("z{k}")));
        w.write_record(&header)?;
        for i in 0..self.len {
            let mut row = vec![format!("{:.16e}", self.time(i))];
            row.extend((0..self.dim).map(|k| format!("{:.16e}", self.get(i, k))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a path written by [`write_csv`](Self::write_csv). The result has
    /// kind `custom`.
    pub fn read_csv<R: Read>(reader: R, label: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(Error::invalid("path CSV must start with a `t` column"));
        }
        let dim = headers.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad number {s:?}: {e}")))
            };
            times.push(parse(&rec[0])?);
            for k in 0..dim {
                values.push(parse(&rec[k + 1])?);
            }
        }
        if times.len() < 2 {
            return Err(Error::invalid("path CSV needs at least two rows"));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        for (i, t) in times.iter().enumerate() {
            if (t - (times[0] + i as f64 * dt)).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::invalid("path CSV times are not uniformly spaced"));
            }
        }
        Self::from_samples(
            times[0],
            dt,
            dim,
            values,
            PathKind::Custom {
                label: label.to_string(),
            },
        )
    }
}

/// Maximum over all windows of `width` consecutive samples of (max − min),
/// via monotone deques.
fn window_range(len: usize, width: usize, value: impl Fn(usize) -> f64) -> f64 {
    use std::collections::VecDeque;
    let width = width.min(len);
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best: f64 = 0.0;
    for i in 0..len {
        let v = value(i);
        while maxq.back().is_some_and(|&j| value(j) <= v) {
            maxq.pop_back();
        }
        maxq.push_back(i);
        while minq.back().is_some_and(|&j| value(j) >= v) {
            minq.pop_back();
        }
        minq.push_back(i);
        if i + 1 >= width {
            let lo = i + 1 - width;
            while maxq.front().is_some_and(|&j| j < lo) {
                maxq.pop_front();
            }
            while minq.front().is_some_and(|&j| j < lo) {
                minq.pop_front();
            }
        }
        best = best.max(value(*maxq.front().unwrap()) - value(*minq.front().unwrap()));
    }
    best
}

/// Samples a Gaussian path of the given model on `[t0, t1]` with spacing `dt`.
///
/// Components are independent. The path is pinned so that `z(0) = 0` when
/// `0 ∈ [t0, t1]`, and `z(t0) = 0` otherwise. fBm increments are exact on the
/// sample grid.
pub fn sample_path(model: NoiseModel, t0: f64, t1: f64, dt: f64, seed: u64) -> Result<SignalPath> {
    let len = sample_count(t0, t1, dt)?;
    if model.dimension == 0 {
        return Err(Error::invalid("noise dimension must be at least 1"));
    }
    let sampler = match model.kind {
        NoiseKind::Fbm { hurst } => Some(FgnSampler::new(len - 1, hurst)?),
        NoiseKind::Brownian => None,
    };
    let scale = dt.powf(model.hurst());
    let dim = model.dimension;
    let mut values = vec![0.0; len * dim];
    for k in 0..dim {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let increments: Vec<f64> = match &sampler {
            Some(s) => s.sample(&mut rng),
            None => (0..len - 1).map(|_| StandardNormal.sample(&mut rng)).collect(),
        };
        let mut acc = 0.0;
        for (i, inc) in increments.iter().enumerate() {
            acc += scale * inc;
            values[(i + 1) * dim + k] = acc;
        }
    }
    let mut path = SignalPath::from_samples(
        t0,
        dt,
        dim,
        values,
        match model.kind {
            NoiseKind::Brownian => PathKind::Brownian,
            NoiseKind::Fbm { hurst } => PathKind::Fbm { hurst },
        },
    )?;
    path.seed = Some(seed);
    if t0 < 0.0 && 0.0 <= t1 {
        let origin = path.value_at(0.0)?;
        let samples = Arc::make_mut(&mut path.samples);
        for i in 0..len {
            for k in 0..dim {
                samples[i * dim + k] -= origin[k];
            }
        }
    }
    Ok(path)
}

/// Free-function form of [`SignalPath::shift`].
pub fn shift_path(path: &SignalPath, s: f64) -> Result<SignalPath> {
    path.shift(s)
}

/// Free-function form of [`SignalPath::piecewise_linear`].
pub fn piecewise_linear(path: &SignalPath, level: u32) -> Result<SignalPath> {
    path.piecewise_linear(level)
}

/// Free-function form of [`SignalPath::mollify`].
pub fn mollify(path: &SignalPath, eps: f64) -> Result<SignalPath> {
    path.mollify(eps)
}

/// Free-function form of [`SignalPath::modulus_of_continuity`].
pub fn modulus_of_continuity(path: &SignalPath, h: f64) -> Result<f64> {
    path.modulus_of_continuity(h)
}

#[cfg(test)]
mod tests;
