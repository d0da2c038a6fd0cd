//! Initial conditions and the Barenblatt (ZKB) source solution.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Field, Grid};
use crate::nonlinearity::adaptive_simpson;
use crate::{Error, Result};

/// The one-dimensional source-type solution of `∂_t u = ∂_xx(u^m)` with
/// given mass: `t^{−α}(C − κ x² t^{−2α})₊^{1/(m−1)}`, `α = 1/(m+1)`,
/// `κ = α(m−1)/(2m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zkb {
    pub m: f64,
    pub mass: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub c: f64,
}

impl Zkb {
    pub fn new(m: f64, mass: f64) -> Result<Self> {
        if !(m > 1.0) || !m.is_finite() {
            return Err(Error::invalid(format!("the ZKB profile needs m > 1, got {m}")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid(format!("mass must be positive, got {mass}")));
        }
        let alpha = 1.0 / (m + 1.0);
        let kappa = alpha * (m - 1.0) / (2.0 * m);
        let p = 1.0 / (m - 1.0);
        // ∫(1 − s²)^p ds over (−1, 1), with s = sin θ to remove the endpoint singularity.
        let unit = adaptive_simpson(&|th: f64| th.cos().powf(2.0 * p + 1.0), -PI / 2.0, PI / 2.0, 1e-14, 40);
        // mass = C^{p + 1/2} κ^{−1/2} · unit
        let c = (mass * kappa.sqrt() / unit).powf(1.0 / (p + 0.5));
        Ok(Self {
            m,
            mass,
            alpha,
            kappa,
            c,
        })
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        let s = t.powf(-self.alpha);
        let inner = self.c - self.kappa * x * x * s * s;
        if inner <= 0.0 {
            0.0
        } else {
            s * inner.powf(1.0 / (self.m - 1.0))
        }
    }

    /// Edge of the support, `√(C/κ) t^{α}`.
    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.kappa).sqrt() * t.powf(self.alpha)
    }
}

/// The ZKB profile value at `(t, x)`.
pub fn zkb_profile(t: f64, x: f64, m: f64, mass: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("the ZKB profile needs t > 0, got {t}")));
    }
    Ok(Zkb::new(m, mass)?.value(t, x))
}

/// Initial-condition registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcSpec {
    /// ZKB snapshot at time `t` (first coordinate only).
    Zkb { mass: f64, t: f64 },
    /// `height·(1 − |ξ − center|²/width²)₊`.
    Bump {
        height: f64,
        #[serde(default)]
        center: [f64; 2],
        width: f64,
    },
    /// `height` on `left ≤ ξ₁ ≤ right`, zero elsewhere.
    Step { height: f64, left: f64, right: f64 },
    /// A positive and a negative bump, `separation` apart along the first axis.
    TwoBump { height: f64, separation: f64, width: f64 },
    /// Random sine series over the domain's eigenfunctions, scaled to the
    /// given sup norm; absolute value taken when `nonnegative`.
    RandomFourier {
        amplitude: f64,
        modes: u32,
        #[serde(default)]
        nonnegative: bool,
    },
    /// `min(height·|ξ|^{−exponent}, cap)`: integrable but large near the origin.
    Spike { height: f64, exponent: f64, cap: f64 },
}

impl IcSpec {
    pub fn name(&self) -> &'static str {
        match self {
            IcSpec::Zkb { .. } => "zkb",
            IcSpec::Bump { .. } => "bump",
            IcSpec::Step { .. } => "step",
            IcSpec::TwoBump { .. } => "two_bump",
            IcSpec::RandomFourier { .. } => "random_fourier",
            IcSpec::Spike { .. } => "spike",
        }
    }

    /// Samples the initial condition on the grid. Only `RandomFourier` draws from `rng`.
    pub fn build<R: Rng + ?Sized>(&self, grid: &Arc<Grid>, m: f64, rng: &mut R) -> Result<Field> {
        let bump = |p: [f64; 2], c: [f64; 2], w: f64| {
            let r2 = (p[0] - c[0]).powi(2) + if grid.dim() == 2 { (p[1] - c[1]).powi(2) } else { 0.0 };
            (1.0 - r2 / (w * w)).max(0.0)
        };
        match *self {
            IcSpec::Zkb { mass, t } => {
                if !(t > 0.0) {
                    return Err(Error::Config("zkb initial time must be positive".into()));
                }
                let z = Zkb::new(m, mass)?;
                Field::from_fn(grid.clone(), |p| z.value(t, p[0]))
            }
            IcSpec::Bump { height, center, width } => {
                positive(width, "bump width")?;
                Field::from_fn(grid.clone(), |p| height * bump(p, center, width))
            }
            IcSpec::Step { height, left, right } => {
                if !(left < right) {
                    return Err(Error::Config("step needs left < right".into()));
                }
                Field::from_fn(grid.clone(), |p| if p[0] >= left && p[0] <= right { height } else { 0.0 })
            }
            IcSpec::TwoBump {
                height,
                separation,
                width,
            } => {
                positive(width, "two_bump width")?;
                let (a, b) = ([-0.5 * separation, 0.0], [0.5 * separation, 0.0]);
                Field::from_fn(grid.clone(), |p| height * (bump(p, a, width) - bump(p, b, width)))
            }
            IcSpec::RandomFourier {
                amplitude,
                modes,
                nonnegative,
            } => {
                if modes == 0 {
                    return Err(Error::Config("random_fourier needs at least one mode".into()));
                }
                let dim = grid.dim();
                let ky = if dim == 2 { modes } else { 1 };
                let mut terms = Vec::new();
                for i in 1..=modes {
                    for j in 1..=ky {
                        let c: f64 = rng.random_range(-1.0..1.0) / (i * j) as f64;
                        terms.push((i, j, c));
                    }
                }
                let axes = grid.axes();
                let raw = Field::from_fn(grid.clone(), |p| {
                    let mut s = 0.0;
                    for &(i, j, c) in &terms {
                        let mut v = c * (i as f64 * PI * (p[0] - axes[0].a) / (axes[0].b - axes[0].a)).sin();
                        if dim == 2 {
                            v *= (j as f64 * PI * (p[1] - axes[1].a) / (axes[1].b - axes[1].a)).sin();
                        }
                        s += v;
                    }
                    if nonnegative {
                        s.abs()
                    } else {
                        s
                    }
                })?;
                let sup = raw.norm(crate::geometry::Norm::Linf)?;
                if sup == 0.0 {
                    return Ok(raw);
                }
                raw.map(|v| v * amplitude / sup)
            }
            IcSpec::Spike { height, exponent, cap } => {
                if !(exponent >= 0.0) || !(cap > 0.0) {
                    return Err(Error::Config("spike needs exponent ≥ 0 and cap > 0".into()));
                }
                Field::from_fn(grid.clone(), |p| {
                    let r = grid.norm_sq(&p).sqrt();
                    if r == 0.0 {
                        cap
                    } else {
                        (height * r.powf(-exponent)).min(cap)
                    }
                })
            }
        }
    }
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive")))
    }
}
