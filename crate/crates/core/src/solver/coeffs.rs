use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{Field, Grid, Point};
use crate::{Error, Result};

/// A smooth spatial coefficient with closed-form gradient and Laplacian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant {
        value: f64,
    },
    /// `amp · Π_d sin(freq_d · x_d + phase_d)`; in 1D only the first factor is used.
    Sine {
        amp: f64,
        freq: [f64; 2],
        #[serde(default)]
        phase: [f64; 2],
    },
    /// `amp · exp(−|x − center|² / (2 width²))`.
    Gaussian {
        amp: f64,
        center: [f64; 2],
        width: f64,
    },
}

/// Value, gradient and Laplacian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub lap: f64,
}

impl Coefficient {
    /// `amp · sin(freq · x)`, constant in `y`.
    pub fn sine_1d(amp: f64, freq: f64) -> Self {
        Coefficient::Sine {
            amp,
            freq: [freq, 0.0],
            phase: [0.0, std::f64::consts::FRAC_PI_2],
        }
    }

    pub fn eval(&self, p: Point, dim: usize) -> Jet {
        match *self {
            Coefficient::Constant { value } => Jet {
                value,
                grad: [0.0; 2],
                lap: 0.0,
            },
            Coefficient::Sine { amp, freq, phase } => {
                let mut s = [1.0; 2];
                let mut c = [0.0; 2];
                for d in 0..dim {
                    let arg = freq[d] * p[d] + phase[d];
                    s[d] = arg.sin();
                    c[d] = freq[d] * arg.cos();
                }
                let value = amp * s[0] * s[1];
                let mut grad = [amp * c[0] * s[1], 0.0];
                if dim == 2 {
                    grad[1] = amp * s[0] * c[1];
                }
                let lap = -value * (0..dim).map(|d| freq[d] * freq[d]).sum::<f64>();
                Jet { value, grad, lap }
            }
            Coefficient::Gaussian { amp, center, width } => {
                let w2 = width * width;
                let r2: f64 = (0..dim).map(|d| (p[d] - center[d]).powi(2)).sum();
                let value = amp * (-r2 / (2.0 * w2)).exp();
                let mut grad = [0.0; 2];
                for d in 0..dim {
                    grad[d] = -(p[d] - center[d]) / w2 * value;
                }
                let lap = value * (r2 / (w2 * w2) - dim as f64 / w2);
                Jet { value, grad, lap }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Coefficient::Constant { value } => value.is_finite(),
            Coefficient::Sine { amp, freq, phase } => {
                amp.is_finite() && freq.iter().chain(phase).all(|v| v.is_finite())
            }
            Coefficient::Gaussian { amp, center, width } => {
                amp.is_finite() && center.iter().all(|v| v.is_finite()) && *width > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad coefficient {self:?}")))
        }
    }
}

/// The noise coefficients `f_1, …, f_N` sampled on a grid.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    grid: Arc<Grid>,
    funcs: Vec<Coefficient>,
    interior: Vec<Vec<Jet>>,
    closure: Vec<Vec<Jet>>,
}

/// `μ = −Σ f_k z_k` with its gradient and Laplacian.
#[derive(Debug, Clone)]
pub struct MuField {
    pub mu: Field,
    pub grad: Vec<[f64; 2]>,
    pub lap: Field,
}

impl CoefficientSet {
    pub fn new(grid: Arc<Grid>, funcs: Vec<Coefficient>) -> Result<Self> {
        if funcs.is_empty() {
            return Err(Error::invalid("at least one noise coefficient is required"));
        }
        for f in &funcs {
            f.validate()?;
        }
        let dim = grid.dim();
        let sample = |pts: &[Point]| -> Vec<Vec<Jet>> {
            funcs
                .iter()
                .map(|f| pts.iter().map(|&p| f.eval(p, dim)).collect())
                .collect()
        };
        let interior = sample(&grid.points());
        let closure = sample(&grid.closure_points());
        Ok(Self {
            grid,
            funcs,
            interior,
            closure,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn funcs(&self) -> &[Coefficient] {
        &self.funcs
    }

    /// Number of signal components `N`.
    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    /// Samples of `f_k` on interior nodes.
    pub fn jets(&self, k: usize) -> &[Jet] {
        &self.interior[k]
    }

    /// Samples of `f_k` on all closure nodes (boundary included).
    pub fn closure_jets(&self, k: usize) -> &[Jet] {
        &self.closure[k]
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// `μ = −Σ f_k z_k` on interior nodes.
    pub fn mu_values(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(combine(&self.interior, z, |j| j.value))
    }

    /// `μ` on closure nodes.
    pub fn mu_closure(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(combine(&self.closure, z, |j| j.value))
    }

    /// `(μ, |∇μ|, Δμ)` on closure nodes for the increment `z`.
    pub fn mu_jets_closure(&self, z: &[f64]) -> Result<Vec<Jet>> {
        self.check(z)?;
        Ok(combine_jets(&self.closure, z))
    }

    pub fn mu_jets(&self, z: &[f64]) -> Result<Vec<Jet>> {
        self.check(z)?;
        Ok(combine_jets(&self.interior, z))
    }

    /// `Σ f_k Δz_k` on interior nodes.
    pub fn drift(&self, dz: &[f64]) -> Result<Vec<f64>> {
        self.check(dz)?;
        Ok(combine(&self.interior, dz, |j| -j.value))
    }
}

fn combine(jets: &[Vec<Jet>], z: &[f64], pick: impl Fn(&Jet) -> f64) -> Vec<f64> {
    let n = jets[0].len();
    let mut out = vec![0.0; n];
    for (fk, &zk) in jets.iter().zip(z) {
        if zk == 0.0 {
            continue;
        }
        for (o, j) in out.iter_mut().zip(fk) {
            *o -= pick(j) * zk;
        }
    }
    out
}

fn combine_jets(jets: &[Vec<Jet>], z: &[f64]) -> Vec<Jet> {
    let n = jets[0].len();
    let mut out = vec![
        Jet {
            value: 0.0,
            grad: [0.0; 2],
            lap: 0.0
        };
        n
    ];
    for (fk, &zk) in jets.iter().zip(z) {
        for (o, j) in out.iter_mut().zip(fk) {
            o.value -= j.value * zk;
            o.grad[0] -= j.grad[0] * zk;
            o.grad[1] -= j.grad[1] * zk;
            o.lap -= j.lap * zk;
        }
    }
    out
}

/// `μ = −Σ f_k z_k` together with `∇μ` and `Δμ`.
pub fn mu_field(coeffs: &CoefficientSet, z: &[f64]) -> Result<MuField> {
    let jets = coeffs.mu_jets(z)?;
    let grid = coeffs.grid().clone();
    Ok(MuField {
        mu: Field::new(grid.clone(), jets.iter().map(|j| j.value).collect())?,
        grad: jets.iter().map(|j| j.grad).collect(),
        lap: Field::new(grid, jets.iter().map(|j| j.lap).collect())?,
    })
}
