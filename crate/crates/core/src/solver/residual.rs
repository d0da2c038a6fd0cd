use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{CoefficientSet, State, Trajectory};
use crate::geometry::Grid;
use crate::nonlinearity::phi;
use crate::signals::SignalPath;
use crate::{Error, Result};

/// `η(t, ξ) = ((T − t)/(T − t₀))^q · Π_d sin(k_d π (ξ_d − a_d)/L_d)`.
///
/// Vanishes at the final time and on the boundary of the grid's rectangle, and
/// has closed-form time derivative, gradient and Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub q: u32,
    pub k: [u32; 2],
}

impl TestFunction {
    pub fn new(q: u32, k: [u32; 2]) -> Result<Self> {
        if q == 0 || k[0] == 0 {
            return Err(Error::invalid("test functions need q ≥ 1 and k ≥ 1"));
        }
        Ok(Self { q, k })
    }

    /// A fixed family of five: `(q, k) ∈ {(1,1), (2,1), (1,3), (2,3), (3,5)}`.
    /// Odd `k` only, so none is orthogonal to data symmetric about the centre.
    pub fn registry() -> Vec<TestFunction> {
        [(1, 1), (2, 1), (1, 3), (2, 3), (3, 5)]
            .into_iter()
            .map(|(q, k)| TestFunction { q, k: [k, k] })
            .collect()
    }

    /// `(η, ∂_t η, ∇η, Δη)` at one interior node.
    fn eval(&self, grid: &Grid, t0: f64, t1: f64, t: f64, p: [f64; 2]) -> (f64, f64, [f64; 2], f64) {
        let span = t1 - t0;
        let s = ((t1 - t) / span).max(0.0);
        let time = s.powi(self.q as i32);
        let dtime = -(self.q as f64) / span * s.powi(self.q as i32 - 1);
        let mut sins = [1.0; 2];
        let mut coss = [0.0; 2];
        let mut freqs = [0.0; 2];
        for (d, ax) in grid.axes().iter().enumerate() {
            let w = self.k[d].max(1) as f64 * PI / (ax.b - ax.a);
            let arg = w * (p[d] - ax.a);
            sins[d] = arg.sin();
            coss[d] = w * arg.cos();
            freqs[d] = w;
        }
        let space = sins[0] * sins[1];
        let grad = [coss[0] * sins[1] * time, sins[0] * coss[1] * time];
        let lap = -space * (freqs[0] * freqs[0] + freqs[1] * freqs[1]) * time;
        (space * time, space * dtime, grad, lap)
    }
}

/// `|−∫∫ Y ∂_t η − ∫ Y₀ η₀ − ∫∫ Φ(e^{−μ} Y) Δ(e^{μ} η)|` on a stored
/// `Y` trajectory, with `Δ(e^μ η) = e^μ (Δη + 2∇μ·∇η + η(|∇μ|² + Δμ))`.
///
/// Space integrals use the interior-node rule `h^d Σ` (exact trapezoid for
/// integrands vanishing on the boundary); time integrals use the trapezoid
/// rule over the stored times.
pub fn very_weak_residual(
    traj: &Trajectory,
    eta: &TestFunction,
    coeffs: &CoefficientSet,
    z: &SignalPath,
) -> Result<f64> {
    if traj.state != State::Y {
        return Err(Error::invalid("very-weak residual needs a Y trajectory"));
    }
    let grid = traj.grid().clone();
    let m = traj.config.m;
    let vol = grid.cell_volume();
    let pts = grid.points();
    let (t0, t1) = (traj.times[0], traj.final_time());
    let mut slices = Vec::with_capacity(traj.len());
    for (t, field) in traj.times.iter().zip(&traj.fields) {
        let jets = coeffs.mu_jets(&z.value_at(*t)?)?;
        let mut acc = 0.0;
        for ((p, y), j) in pts.iter().zip(field.values()).zip(&jets) {
            let (e, et, g, l) = eta.eval(&grid, t0, t1, *t, *p);
            let em = j.value.exp();
            let gg = j.grad[0] * j.grad[0] + j.grad[1] * j.grad[1];
            let lap_e = em * (l + 2.0 * (j.grad[0] * g[0] + j.grad[1] * g[1]) + e * (gg + j.lap));
            acc += y * et + phi((-j.value).exp() * y, m) * lap_e;
        }
        slices.push(vol * acc);
    }
    let mut total = 0.0;
    for i in 1..slices.len() {
        total += 0.5 * (traj.times[i] - traj.times[i - 1]) * (slices[i] + slices[i - 1]);
    }
    let init: f64 = pts
        .iter()
        .zip(traj.fields[0].values())
        .map(|(p, y)| y * eta.eval(&grid, t0, t1, t0, *p).0)
        .sum::<f64>()
        * vol;
    Ok((-total - init).abs())
}
