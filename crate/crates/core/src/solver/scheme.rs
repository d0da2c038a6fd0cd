//! Backward-Euler kernel for `c∘v − y = dt · e∘Δ_h(a∘Φ^δ(v))`.
//!
//! The transformed equation uses `c = 1, e = e^{μ'}, a = e^{−mμ'}`; the
//! direct BV scheme uses `e = a = 1, c = 1 − Σ f_k Δz_k`. Writing the Newton
//! correction as `δ = s / (a Φ^δ'(v))` turns the Jacobian into the SPD banded
//! matrix `diag(c / (e a Φ^δ'(v))) − dt Δ_h`.

use serde::{Deserialize, Serialize};

use crate::geometry::Grid;
use crate::nonlinearity::PhiSpec;
use crate::{Error, Result};

/// Nonlinear solver statistics for one (possibly subdivided) time step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
    pub picard: bool,
    pub substeps: usize,
}

impl StepStats {
    pub(crate) fn merge(self, other: StepStats) -> StepStats {
        StepStats {
            iterations: self.iterations + other.iterations,
            residual: self.residual.max(other.residual),
            picard: self.picard || other.picard,
            substeps: self.substeps + other.substeps,
        }
    }
}

pub(crate) struct Coefs<'a> {
    pub c: Option<&'a [f64]>,
    pub e: Option<&'a [f64]>,
    pub a: Option<&'a [f64]>,
}

impl Coefs<'_> {
    #[inline]
    fn c(&self, i: usize) -> f64 {
        self.c.map_or(1.0, |v| v[i])
    }
    #[inline]
    fn e(&self, i: usize) -> f64 {
        self.e.map_or(1.0, |v| v[i])
    }
    #[inline]
    fn a(&self, i: usize) -> f64 {
        self.a.map_or(1.0, |v| v[i])
    }
}

pub(crate) struct Problem<'a> {
    pub grid: &'a Grid,
    pub spec: &'a PhiSpec,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub coefs: Coefs<'a>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl Problem<'_> {
    /// Residual `F(v)` and the round-off floor of its evaluation.
    fn residual(&self, y: &[f64], v: &[f64], f: &mut [f64], w: &mut [f64]) -> f64 {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = self.coefs.a(i) * self.spec.value(v[i]);
        }
        self.grid.laplacian_into(w, f);
        let stencil = 4.0 * self.grid.dim() as f64 / (self.grid.h() * self.grid.h());
        let mut floor: f64 = 0.0;
        for i in 0..f.len() {
            let flux = self.dt * self.coefs.e(i) * f[i];
            let cv = self.coefs.c(i) * v[i];
            f[i] = cv - y[i] - flux;
            let size = cv.abs() + y[i].abs() + self.dt * self.coefs.e(i) * stencil * w[i].abs();
            floor = floor.max(size);
        }
        32.0 * f64::EPSILON * floor
    }

    fn solve_system(&self, diag: Vec<f64>, rhs: &mut [f64]) -> Result<()> {
        let mut band = self.grid.neg_laplacian_band().clone();
        band.scale(self.dt);
        band.add_diagonal(&diag);
        band.factor()?;
        band.solve_in_place(rhs);
        Ok(())
    }

    /// Solves for `v` given the previous state `y`.
    pub fn solve(&self, y: &[f64]) -> Result<(Vec<f64>, StepStats)> {
        let n = y.len();
        let target = self.tol * (1.0 + inf_norm(y));
        let mut v = y.to_vec();
        let mut f = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut f_trial = vec![0.0; n];
        let floor = self.residual(y, &v, &mut f, &mut w);
        let mut r = inf_norm(&f);
        let mut iterations = 0;
        let mut stalls = 0;
        let done = |r: f64, floor: f64| r <= target.max(floor);
        let mut converged = done(r, floor);

        while !converged && iterations < self.max_iter && stalls < 2 {
            iterations += 1;
            let p: Vec<f64> = v.iter().map(|&x| self.spec.derivative(x)).collect();
            let diag: Vec<f64> = (0..n)
                .map(|i| self.coefs.c(i) / (self.coefs.e(i) * self.coefs.a(i) * p[i]))
                .collect();
            let mut s: Vec<f64> = (0..n).map(|i| -f[i] / self.coefs.e(i)).collect();
            if self.solve_system(diag, &mut s).is_err() {
                break;
            }
            let delta: Vec<f64> = (0..n).map(|i| s[i] / (self.coefs.a(i) * p[i])).collect();
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                for i in 0..n {
                    trial[i] = v[i] + lambda * delta[i];
                }
                let fl = self.residual(y, &trial, &mut f_trial, &mut w);
                let rt = inf_norm(&f_trial);
                if rt.is_finite() && (rt < r * (1.0 - 1e-4 * lambda) || done(rt, fl)) {
                    if rt > 0.9 * r {
                        stalls += 1;
                    }
                    std::mem::swap(&mut v, &mut trial);
                    std::mem::swap(&mut f, &mut f_trial);
                    r = rt;
                    converged = done(rt, fl);
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if converged {
            return Ok((
                v,
                StepStats {
                    iterations,
                    residual: r,
                    picard: false,
                    substeps: 1,
                },
            ));
        }
        self.picard(y, iterations)
    }

    /// Fixed-point iteration on `b = Φ^δ(v)/v`; slower but globally stable.
    fn picard(&self, y: &[f64], prior: usize) -> Result<(Vec<f64>, StepStats)> {
        let n = y.len();
        let target = self.tol * (1.0 + inf_norm(y));
        let mut v = y.to_vec();
        let mut f = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut r = f64::INFINITY;
        for it in 1..=self.max_iter {
            let b: Vec<f64> = v
                .iter()
                .map(|&x| {
                    if x.abs() < 1e-300 {
                        self.spec.derivative(0.0)
                    } else {
                        self.spec.value(x) / x
                    }
                })
                .collect();
            let diag: Vec<f64> = (0..n)
                .map(|i| self.coefs.c(i) / (self.coefs.e(i) * self.coefs.a(i) * b[i]))
                .collect();
            let mut s: Vec<f64> = (0..n).map(|i| y[i] / self.coefs.e(i)).collect();
            self.solve_system(diag, &mut s)?;
            for i in 0..n {
                v[i] = s[i] / (self.coefs.a(i) * b[i]);
            }
            let floor = self.residual(y, &v, &mut f, &mut w);
            r = inf_norm(&f);
            if !r.is_finite() {
                return Err(Error::NonFinite("implicit step"));
            }
            if r <= target.max(floor) {
                return Ok((
                    v,
                    StepStats {
                        iterations: prior + it,
                        residual: r,
                        picard: true,
                        substeps: 1,
                    },
                ));
            }
        }
        Err(Error::NewtonDiverged {
            residual: r,
            iterations: prior + self.max_iter,
        })
    }
}
