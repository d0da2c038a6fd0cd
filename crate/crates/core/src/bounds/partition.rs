//! Greedy partition of the signal window into pieces on which the change of
//! `μ` stays small enough for a piecewise explicit bound to work.

use crate::signals::SignalPath;
use crate::solver::CoefficientSet;
use crate::{Error, Result};

/// Per-time statistics of `Dμ = μ_t − μ_τ` over the closed domain.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stats {
    pub min: f64,
    pub max: f64,
    pub grad: f64,
    pub lap: f64,
}

impl Stats {
    fn zero() -> Self {
        Stats {
            min: 0.0,
            max: 0.0,
            grad: 0.0,
            lap: 0.0,
        }
    }
}

/// Running extremes over a piece; `bracket` is the running sup of the
/// criterion's per-time penalty.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Running {
    pub min: f64,
    pub max: f64,
    pub bracket: f64,
}

pub(crate) trait Criterion {
    fn bracket(&self, s: &Stats) -> f64;
    fn holds(&self, r: &Running) -> bool;
}

/// The supersolution conditions, for either sign of `m − 1`.
pub(crate) struct Supersolution {
    pub m: f64,
    pub radius: f64,
    pub dim: f64,
}

impl Supersolution {
    /// `inf e^{(1−m)Dμ} · (1 − (mR/d) sup_t[2g + (Rm/2)g² + (R/2)l])`.
    pub fn first(&self, r: &Running) -> f64 {
        let k = 1.0 - self.m;
        let inf = (k * r.max).min(k * r.min).exp();
        inf * (1.0 - self.m * self.radius / self.dim * r.bracket)
    }

    /// `inf e^{(m−1)Dμ}`.
    pub fn second(&self, r: &Running) -> f64 {
        let k = self.m - 1.0;
        (k * r.max).min(k * r.min).exp()
    }
}

impl Criterion for Supersolution {
    fn bracket(&self, s: &Stats) -> f64 {
        2.0 * s.grad + 0.5 * self.radius * self.m * s.grad * s.grad + 0.5 * self.radius * s.lap
    }

    fn holds(&self, r: &Running) -> bool {
        self.first(r) >= 0.5 && self.second(r) >= 0.5
    }
}

/// The L¹-contraction condition `inf e^{Dμ} (1 − 2‖φ‖_{C¹}(g + g² + l)) ≥ ½`.
pub(crate) struct Contraction {
    pub phi_c1: f64,
}

impl Criterion for Contraction {
    fn bracket(&self, s: &Stats) -> f64 {
        s.grad + s.grad * s.grad + s.lap
    }

    fn holds(&self, r: &Running) -> bool {
        r.min.exp() * (1.0 - 2.0 * self.phi_c1 * r.bracket) >= 0.5
    }
}

pub(crate) fn stats(coeffs: &CoefficientSet, dz: &[f64]) -> Result<Stats> {
    let jets = coeffs.mu_jets_closure(dz)?;
    let mut s = Stats::zero();
    s.min = f64::INFINITY;
    s.max = f64::NEG_INFINITY;
    for j in &jets {
        s.min = s.min.min(j.value);
        s.max = s.max.max(j.value);
        s.grad = s.grad.max((j.grad[0] * j.grad[0] + j.grad[1] * j.grad[1]).sqrt());
        s.lap = s.lap.max(j.lap.abs());
    }
    Ok(s)
}

fn fold(r: Running, s: &Stats, b: f64) -> Running {
    Running {
        min: r.min.min(s.min),
        max: r.max.max(s.max),
        bracket: r.bracket.max(b),
    }
}

const FRESH: Running = Running {
    min: 0.0,
    max: 0.0,
    bracket: 0.0,
};

/// Greedy left-to-right scan with bisection at cut points.
///
/// Pieces never exceed `max_gap`; a non-final piece shorter than `min_gap`
/// is an error. Between samples the path is linear, so every monitored
/// quantity is extremal at the ends of the sub-interval and checking the
/// candidate end point against the running extremes is exact.
pub(crate) fn scan(
    z: &SignalPath,
    coeffs: &CoefficientSet,
    criterion: &dyn Criterion,
    max_gap: f64,
    min_gap: f64,
) -> Result<Vec<f64>> {
    let t_end = z.t1();
    let mut taus = vec![z.t0()];
    let mut tau = z.t0();
    let mut z_tau = z.sample(0);
    let mut running = FRESH;
    let mut j = 1;
    let eval = |t: f64, z_tau: &[f64]| -> Result<(Stats, f64)> {
        let zt = z.value_at(t)?;
        let dz: Vec<f64> = zt.iter().zip(z_tau).map(|(a, b)| a - b).collect();
        let s = stats(coeffs, &dz)?;
        let b = criterion.bracket(&s);
        Ok((s, b))
    };
    loop {
        let sample_t = z.time(j.min(z.len() - 1));
        let cap = tau + max_gap;
        let (t, capped) = if cap < sample_t && cap < t_end {
            (cap, true)
        } else {
            (sample_t, false)
        };
        let (s, b) = eval(t, &z_tau)?;
        let cand = fold(running, &s, b);
        let cut = if criterion.holds(&cand) {
            if !capped {
                running = cand;
                if j + 1 >= z.len() {
                    taus.push(t_end);
                    return Ok(taus);
                }
                j += 1;
                continue;
            }
            t
        } else {
            let prev = if j >= 1 { z.time(j - 1) } else { tau };
            let mut lo = prev.max(tau);
            let mut hi = t;
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                let (s, b) = eval(mid, &z_tau)?;
                if criterion.holds(&fold(running, &s, b)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if !(cut > tau) || cut - tau < min_gap {
            return Err(Error::PartitionTooFine {
                gap: cut - tau,
                min_gap,
                at: tau,
            });
        }
        taus.push(cut);
        tau = cut;
        z_tau = z.value_at(cut)?;
        running = FRESH;
        while j < z.len() && z.time(j) <= tau {
            j += 1;
        }
        if j >= z.len() {
            if tau < t_end {
                taus.push(t_end);
            }
            return Ok(taus);
        }
    }
}
