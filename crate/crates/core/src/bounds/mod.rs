//! Explicit piecewise supersolutions: admissible partitions, the bound
//! `K^{(σ₀)}`, the initial-condition-free bound `U = K^{(0)}`, the
//! regularization threshold `δ₀`, the fast-diffusion variant and the
//! L¹-contraction constant.
//!
//! With `A^{(m−1)/m} = R^{2/m}/(|m−1| d)` the pieces are
//!
//! * degenerate (`m > 1`): `K_i = A^{1/m}(t − τ_i + σ_i)^{−1/(m−1)}(R² − |ξ|²)^{1/m} e^{μ_{τ_i}}`,
//! * fast (`0 < m < 1`): `K_i = A^{1/m}(σ_i − t)^{1/(1−m)}(R² − |ξ|²)^{1/m} e^{μ_{τ_i}}`.
//!
//! They bound the transformed variable `Y`; the physical variable obeys
//! `X_t ≤ e^{−μ_t} K_t` (see [`PiecewiseBound::x_field`]).

mod partition;

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::geometry::{Field, Grid};
use crate::signals::SignalPath;
use crate::solver::CoefficientSet;
use crate::{Error, Result};

use partition::{scan, Contraction, Supersolution};

/// Smallest admissible non-final gap, in units of the signal's sample spacing.
pub const MIN_GAP_STEPS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundMode {
    Degenerate,
    Fast,
}

/// Greedy admissible partition `τ_0 < … < τ_L` of the window of `z`, with
/// gaps at most 1 and non-final gaps at least `4·dt`.
pub fn choose_partition(z: &SignalPath, coeffs: &CoefficientSet, m: f64) -> Result<Vec<f64>> {
    check_m(m)?;
    let grid = coeffs.grid();
    let crit = Supersolution {
        m,
        radius: grid.radius(),
        dim: grid.dim() as f64,
    };
    scan(z, coeffs, &crit, 1.0, MIN_GAP_STEPS * z.dt())
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 0.0) || m == 1.0 || !m.is_finite() {
        return Err(Error::invalid(format!("exponent m = {m} must be positive and ≠ 1")));
    }
    Ok(())
}

/// `A` from `A^{(m−1)/m} = R^{2/m} / (|m − 1| d)`.
pub fn a_constant(m: f64, radius: f64, dim: usize) -> f64 {
    let base = radius.powf(2.0 / m) / ((m - 1.0).abs() * dim as f64);
    base.powf(m / (m - 1.0))
}

/// Smallest non-final gap; the whole window when there is a single piece.
fn min_gap(partition: &[f64]) -> f64 {
    let l = partition.len() - 1;
    if l == 1 {
        return partition[1] - partition[0];
    }
    partition[..l]
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

fn check_partition(partition: &[f64], z: &SignalPath) -> Result<()> {
    let tol = 1e-9 * z.dt();
    if partition.len() < 2
        || (partition[0] - z.t0()).abs() > tol
        || (partition[partition.len() - 1] - z.t1()).abs() > tol
        || partition.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(Error::invalid("partition must increase strictly from the start to the end of the signal window"));
    }
    Ok(())
}

/// A piecewise explicit bound over a partition of the signal window.
#[derive(Debug, Clone)]
pub struct PiecewiseBound {
    pub mode: BoundMode,
    pub m: f64,
    pub partition: Vec<f64>,
    /// Smallest non-final gap.
    pub gamma: f64,
    pub sigma: Vec<f64>,
    pub a: f64,
    pub radius: f64,
    pub c4: f64,
    grid: Arc<Grid>,
    coeffs: CoefficientSet,
    z: SignalPath,
    exp_mu: Vec<Vec<f64>>,
    spatial: Vec<f64>,
}

impl PiecewiseBound {
    fn assemble(
        mode: BoundMode,
        m: f64,
        partition: &[f64],
        sigma: Vec<f64>,
        coeffs: &CoefficientSet,
        z: &SignalPath,
    ) -> Result<Self> {
        check_partition(partition, z)?;
        let grid = coeffs.grid().clone();
        let r = grid.radius();
        let exp_mu = partition[..partition.len() - 1]
            .iter()
            .map(|&t| {
                Ok(coeffs
                    .mu_values(&z.value_at(t)?)?
                    .into_iter()
                    .map(f64::exp)
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let spatial = grid
            .points()
            .iter()
            .map(|p| (r * r - grid.norm_sq(p)).powf(1.0 / m))
            .collect();
        Ok(Self {
            mode,
            m,
            partition: partition.to_vec(),
            gamma: min_gap(partition),
            sigma,
            a: a_constant(m, r, grid.dim()),
            radius: r,
            c4: grid.c4(),
            grid,
            coeffs: coeffs.clone(),
            z: z.clone(),
            exp_mu,
            spatial,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn pieces(&self) -> usize {
        self.partition.len() - 1
    }

    /// Piece `i` with `τ_i ≤ t < τ_{i+1}`; the final time belongs to the last piece.
    pub fn piece(&self, t: f64) -> Result<usize> {
        let t0 = self.partition[0];
        let t1 = self.partition[self.pieces()];
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            return Err(Error::WindowOutOfRange {
                start: t,
                end: t,
                t0,
                t1,
            });
        }
        let i = self.partition.partition_point(|&tau| tau <= t);
        Ok(i.saturating_sub(1).min(self.pieces() - 1))
    }

    fn time_factor(&self, i: usize, t: f64) -> f64 {
        match self.mode {
            BoundMode::Degenerate => {
                let s = t - self.partition[i] + self.sigma[i];
                if s <= 0.0 {
                    f64::INFINITY
                } else {
                    s.powf(-1.0 / (self.m - 1.0))
                }
            }
            BoundMode::Fast => (self.sigma[i] - t).max(0.0).powf(1.0 / (1.0 - self.m)),
        }
    }

    fn piece_value(&self, i: usize, t: f64, node: usize) -> f64 {
        self.a.powf(1.0 / self.m) * self.time_factor(i, t) * self.spatial[node] * self.exp_mu[i][node]
    }

    /// `K(t, ξ_node)`; `+∞` where the time factor is singular.
    pub fn evaluate(&self, t: f64, node: usize) -> Result<f64> {
        Ok(self.piece_value(self.piece(t)?, t, node))
    }

    /// `K_t` on all interior nodes.
    pub fn field(&self, t: f64) -> Result<Vec<f64>> {
        let i = self.piece(t)?;
        Ok((0..self.grid.len()).map(|n| self.piece_value(i, t, n)).collect())
    }

    /// The bound for the physical variable, `e^{−μ_t} K_t`.
    pub fn x_field(&self, t: f64) -> Result<Vec<f64>> {
        let mu = self.coeffs.mu_values(&self.z.value_at(t)?)?;
        Ok(self
            .field(t)?
            .into_iter()
            .zip(mu)
            .map(|(k, mu)| k * (-mu).exp())
            .collect())
    }

    pub fn sup_at(&self, t: f64) -> Result<f64> {
        Ok(self.field(t)?.into_iter().fold(0.0, f64::max))
    }

    pub fn x_sup_at(&self, t: f64) -> Result<f64> {
        Ok(self.x_field(t)?.into_iter().fold(0.0, f64::max))
    }

    /// Exact range of `K` over all times and interior nodes: each piece is
    /// monotone in `t`, so both piece ends suffice.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..self.pieces() {
            for t in [self.partition[i], self.partition[i + 1]] {
                for n in 0..self.grid.len() {
                    let v = self.piece_value(i, t, n);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    /// Closed-form upper bound `A^{1/m} (min σ_i)^{−1/(m−1)} R^{2/m} e^{sup|μ|}`
    /// (degenerate mode), with the sup over the sampled window.
    pub fn global_max(&self) -> Result<f64> {
        if self.mode != BoundMode::Degenerate {
            return Ok(self.range().1);
        }
        let mut sup_mu: f64 = 0.0;
        for i in 0..self.z.len() {
            let mu = self.coeffs.mu_closure(&self.z.sample(i))?;
            sup_mu = sup_mu.max(mu.iter().fold(0.0, |a, b| a.max(b.abs())));
        }
        let smin = self.sigma.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(self.a.powf(1.0 / self.m)
            * smin.powf(-1.0 / (self.m - 1.0))
            * self.radius.powf(2.0 / self.m)
            * sup_mu.exp())
    }

    /// `K` as CSV `t,x[,y],value` over the given times.
    pub fn write_csv<W: Write>(&self, writer: W, times: &[f64]) -> Result<()> {
        let dim = self.grid.dim();
        let mut w = csv::Writer::from_writer(writer);
        if dim == 1 {
            w.write_record(["t", "x", "value"])?;
        } else {
            w.write_record(["t", "x", "y", "value"])?;
        }
        let pts = self.grid.points();
        for &t in times {
            for (p, v) in pts.iter().zip(self.field(t)?) {
                let mut row = vec![format!("{t:.16e}")];
                row.extend(p[..dim].iter().map(|c| format!("{c:.16e}")));
                row.push(format!("{v:.16e}"));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn degenerate(
    sigma0: f64,
    partition: &[f64],
    coeffs: &CoefficientSet,
    z: &SignalPath,
    m: f64,
) -> Result<PiecewiseBound> {
    if !(m > 1.0) {
        return Err(Error::invalid("the degenerate bound needs m > 1"));
    }
    if !(sigma0 >= 0.0) {
        return Err(Error::SigmaOrdering(format!("σ₀ = {sigma0} must be nonnegative")));
    }
    check_partition(partition, z)?;
    let gamma = min_gap(partition);
    let mut sigma = vec![sigma0];
    for _ in 1..partition.len() - 1 {
        let s = *sigma.last().expect("nonempty");
        sigma.push(0.5 * (s + gamma));
    }
    PiecewiseBound::assemble(BoundMode::Degenerate, m, partition, sigma, coeffs, z)
}

/// `K^{(σ₀)}` with `σ_{i+1} = ½(σ_i + γ)`.
pub fn build_supersolution(
    sigma0: f64,
    partition: &[f64],
    coeffs: &CoefficientSet,
    z: &SignalPath,
    m: f64,
) -> Result<PiecewiseBound> {
    if !(sigma0 > 0.0) {
        return Err(Error::SigmaOrdering(format!("σ₀ = {sigma0} must be positive")));
    }
    degenerate(sigma0, partition, coeffs, z, m)
}

/// `U = K^{(0)}`: infinite at the start of the window, independent of the data.
pub fn uniform_bound_u(
    partition: &[f64],
    coeffs: &CoefficientSet,
    z: &SignalPath,
    m: f64,
) -> Result<PiecewiseBound> {
    degenerate(0.0, partition, coeffs, z, m)
}

/// `σ₀ = (A^{1/m} C₄^{1/m} inf e^{μ₀} / y0_sup)^{m−1}`.
pub fn sigma0_formula(a: f64, c4: f64, inf_exp_mu0: f64, y0_sup: f64, m: f64) -> f64 {
    if y0_sup <= 0.0 {
        return f64::INFINITY;
    }
    (a.powf(1.0 / m) * c4.powf(1.0 / m) * inf_exp_mu0 / y0_sup).powf(m - 1.0)
}

fn inf_exp_mu0(coeffs: &CoefficientSet, z: &SignalPath, partition: &[f64]) -> Result<f64> {
    let mu0 = coeffs.mu_closure(&z.value_at(partition[0])?)?;
    Ok(mu0.iter().fold(f64::INFINITY, |a, &b| a.min(b)).exp())
}

/// Largest `σ₀` with `K_0(τ_0) ≥ y0_sup` everywhere; `+∞` for zero data.
pub fn sigma0_for(
    y0_sup: f64,
    partition: &[f64],
    coeffs: &CoefficientSet,
    z: &SignalPath,
    m: f64,
) -> Result<f64> {
    if !(m > 1.0) {
        return Err(Error::invalid("σ₀ from this formula needs m > 1"));
    }
    let grid = coeffs.grid();
    let a = a_constant(m, grid.radius(), grid.dim());
    Ok(sigma0_formula(a, grid.c4(), inf_exp_mu0(coeffs, z, partition)?, y0_sup, m))
}

/// `δ₀ = min(min K, 1/max K)`.
pub fn delta0_for(bound: &PiecewiseBound) -> Result<f64> {
    let (lo, hi) = bound.range();
    if !hi.is_finite() {
        return Err(Error::invalid("δ₀ needs a finite bound (σ₀ > 0)"));
    }
    if !(lo > 0.0) {
        return Err(Error::invalid("bound vanishes somewhere; the enclosing radius must exceed the domain"));
    }
    Ok(lo.min(1.0 / hi))
}

/// Offsets for the fast-diffusion bound: `σ₀` is the smallest value with
/// `K_0(τ_0) ≥ y0_sup`, raised to `max(2τ_1, max gap)` relative to the
/// window start so that `σ_i > τ_{i+1}` holds along `σ_{i+1} = 2σ_i + τ_{i+1}`.
///
/// Times are measured from the window start.
pub fn fast_sigmas(
    y0_sup: f64,
    partition: &[f64],
    coeffs: &CoefficientSet,
    z: &SignalPath,
    m: f64,
) -> Result<Vec<f64>> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::invalid("fast-diffusion offsets need 0 < m < 1"));
    }
    check_partition(partition, z)?;
    let grid = coeffs.grid();
    let a = a_constant(m, grid.radius(), grid.dim());
    let base = a.powf(1.0 / m) * grid.c4().powf(1.0 / m) * inf_exp_mu0(coeffs, z, partition)?;
    let from_data = (y0_sup.max(0.0) / base).powf(1.0 - m);
    let t0 = partition[0];
    let max_gap = partition.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut sigma = vec![from_data.max(2.0 * (partition[1] - t0)).max(max_gap)];
    for i in 1..partition.len() - 1 {
        let prev = sigma[i - 1];
        sigma.push(2.0 * prev + (partition[i] - t0));
    }
    Ok(sigma)
}

/// Fast-diffusion bound for given offsets (relative to the window start);
/// requires `σ_i > τ_{i+1}`.
pub fn fast_diffusion_bound(
    sigma: &[f64],
    partition: &[f64],
    coeffs: &CoefficientSet,
    z: &SignalPath,
    m: f64,
) -> Result<PiecewiseBound> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::invalid("the fast-diffusion bound needs 0 < m < 1"));
    }
    check_partition(partition, z)?;
    if sigma.len() != partition.len() - 1 {
        return Err(Error::SigmaOrdering(format!(
            "{} offsets for {} pieces",
            sigma.len(),
            partition.len() - 1
        )));
    }
    let t0 = partition[0];
    for (i, &s) in sigma.iter().enumerate() {
        if !(s > partition[i + 1] - t0) {
            return Err(Error::SigmaOrdering(format!(
                "σ_{i} = {s} does not exceed τ_{} = {}",
                i + 1,
                partition[i + 1] - t0
            )));
        }
    }
    // Offsets are stored in absolute time so the piece formula reads `σ_i − t`.
    let abs: Vec<f64> = sigma.iter().map(|s| s + t0).collect();
    PiecewiseBound::assemble(BoundMode::Fast, m, partition, abs, coeffs, z)
}

/// Details of the L¹-contraction estimate.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionEstimate {
    /// Bound for `sup_t ‖X¹_t − X²_t‖_{L¹} / ‖X¹₀ − X²₀‖_{L¹}`.
    pub constant: f64,
    /// `sup η / inf η` for the weight `η_t = φ e^{−μ_{τ_i}}`.
    pub weight_ratio: f64,
    pub phi_sup: f64,
    pub phi_c1: f64,
    pub partition: Vec<f64>,
}

/// `φ = 1 + (−Δ_h)^{-1} 1` and its discrete `C¹` norm (boundary value 1).
fn phi_weight(grid: &Grid) -> (Vec<f64>, f64, f64) {
    let phi: Vec<f64> = grid
        .inverse_laplacian(&vec![1.0; grid.len()])
        .into_iter()
        .map(|v| 1.0 + v)
        .collect();
    let sup = phi.iter().copied().fold(1.0, f64::max);
    let mut grad: f64 = 0.0;
    match grid.axes() {
        [x] => {
            let at = |i: isize| if i < 0 || i >= x.n as isize { 1.0 } else { phi[i as usize] };
            for i in -1..x.n as isize {
                grad = grad.max((at(i + 1) - at(i)).abs() / x.h());
            }
        }
        [x, y] => {
            let (nx, ny) = (x.n as isize, y.n as isize);
            let at = |i: isize, j: isize| {
                if i < 0 || j < 0 || i >= nx || j >= ny {
                    1.0
                } else {
                    phi[(j * nx + i) as usize]
                }
            };
            for j in -1..=ny {
                for i in -1..=nx {
                    let gx = (at(i + 1, j) - at(i, j)) / x.h();
                    let gy = (at(i, j + 1) - at(i, j)) / y.h();
                    grad = grad.max((gx * gx + gy * gy).sqrt());
                }
            }
        }
        _ => unreachable!(),
    }
    (phi, sup, sup + grad)
}

/// Bound on the L¹ growth of differences of two solutions driven by `z`.
///
/// On the contraction partition the weighted quantity `∫ (Y¹−Y²)⁺ φ e^{−μ_{τ_i}}`
/// is nonincreasing inside each piece and grows by at most
/// `ρ_i = sup e^{μ_{τ_{i−1}} − μ_{τ_i}}` at each cut. Converting between `Y`
/// and `X` gives
/// `C = (sup φ / inf φ) · max_t [Π_{j ≤ i(t)} ρ_j · sup e^{μ_{τ_{i(t)}} − μ_t}]`.
pub fn contraction_estimate(coeffs: &CoefficientSet, z: &SignalPath) -> Result<ContractionEstimate> {
    let grid = coeffs.grid();
    let (phi, phi_sup, phi_c1) = phi_weight(grid);
    let partition = scan(z, coeffs, &Contraction { phi_c1 }, f64::INFINITY, 0.0)?;
    let mu_at = |t: f64| -> Result<Vec<f64>> { coeffs.mu_closure(&z.value_at(t)?) };
    let sup_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);

    let mut log_prod = 0.0;
    let mut worst: f64 = 0.0;
    let mut mu_prev = mu_at(partition[0])?;
    let mut j = 0;
    for i in 0..partition.len() - 1 {
        let mu_tau = mu_at(partition[i])?;
        if i > 0 {
            log_prod += sup_diff(&mu_prev, &mu_tau);
        }
        let mut piece_sup: f64 = 0.0;
        while j < z.len() && z.time(j) < partition[i + 1] {
            if z.time(j) >= partition[i] {
                piece_sup = piece_sup.max(sup_diff(&mu_tau, &mu_at(z.time(j))?));
            }
            j += 1;
        }
        piece_sup = piece_sup.max(sup_diff(&mu_tau, &mu_at(partition[i + 1])?));
        worst = worst.max(log_prod + piece_sup);
        mu_prev = mu_tau;
    }

    let interior_mu = |t: f64| coeffs.mu_values(&z.value_at(t)?);
    let mut eta_min = f64::INFINITY;
    let mut eta_max: f64 = 0.0;
    for &tau in &partition[..partition.len() - 1] {
        for (p, mu) in phi.iter().zip(interior_mu(tau)?) {
            let eta = p * (-mu).exp();
            eta_min = eta_min.min(eta);
            eta_max = eta_max.max(eta);
        }
        for mu in mu_at(tau)? {
            eta_min = eta_min.min((-mu).exp());
        }
    }
    Ok(ContractionEstimate {
        constant: phi_sup * worst.exp(),
        weight_ratio: eta_max / eta_min,
        phi_sup,
        phi_c1,
        partition,
    })
}

/// The constant `C` of [`contraction_estimate`].
pub fn estimate_contraction_constant(coeffs: &CoefficientSet, z: &SignalPath) -> Result<f64> {
    Ok(contraction_estimate(coeffs, z)?.constant)
}

/// Nodewise check that `field ≤ bound + tol`; returns the largest excess.
pub fn max_excess(field: &Field, bound: &[f64]) -> f64 {
    field
        .values()
        .iter()
        .zip(bound)
        .map(|(v, b)| v - b)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests;
