//! Porous-medium and fast-diffusion equations driven by continuous
//! multiplicative signals.
//!
//! The equation `dX = Δ(|X|^m sgn X) dt + Σ_k f_k X ∘ dz^k` on a bounded
//! interval or rectangle with zero Dirichlet data is solved through the
//! transformation `Y = e^μ X`, `μ_t = -Σ_k f_k z^k_t`, which turns it into the
//! pathwise equation `∂_t Y = e^μ Δ(Φ(e^{-μ}) Φ(Y))`. Around the solver sit
//! explicit supersolution bounds, a random-dynamical-system layer (cocycles,
//! pullback runs, absorption) and an experiment harness.
//!
//! Module map:
//! - [`signals`]: Brownian / fractional Brownian paths, shifts, bounded-variation
//!   approximations.
//! - [`geometry`]: grids, fields, discrete Laplacian and norms.
//! - [`nonlinearity`]: `Φ` and its smooth non-degenerate regularization `Φ^δ`.
//! - [`solver`]: implicit time stepping, untransformation, direct BV scheme,
//!   limit solutions, very-weak residuals.
//! - [`bounds`]: piecewise explicit supersolutions, the universal bound `U`,
//!   the L¹ contraction constant.
//! - [`rds`]: cocycle evaluation and pullback experiments.
//! - [`harness`]: experiment configs, registries and the named suites.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod nonlinearity;
pub mod par;
pub mod rds;
pub mod signals;
pub mod solver;

pub use error::{Error, Result};
