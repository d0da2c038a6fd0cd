//! Uniform grids on intervals and rectangles with zero Dirichlet data,
//! the 3/5-point Laplacian, and the norms `L^p`, `L^∞`, `H¹₀` and
//! `H = (H¹₀)*`.
//!
//! Unknowns live on interior nodes only; boundary values are implicitly zero.
//! In 2D nodes are ordered with `x` fastest.

mod banded;

use std::io::Write;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use banded::BandedSpd;

/// Default ratio between the enclosing radius and the farthest point of the
/// closed domain.
pub const DEFAULT_RADIUS_FACTOR: f64 = 1.05;

/// A spatial point; the second coordinate is unused in 1D.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub a: f64,
    pub b: f64,
    /// Interior nodes along this axis.
    pub n: usize,
}

impl Axis {
    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n + 1) as f64
    }

    /// Coordinate of lattice index `i ∈ 0..=n+1` (0 and n+1 are boundary).
    pub fn coord(&self, i: usize) -> f64 {
        if i == self.n + 1 {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    /// Quadrature weight of every interior node: `(b − a)/n`, the cell
    /// volume spread so the weights sum to the axis length.
    fn weight(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }
}

/// Discretization of an interval or rectangle.
#[derive(Debug)]
pub struct Grid {
    axes: Vec<Axis>,
    radius: f64,
    weights: Vec<f64>,
    neg_laplacian: OnceLock<BandedSpd>,
    inverse: OnceLock<BandedSpd>,
}

impl Grid {
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Arc<Self>> {
        Self::build(vec![Axis { a, b, n }], None)
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Arc<Self>> {
        Self::build(
            vec![
                Axis { a: x.0, b: x.1, n: nx },
                Axis { a: y.0, b: y.1, n: ny },
            ],
            None,
        )
    }

    /// Builds a grid from axes with an optional enclosing radius override.
    pub fn build(axes: Vec<Axis>, radius: Option<f64>) -> Result<Arc<Self>> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid("grids are 1D or 2D"));
        }
        for ax in &axes {
            if !(ax.a < ax.b) || ax.n == 0 {
                return Err(Error::invalid(format!("degenerate axis {ax:?}")));
            }
        }
        let far = farthest_corner(&axes);
        let radius = match radius {
            Some(r) if r > far => r,
            Some(r) => {
                return Err(Error::invalid(format!(
                    "enclosing radius {r} does not strictly exceed the farthest domain point {far}"
                )))
            }
            None => DEFAULT_RADIUS_FACTOR * far.max(f64::MIN_POSITIVE),
        };
        let weights = match axes.as_slice() {
            [x] => vec![x.weight(); x.n],
            [x, y] => (0..y.n)
                .flat_map(|_| (0..x.n).map(move |_| x.weight() * y.weight()))
                .collect(),
            _ => unreachable!(),
        };
        Ok(Arc::new(Self {
            axes,
            radius,
            weights,
            neg_laplacian: OnceLock::new(),
            inverse: OnceLock::new(),
        }))
    }

    /// Same lattice with a different enclosing radius.
    pub fn with_radius(&self, radius: f64) -> Result<Arc<Self>> {
        Self::build(self.axes.clone(), Some(radius))
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Number of interior nodes (unknowns).
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::h).collect()
    }

    /// Largest spacing over the axes.
    pub fn h(&self) -> f64 {
        self.axes.iter().map(Axis::h).fold(0.0, f64::max)
    }

    /// Volume of one lattice cell, the weight of the discrete inner product.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::h).product()
    }

    /// `|O|`.
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(|a| a.b - a.a).product()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `inf_{ξ ∈ closure(O)} (R² − |ξ|²)`.
    pub fn c4(&self) -> f64 {
        let far = farthest_corner(&self.axes);
        self.radius * self.radius - far * far
    }

    /// Quadrature weights on interior nodes; they sum to `|O|`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinates of interior node `idx`.
    pub fn point(&self, idx: usize) -> Point {
        match self.axes.as_slice() {
            [x] => [x.coord(idx + 1), 0.0],
            [x, y] => [x.coord(idx % x.n + 1), y.coord(idx / x.n + 1)],
            _ => unreachable!(),
        }
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// All lattice points of the closed domain, boundary included.
    pub fn closure_points(&self) -> Vec<Point> {
        match self.axes.as_slice() {
            [x] => (0..x.n + 2).map(|i| [x.coord(i), 0.0]).collect(),
            [x, y] => (0..y.n + 2)
                .flat_map(|j| (0..x.n + 2).map(move |i| [x.coord(i), y.coord(j)]))
                .collect(),
            _ => unreachable!(),
        }
    }

    /// Squared Euclidean norm of a point in this grid's dimension.
    pub fn norm_sq(&self, p: &Point) -> f64 {
        p[..self.dim()].iter().map(|v| v * v).sum()
    }

    /// `Δ_h u` with zero boundary values.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.laplacian_into(u, &mut out);
        out
    }

    pub fn laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.len());
        match self.axes.as_slice() {
            [x] => {
                let n = x.n;
                let inv = 1.0 / (x.h() * x.h());
                for i in 0..n {
                    let l = if i > 0 { u[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { u[i + 1] } else { 0.0 };
                    out[i] = (l - 2.0 * u[i] + r) * inv;
                }
            }
            [x, y] => {
                let (nx, ny) = (x.n, y.n);
                let ix = 1.0 / (x.h() * x.h());
                let iy = 1.0 / (y.h() * y.h());
                for j in 0..ny {
                    for i in 0..nx {
                        let k = j * nx + i;
                        let c = u[k];
                        let l = if i > 0 { u[k - 1] } else { 0.0 };
                        let r = if i + 1 < nx { u[k + 1] } else { 0.0 };
                        let d = if j > 0 { u[k - nx] } else { 0.0 };
                        let t = if j + 1 < ny { u[k + nx] } else { 0.0 };
                        out[k] = (l - 2.0 * c + r) * ix + (d - 2.0 * c + t) * iy;
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// Banded lower triangle of `−Δ_h` (symmetric positive definite).
    pub fn neg_laplacian_band(&self) -> &BandedSpd {
        self.neg_laplacian.get_or_init(|| match self.axes.as_slice() {
            [x] => {
                let n = x.n;
                let inv = 1.0 / (x.h() * x.h());
                let mut a = BandedSpd::zeros(n, 1);
                for i in 0..n {
                    a.set(i, i, 2.0 * inv);
                    if i > 0 {
                        a.set(i, i - 1, -inv);
                    }
                }
                a
            }
            [x, y] => {
                let (nx, ny) = (x.n, y.n);
                let ix = 1.0 / (x.h() * x.h());
                let iy = 1.0 / (y.h() * y.h());
                let mut a = BandedSpd::zeros(nx * ny, nx);
                for j in 0..ny {
                    for i in 0..nx {
                        let k = j * nx + i;
                        a.set(k, k, 2.0 * ix + 2.0 * iy);
                        if i > 0 {
                            a.set(k, k - 1, -ix);
                        }
                        if j > 0 {
                            a.set(k, k - nx, -iy);
                        }
                    }
                }
                a
            }
            _ => unreachable!(),
        })
    }

    fn inverse_factor(&self) -> &BandedSpd {
        self.inverse.get_or_init(|| {
            let mut a = self.neg_laplacian_band().clone();
            a.factor()
                .expect("discrete Dirichlet Laplacian is positive definite");
            a
        })
    }

    /// Solves `−Δ_h v = u` with zero Dirichlet data.
    pub fn inverse_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut v = u.to_vec();
        self.inverse_factor().solve_in_place(&mut v);
        v
    }

    /// Discrete inner product `h^d Σ u_i v_i`, under which `Δ_h` is symmetric.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.cell_volume() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Quadrature `∫_O u`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.weights.iter().zip(u).map(|(w, v)| w * v).sum()
    }

    /// Squared discrete `H¹₀` seminorm: sum over all lattice edges, boundary
    /// edges included.
    pub fn grad_sq(&self, u: &[f64]) -> f64 {
        let vol = self.cell_volume();
        match self.axes.as_slice() {
            [x] => {
                let h = x.h();
                let mut s = 0.0;
                let mut prev = 0.0;
                for &v in u.iter().chain(std::iter::once(&0.0)) {
                    s += ((v - prev) / h).powi(2);
                    prev = v;
                }
                s * vol
            }
            [x, y] => {
                let (nx, ny) = (x.n, y.n);
                let at = |i: isize, j: isize| -> f64 {
                    if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                        0.0
                    } else {
                        u[j as usize * nx + i as usize]
                    }
                };
                let mut s = 0.0;
                for j in 0..ny as isize {
                    for i in -1..nx as isize {
                        s += ((at(i + 1, j) - at(i, j)) / x.h()).powi(2);
                    }
                }
                for i in 0..nx as isize {
                    for j in -1..ny as isize {
                        s += ((at(i, j + 1) - at(i, j)) / y.h()).powi(2);
                    }
                }
                s * vol
            }
            _ => unreachable!(),
        }
    }
}

fn farthest_corner(axes: &[Axis]) -> f64 {
    axes.iter()
        .map(|ax| ax.a.abs().max(ax.b.abs()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Which norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Norm {
    Lp(f64),
    Linf,
    H10,
    Hdual,
}

/// Real values on the interior nodes of a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Self::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn laplacian(&self) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.grid.laplacian(&self.values),
        }
    }

    pub fn inverse_laplacian(&self) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.grid.inverse_laplacian(&self.values),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm(&self, which: Norm) -> Result<f64> {
        norm(self, which)
    }

    /// `‖u⁺‖_{L¹}`.
    pub fn positive_part_l1(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.max(0.0))
            .sum()
    }

    /// Writes `x[,y],value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.grid.dim() == 1 {
            w.write_record(["x", "value"])?;
        } else {
            w.write_record(["x", "y", "value"])?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            let mut row: Vec<String> = p[..self.grid.dim()].iter().map(|c| format!("{c:.16e}")).collect();
            row.push(format!("{v:.16e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Quadrature `L^p`, max-abs, discrete `H¹₀`, and the dual norm
/// `‖u‖_H² = ⟨u, (−Δ_h)^{-1} u⟩`.
pub fn norm(u: &Field, which: Norm) -> Result<f64> {
    let g = &u.grid;
    match which {
        Norm::Lp(p) => {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::invalid(format!("L^p exponent {p} not in [1, ∞)")));
            }
            let s: f64 = g
                .weights()
                .iter()
                .zip(&u.values)
                .map(|(w, v)| w * v.abs().powf(p))
                .sum();
            Ok(s.powf(1.0 / p))
        }
        Norm::Linf => Ok(u.values.iter().fold(0.0, |m, v| m.max(v.abs()))),
        Norm::H10 => Ok(g.grad_sq(&u.values).sqrt()),
        Norm::Hdual => {
            let v = g.inverse_laplacian(&u.values);
            Ok(g.inner(&u.values, &v).max(0.0).sqrt())
        }
    }
}

/// Free-function form of [`Field::laplacian`].
pub fn laplacian(u: &Field) -> Field {
    u.laplacian()
}

/// Free-function form of [`Field::inverse_laplacian`].
pub fn inverse_laplacian(u: &Field) -> Field {
    u.inverse_laplacian()
}
