//! `Φ(r) = |r|^m sgn r` and its regularization `Φ^δ`, which agrees with `Φ`
//! on `δ ≤ |r| ≤ 1/δ`, is odd and C², and has slope pinned between two
//! positive constants.
//!
//! The regularization is built on its derivative `p = (Φ^δ)'`, an even C¹
//! function: constant `s₀` on `[0, δ/2]`, a cubic Hermite blend into `Φ'` on
//! `[δ/2, δ]`, `Φ'` itself on `[δ, 1/δ]`, and a cubic Hermite return to the
//! constant `Φ'(1/δ)` on `[1/δ, 2/δ]`. `s₀` is fixed so that `Φ^δ(δ) = δ^m`.

use serde::Serialize;

use crate::{Error, Result};

/// `|r|^m sgn r`.
pub fn phi(r: f64, m: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r.abs().powf(m).copysign(r)
    }
}

/// `Φ'(r) = m |r|^{m-1}`; infinite at 0 when `m < 1`.
pub fn phi_prime(r: f64, m: f64) -> f64 {
    m * r.abs().powf(m - 1.0)
}

/// Cubic in the local variable `s = r − a` on `[a, a + len]`, with the value
/// of its antiderivative at `a`.
#[derive(Debug, Clone, Copy, Serialize)]
struct Cubic {
    a: f64,
    len: f64,
    c: [f64; 4],
    v_a: f64,
}

impl Cubic {
    fn hermite(a: f64, len: f64, p0: f64, m0: f64, p1: f64, m1: f64, v_a: f64) -> Self {
        let l2 = len * len;
        let c2 = (-3.0 * p0 - 2.0 * len * m0 + 3.0 * p1 - len * m1) / l2;
        let c3 = (2.0 * p0 + len * m0 - 2.0 * p1 + len * m1) / (l2 * len);
        Self {
            a,
            len,
            c: [p0, m0, c2, c3],
            v_a,
        }
    }

    fn p(&self, r: f64) -> f64 {
        let s = r - self.a;
        self.c[0] + s * (self.c[1] + s * (self.c[2] + s * self.c[3]))
    }

    fn dp(&self, r: f64) -> f64 {
        let s = r - self.a;
        self.c[1] + s * (2.0 * self.c[2] + s * 3.0 * self.c[3])
    }

    fn value(&self, r: f64) -> f64 {
        let s = r - self.a;
        self.v_a
            + s * (self.c[0] + s * (self.c[1] / 2.0 + s * (self.c[2] / 3.0 + s * self.c[3] / 4.0)))
    }

    fn end(&self) -> f64 {
        self.a + self.len
    }

    /// Endpoints plus interior extrema of `p` and of `p'`.
    fn critical_points(&self) -> Vec<f64> {
        let [_, c1, c2, c3] = self.c;
        let mut s = vec![0.0, self.len];
        if c3 != 0.0 {
            s.push(-c2 / (3.0 * c3));
            let disc = 4.0 * c2 * c2 - 12.0 * c3 * c1;
            if disc >= 0.0 {
                let q = disc.sqrt();
                s.push((-2.0 * c2 + q) / (6.0 * c3));
                s.push((-2.0 * c2 - q) / (6.0 * c3));
            }
        } else if c2 != 0.0 {
            s.push(-c1 / (2.0 * c2));
        }
        s.into_iter()
            .filter(|v| v.is_finite() && *v >= 0.0 && *v <= self.len)
            .map(|v| self.a + v)
            .collect()
    }
}

/// Exponent, regularization level and the derived slope bounds of `Φ^δ`.
#[derive(Debug, Clone, Serialize)]
pub struct PhiSpec {
    m: f64,
    delta: f64,
    c1: f64,
    c2: f64,
    inner: Cubic,
    outer: Cubic,
    s0: f64,
    s_inf: f64,
    v_far: f64,
    psi_knots: [f64; 4],
}

impl PhiSpec {
    pub fn new(m: f64, delta: f64) -> Result<Self> {
        if !(m > 0.0) || m == 1.0 || !m.is_finite() {
            return Err(Error::invalid(format!("exponent m = {m} must be positive and ≠ 1")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("δ = {delta} not in (0, 1)")));
        }
        let d = delta;
        let s0 = 4.0 / 3.0 * d.powf(m - 1.0) * (1.0 - m / 4.0 + m * (m - 1.0) / 48.0);
        let inner = Cubic::hermite(
            d / 2.0,
            d / 2.0,
            s0,
            0.0,
            phi_prime(d, m),
            m * (m - 1.0) * d.powf(m - 2.0),
            s0 * d / 2.0,
        );
        let big = 1.0 / d;
        let s_inf = phi_prime(big, m);
        let outer = Cubic::hermite(
            big,
            big,
            s_inf,
            m * (m - 1.0) * big.powf(m - 2.0),
            s_inf,
            0.0,
            big.powf(m),
        );
        let v_far = outer.value(outer.end());
        let mut spec = Self {
            m,
            delta,
            c1: 0.0,
            c2: 0.0,
            inner,
            outer,
            s0,
            s_inf,
            v_far,
            psi_knots: [0.0; 4],
        };
        spec.slope_bounds()?;
        spec.psi_knots = spec.knot_antiderivatives();
        Ok(spec)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Lower slope bound `C₁(δ)`.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Upper bound `C₂(δ)` for both the slope and the curvature.
    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// `(Φ^δ(r), (Φ^δ)'(r))`.
    #[inline]
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let x = r.abs();
        let (v, p) = if x <= self.inner.a {
            (self.s0 * x, self.s0)
        } else if x < self.delta {
            (self.inner.value(x), self.inner.p(x))
        } else if x <= self.outer.a {
            let xm1 = x.powf(self.m - 1.0);
            (xm1 * x, self.m * xm1)
        } else if x < self.outer.end() {
            (self.outer.value(x), self.outer.p(x))
        } else {
            (self.v_far + self.s_inf * (x - self.outer.end()), self.s_inf)
        };
        (v.copysign(r), p)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.eval(r).1
    }

    /// `(Φ^δ)''(r)`; odd in `r`.
    pub fn second_derivative(&self, r: f64) -> f64 {
        let x = r.abs();
        let q = if x <= self.inner.a {
            0.0
        } else if x < self.delta {
            self.inner.dp(x)
        } else if x <= self.outer.a {
            self.m * (self.m - 1.0) * x.powf(self.m - 2.0)
        } else if x < self.outer.end() {
            self.outer.dp(x)
        } else {
            0.0
        };
        q.copysign(r)
    }

    /// `Ψ^δ(r) = ∫₀^r Φ^δ`.
    pub fn psi(&self, r: f64) -> f64 {
        let x = r.abs();
        let k = &self.psi_knots;
        let knots = [self.inner.a, self.delta, self.outer.a, self.outer.end()];
        if x <= knots[0] {
            0.5 * self.s0 * x * x
        } else if x < knots[1] {
            k[0] + self.integrate(knots[0], x)
        } else if x <= knots[2] {
            k[1] + (x.powf(self.m + 1.0) - knots[1].powf(self.m + 1.0)) / (self.m + 1.0)
        } else if x < knots[3] {
            k[2] + self.integrate(knots[2], x)
        } else {
            let s = x - knots[3];
            k[3] + self.v_far * s + 0.5 * self.s_inf * s * s
        }
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        let f = |s: f64| self.value(s);
        adaptive_simpson(&f, a, b, 1e-12 * (1.0 + b.abs()), 40)
    }

    fn knot_antiderivatives(&self) -> [f64; 4] {
        let d = self.delta;
        let k0 = self.s0 * d * d / 8.0;
        let k1 = k0 + self.integrate(self.inner.a, d);
        let k2 = k1 + (self.outer.a.powf(self.m + 1.0) - d.powf(self.m + 1.0)) / (self.m + 1.0);
        let k3 = k2 + self.integrate(self.outer.a, self.outer.end());
        [k0, k1, k2, k3]
    }

    fn slope_bounds(&mut self) -> Result<()> {
        let mut lo = self.s0.min(self.s_inf);
        let mut hi = self.s0.max(self.s_inf);
        for piece in [self.inner, self.outer] {
            for r in piece.critical_points() {
                let p = piece.p(r);
                lo = lo.min(p);
                hi = hi.max(p).max(piece.dp(r).abs());
            }
        }
        for r in [self.delta, self.outer.a] {
            let p = phi_prime(r, self.m);
            let q = (self.m * (self.m - 1.0) * r.powf(self.m - 2.0)).abs();
            lo = lo.min(p);
            hi = hi.max(p).max(q);
        }
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::invalid(format!(
                "regularization of Φ with m = {} and δ = {} is not strictly increasing",
                self.m, self.delta
            )));
        }
        self.c1 = lo;
        self.c2 = hi;
        Ok(())
    }
}

/// `(Φ^δ(r), (Φ^δ)'(r))`.
pub fn phi_delta(r: f64, spec: &PhiSpec) -> (f64, f64) {
    spec.eval(r)
}

/// `∫₀^r Φ^δ(s) ds`.
pub fn psi_delta(r: f64, spec: &PhiSpec) -> f64 {
    spec.psi(r)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_rec(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        left + right + diff / 15.0
    } else {
        simpson_rec(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
    }
}
