//! Exact Gaussian synthesis of fractional Gaussian noise.
//!
//! Circulant embedding (Davies–Harte / Wood–Chan) of the increment
//! autocovariance, with a dense Cholesky factorization as fallback for tiny
//! grids or when the embedding is not nonnegative definite.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Grids with fewer increments than this use the Cholesky route.
const CHOLESKY_BELOW: usize = 8;

/// Autocovariance of unit-spacing fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

enum Method {
    Circulant {
        fft: Arc<dyn Fft<f64>>,
        /// `sqrt(λ_k / n2)` for the 2M-point embedding.
        scale: Vec<f64>,
    },
    Cholesky {
        /// Row-major lower factor, `n × n`.
        lower: Vec<f64>,
    },
}

/// Reusable sampler for `n` fGn increments with Hurst index `hurst`.
///
/// The eigen-decomposition is computed once; each [`sample`](Self::sample)
/// draws a fresh realization from the supplied RNG.
pub struct FgnSampler {
    n: usize,
    hurst: f64,
    method: Method,
}

impl FgnSampler {
    pub fn new(n: usize, hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::invalid(format!("Hurst index {hurst} not in (0,1)")));
        }
        if n == 0 {
            return Err(Error::invalid("fGn sampler needs at least one increment"));
        }
        if n >= CHOLESKY_BELOW {
            if let Some(method) = circulant(n, hurst) {
                return Ok(Self { n, hurst, method });
            }
        }
        Ok(Self {
            n,
            hurst,
            method: cholesky(n, hurst)?,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    /// Draws `n` unit-spacing fGn increments.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.method {
            Method::Circulant { fft, scale } => {
                let n2 = scale.len();
                let half = n2 / 2;
                let mut buf = vec![Complex::new(0.0, 0.0); n2];
                buf[0] = Complex::new(scale[0] * rng.sample::<f64, _>(StandardNormal), 0.0);
                buf[half] = Complex::new(scale[half] * rng.sample::<f64, _>(StandardNormal), 0.0);
                for k in 1..half {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    let s = scale[k] * std::f64::consts::FRAC_1_SQRT_2;
                    buf[k] = Complex::new(s * a, s * b);
                    buf[n2 - k] = buf[k].conj();
                }
                fft.process(&mut buf);
                buf[..self.n].iter().map(|c| c.re).collect()
            }
            Method::Cholesky { lower } => {
                let n = self.n;
                let normals: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                (0..n)
                    .map(|i| (0..=i).map(|j| lower[i * n + j] * normals[j]).sum())
                    .collect()
            }
        }
    }
}

fn circulant(n: usize, hurst: f64) -> Option<Method> {
    // Embedding size doubles until the spectrum is nonnegative (rarely needed).
    let mut m = n.next_power_of_two();
    for _ in 0..4 {
        let n2 = 2 * m;
        let mut row: Vec<Complex<f64>> = (0..n2)
            .map(|j| {
                let lag = if j <= m { j } else { n2 - j };
                Complex::new(fgn_autocovariance(hurst, lag), 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n2);
        fft.process(&mut row);
        let tol = 1e-10 * row[0].re.abs().max(1.0);
        if row.iter().all(|c| c.re >= -tol) {
            let scale = row
                .iter()
                .map(|c| (c.re.max(0.0) / n2 as f64).sqrt())
                .collect();
            return Some(Method::Circulant { fft, scale });
        }
        m *= 2;
    }
    None
}

fn cholesky(n: usize, hurst: f64) -> Result<Method> {
    let mut a: Vec<f64> = (0..n * n)
        .map(|idx| fgn_autocovariance(hurst, (idx / n).abs_diff(idx % n)))
        .collect();
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return Err(Error::invalid("fGn covariance not positive definite"));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    Ok(Method::Cholesky { lower: a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn autocovariance_brownian_is_white() {
        assert_eq!(fgn_autocovariance(0.5, 0), 1.0);
        for k in 1..10 {
            assert!(fgn_autocovariance(0.5, k).abs() < 1e-15);
        }
    }

    #[test]
    fn small_grids_use_cholesky() {
        assert!(!FgnSampler::new(4, 0.7).unwrap().uses_circulant());
        assert!(FgnSampler::new(64, 0.7).unwrap().uses_circulant());
    }

    #[test]
    fn rejects_bad_hurst() {
        assert!(FgnSampler::new(10, 0.0).is_err());
        assert!(FgnSampler::new(10, 1.0).is_err());
    }

    #[test]
    fn both_routes_match_lag_one_covariance() {
        // Empirical lag-1 covariance of increments against the closed form.
        for &n in &[5usize, 40] {
            let h = 0.3;
            let sampler = FgnSampler::new(n, h).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let reps = 20_000;
            let (mut c0, mut c1) = (0.0, 0.0);
            for _ in 0..reps {
                let x = sampler.sample(&mut rng);
                c0 += x[1] * x[1];
                c1 += x[1] * x[2];
            }
            c0 /= reps as f64;
            c1 /= reps as f64;
            assert!((c0 - 1.0).abs() < 0.05, "n={n} var {c0}");
            assert!((c1 - fgn_autocovariance(h, 1)).abs() < 0.05, "n={n} cov {c1}");
        }
    }
}
