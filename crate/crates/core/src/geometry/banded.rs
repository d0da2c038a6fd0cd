//! Symmetric positive-definite banded matrices with in-place Cholesky.

use crate::{Error, Result};

/// Lower band of a symmetric matrix: entry `(i, i - k)` for `k ∈ 0..=bw`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
            factored: false,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Entry `(i, j)` with `j ≤ i`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add_diagonal(&mut self, diag: &[f64]) {
        debug_assert_eq!(diag.len(), self.n);
        for (i, d) in diag.iter().enumerate() {
            let k = self.idx(i, i);
            self.data[k] += d;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Symmetric matrix-vector product (unfactored matrices only).
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert!(!self.factored);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place Cholesky factorization `A = L Lᵀ`.
    pub fn factor(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for k in lo_i..=i {
                let lo = lo_i.max(k.saturating_sub(bw));
                let mut s = self.data[self.idx(i, k)];
                for j in lo..k {
                    s -= self.data[self.idx(i, j)] * self.data[self.idx(k, j)];
                }
                if k == i {
                    if !(s > 0.0) {
                        return Err(Error::invalid(format!(
                            "banded matrix not positive definite at row {i} (pivot {s:e})"
                        )));
                    }
                    let p = self.idx(i, i);
                    self.data[p] = s.sqrt();
                } else {
                    let p = self.idx(i, k);
                    self.data[p] = s / self.data[self.idx(k, k)];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` in place after [`factor`](Self::factor).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert!(self.factored, "solve called on an unfactored matrix");
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(bw)..i {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for r in i + 1..(i + bw + 1).min(n) {
                s -= self.data[self.idx(r, i)] * b[r];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
    }
}
