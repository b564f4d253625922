//! Inverse Dirichlet Laplacian through its discrete sine eigenbasis.
//!
//! The Laplacian on an `n`-point-per-axis Dirichlet grid is rescaled so the
//! eigenvalue of smallest magnitude is `-1`, which makes `||Delta^{-1}|| = 1`.
//! In `d` dimensions the eigenvalue for modes `k_1..k_d` is
//! `-(sum_i sin^2(k_i pi / (2(n+1)))) / (d sin^2(pi / (2(n+1))))`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{domain, Result};
use crate::linalg::LinearOperator;

fn half_angle_sin2(k: usize, n: usize) -> f64 {
    (k as f64 * PI / (2.0 * (n as f64 + 1.0))).sin().powi(2)
}

/// Rescaled eigenvalues of the 2D Laplacian, index `(kx - 1) * n + (ky - 1)`.
pub fn laplacian_eigs_2d(n: usize) -> Vec<f64> {
    laplacian_eigs(n, 2)
}

/// Rescaled eigenvalues of the `dims`-dimensional Laplacian with the first
/// mode index varying slowest.
pub fn laplacian_eigs(n: usize, dims: u32) -> Vec<f64> {
    let s1 = half_angle_sin2(1, n);
    let s: Vec<f64> = (1..=n).map(|k| half_angle_sin2(k, n)).collect();
    let total = n.pow(dims);
    (0..total)
        .map(|mut idx| {
            let mut sum = 0.0;
            for _ in 0..dims {
                sum += s[idx % n];
                idx /= n;
            }
            -sum / (dims as f64 * s1)
        })
        .collect()
}

/// Orthonormal, symmetric discrete sine basis `V[x, k] = sqrt(2/(n+1)) sin(pi (x+1)(k+1)/(n+1))`.
pub fn sine_basis(n: usize) -> DMatrix<f64> {
    let c = (2.0 / (n as f64 + 1.0)).sqrt();
    let h = PI / (n as f64 + 1.0);
    DMatrix::from_fn(n, n, |x, k| c * (h * ((x + 1) * (k + 1)) as f64).sin())
}

/// Dense rescaled Laplacian (5-point for `dims = 2`, 7-point for `dims = 3`).
/// Vector index has the first axis varying slowest.
pub fn dense_laplacian(n: usize, dims: u32) -> DMatrix<f64> {
    let total = n.pow(dims);
    let scale = -1.0 / (4.0 * dims as f64 * half_angle_sin2(1, n));
    let mut m = DMatrix::zeros(total, total);
    for a in 0..total {
        m[(a, a)] = 2.0 * dims as f64 * scale;
        let mut stride = 1;
        for _ in 0..dims {
            let coord = (a / stride) % n;
            if coord > 0 {
                m[(a, a - stride)] = -scale;
            }
            if coord + 1 < n {
                m[(a, a + stride)] = -scale;
            }
            stride *= n;
        }
    }
    m
}

/// Matrix-free `Delta^{-1}`.
#[derive(Debug, Clone)]
pub struct FastInverseLaplacian {
    n: usize,
    dims: u32,
    basis: DMatrix<f64>,
    inv_eigs: Vec<f64>,
}

impl FastInverseLaplacian {
    pub fn new(n: usize, dims: u32) -> Result<Self> {
        if n == 0 {
            return domain("fast inverse Laplacian needs n >= 1");
        }
        if !(1..=3).contains(&dims) {
            return domain(format!("unsupported dimension {dims}"));
        }
        Ok(FastInverseLaplacian {
            n,
            dims,
            basis: sine_basis(n),
            inv_eigs: laplacian_eigs(n, dims).into_iter().map(|l| 1.0 / l).collect(),
        })
    }

    pub fn new_2d(n: usize) -> Result<Self> {
        Self::new(n, 2)
    }

    pub fn new_3d(n: usize) -> Result<Self> {
        Self::new(n, 3)
    }

    /// `-Delta^{-1}`, which is symmetric positive definite.
    pub fn negated(mut self) -> Self {
        for v in &mut self.inv_eigs {
            *v = -*v;
        }
        self
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> u32 {
        self.dims
    }

    /// Applies the sine transform along every axis in place.
    fn transform(&self, x: &mut [f64], tmp: &mut [f64]) {
        let n = self.n;
        let mut stride = 1;
        for _ in 0..self.dims {
            let block = stride * n;
            for base in (0..x.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (k, t) in tmp.iter_mut().enumerate().take(n) {
                        *t = (0..n).map(|i| self.basis[(k, i)] * x[start + i * stride]).sum();
                    }
                    for (k, t) in tmp.iter().enumerate().take(n) {
                        x[start + k * stride] = *t;
                    }
                }
            }
            stride *= n;
        }
    }
}

impl LinearOperator for FastInverseLaplacian {
    fn dim(&self) -> usize {
        self.inv_eigs.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; self.n];
        y.copy_from_slice(x);
        self.transform(y, &mut tmp);
        // the eigenvalue is symmetric in the mode indices, so digit order is irrelevant
        for (v, inv) in y.iter_mut().zip(&self.inv_eigs) {
            *v *= inv;
        }
        self.transform(y, &mut tmp);
    }
}
