//! Extremal eigenvalues, condition numbers and norm-bound checks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dense_sym_eigenvalues, dot, norm, scale_in_place, Diagonal, LinearOperator};
use crate::operator::ScaledOperator;
use crate::solver::pcg;

pub const DEFAULT_TOL: f64 = 1e-8;

/// Largest size for which dense eigensolves are used.
pub const DENSE_LIMIT: usize = 512;

/// Iteration cap used when the caller passes `None`.
pub fn default_max_iter(n: usize) -> usize {
    (10 * n).max(1000)
}

fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    scale_in_place(1.0 / nv, &mut v);
    v
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EigEstimate {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration for the largest-magnitude eigenvalue of a symmetric
/// operator. Stops when `||A v - theta v|| <= tol |theta|`.
pub fn power_iteration(a: &dyn LinearOperator, tol: f64, max_iter: usize, seed: u64) -> Result<EigEstimate> {
    let n = a.dim();
    let mut v = random_unit(n, seed);
    let mut av = vec![0.0; n];
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        a.apply(&v, &mut av);
        theta = dot(&v, &av);
        let r: f64 = av.iter().zip(&v).map(|(x, y)| (x - theta * y).powi(2)).sum::<f64>().sqrt();
        let nav = norm(&av);
        if nav == 0.0 {
            return Ok(EigEstimate {
                value: 0.0,
                residual: 0.0,
                iterations: it,
            });
        }
        residual = r / theta.abs().max(f64::MIN_POSITIVE);
        if residual <= tol {
            return Ok(EigEstimate {
                value: theta.abs(),
                residual,
                iterations: it,
            });
        }
        for (vi, x) in v.iter_mut().zip(&av) {
            *vi = x / nav;
        }
    }
    Err(Error::EigNotConverged {
        estimate: theta.abs(),
        residual,
        iterations: max_iter,
    })
}

/// `||A||_2` of a symmetric operator by power iteration.
pub fn spectral_norm(a: &dyn LinearOperator, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
    power_iteration(a, tol, max_iter, seed).map(|e| e.value)
}

/// Smallest eigenvalue of an SPD operator by inverse iteration with an inner
/// Jacobi-preconditioned CG. Stops when the Rayleigh quotient changes by at
/// most `tol` relative.
pub fn inverse_iteration(
    a: &dyn LinearOperator,
    diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigEstimate> {
    let n = a.dim();
    let m = match diag {
        Some(d) => Diagonal(d.iter().map(|x| 1.0 / x).collect()),
        None => Diagonal(vec![1.0; n]),
    };
    let inner_tol = (tol * 1e-2).max(1e-13);
    let inner_cap = default_max_iter(n);
    let mut v = random_unit(n, seed);
    let mut prev = f64::INFINITY;
    let mut av = vec![0.0; n];
    for it in 1..=max_iter {
        let (w, _, _) = match pcg(a, &m, &v, inner_tol, inner_cap) {
            Ok(r) => r,
            Err(Error::CgNotConverged { best, residual, .. }) if residual < tol => (best, 0, residual),
            Err(e) => return Err(e),
        };
        v = w;
        let nv = norm(&v);
        scale_in_place(1.0 / nv, &mut v);
        a.apply(&v, &mut av);
        let theta = dot(&v, &av);
        if theta <= 0.0 {
            return Err(Error::CgBreakdown { iteration: it });
        }
        let change = (theta - prev).abs() / theta;
        prev = theta;
        if change <= tol {
            return Ok(EigEstimate {
                value: theta,
                residual: change,
                iterations: it,
            });
        }
    }
    Err(Error::EigNotConverged {
        estimate: prev,
        residual: f64::NAN,
        iterations: max_iter,
    })
}

/// `lambda_min` of an SPD operator.
pub fn min_eig_spd(a: &dyn LinearOperator, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
    inverse_iteration(a, None, tol, max_iter, seed).map(|e| e.value)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub spectral_norm: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub kappa_eff: f64,
    pub alpha: f64,
    pub tol: f64,
    pub method: &'static str,
    pub iterations_max: usize,
    pub iterations_min: usize,
}

/// Condition numbers of `G` and of the normalized `G' = G / alpha`.
pub fn condition_numbers(scaled: &ScaledOperator, tol: f64) -> Result<SpectralReport> {
    let g = scaled.unscaled();
    let n = g.size();
    let (lambda_min, lambda_max, method, it_max, it_min) = if n <= DENSE_LIMIT {
        let ev = dense_sym_eigenvalues(&g.to_dense());
        (ev[0], ev[n - 1], "dense", 0, 0)
    } else {
        let cap = default_max_iter(n);
        let hi = power_iteration(&g, tol, cap, 1)?;
        let lo = inverse_iteration(&g, Some(g.diagonal()), tol, cap, 2)?;
        (lo.value, hi.value, "iterative", hi.iterations, lo.iterations)
    };
    if lambda_min <= 0.0 {
        return Err(Error::Precondition(format!("operator is not positive definite (lambda_min = {lambda_min})")));
    }
    Ok(SpectralReport {
        n,
        lambda_max,
        lambda_min,
        spectral_norm: lambda_max,
        k: lambda_max / lambda_min,
        kappa_eff: scaled.alpha / lambda_min,
        alpha: scaled.alpha,
        tol,
        method,
        iterations_max: it_max,
        iterations_min: it_min,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda_min: f64,
    pub k_min: f64,
    /// Implied `C^2 = k_min / lambda_min`.
    pub c_squared: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareTable {
    pub rows: Vec<PoincareRow>,
    /// `max lambda_min / min lambda_min` over the rows.
    pub spread: f64,
    /// Set when the last `lambda_min` dropped below half the first.
    pub decaying: bool,
}

/// Tabulates `lambda_min(G)` over a mesh-refinement family.
pub fn poincare_check(instances: &[(ScaledOperator, f64)], tol: f64) -> Result<PoincareTable> {
    let mut rows = Vec::with_capacity(instances.len());
    for (s, k_min) in instances {
        let r = condition_numbers(s, tol)?;
        rows.push(PoincareRow {
            n: r.n,
            lambda_min: r.lambda_min,
            k_min: *k_min,
            c_squared: k_min / r.lambda_min,
        });
    }
    let lo = rows.iter().map(|r| r.lambda_min).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.lambda_min).fold(0.0, f64::max);
    let decaying = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) => l.lambda_min < 0.5 * f.lambda_min,
        _ => false,
    };
    Ok(PoincareTable {
        rows,
        spread: hi / lo,
        decaying,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecondBoundReport {
    pub alpha_a: f64,
    pub alpha_m: f64,
    #[serde(rename = "norm_AinvMinv")]
    pub norm_ainv_minv: f64,
    pub kappa_composed: f64,
    #[serde(rename = "K_A")]
    pub k_a: f64,
    /// Condition number of the preconditioned product `M A`.
    #[serde(rename = "K_MA")]
    pub k_ma: f64,
    pub slack: f64,
}

impl PrecondBoundReport {
    /// `slack >= -rel_tol * K_A`.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.slack >= -rel_tol * self.k_a
    }
}

fn singular_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    (sv.max(), sv.min())
}

/// Dense evaluation of `alpha_A alpha_M ||A^{-1} M^{-1}||` against `K(A)`.
/// The subnormalizations must bound the norms they stand for.
pub fn precond_lower_bound(a: &DMatrix<f64>, m: &DMatrix<f64>, alpha_a: f64, alpha_m: f64) -> Result<PrecondBoundReport> {
    if a.shape() != m.shape() || !a.is_square() {
        return Err(Error::Domain("A and M must be square and of equal size".into()));
    }
    let (a_max, a_min) = singular_extremes(a);
    let (m_max, m_min) = singular_extremes(m);
    const SLOP: f64 = 1e-12;
    if alpha_a < a_max * (1.0 - SLOP) {
        return Err(Error::Precondition(format!("alpha_A = {alpha_a} is below ||A|| = {a_max}")));
    }
    if alpha_m < m_max * (1.0 - SLOP) {
        return Err(Error::Precondition(format!("alpha_M = {alpha_m} is below ||M|| = {m_max}")));
    }
    if a_min == 0.0 || m_min == 0.0 {
        return Err(Error::Precondition("A and M must be invertible".into()));
    }
    let (ma_max, ma_min) = singular_extremes(&(m * a));
    let norm_ainv_minv = 1.0 / ma_min;
    let k_a = a_max / a_min;
    let kappa_composed = alpha_a * alpha_m * norm_ainv_minv;
    Ok(PrecondBoundReport {
        alpha_a,
        alpha_m,
        norm_ainv_minv,
        kappa_composed,
        k_a,
        k_ma: ma_max / ma_min,
        slack: kappa_composed - k_a,
    })
}

/// Random SPD matrix `Q diag(e) Q^T` with eigenvalues log-uniform in `[1, cond]`.
pub fn random_spd(dim: usize, cond: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let e: Vec<f64> = (0..dim).map(|_| cond.powf(rng.random_range(0.0..1.0))).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e));
    let s = &q * d * q.transpose();
    (&s + s.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{pitchfork3d, rasterize, CoefficientField, InterfaceRule};
    use crate::grid::GridSpec;
    use crate::linalg::{dense_spectral_norm, Identity};
    use crate::operator::{laplacian3d, BoundaryMode};

    #[test]
    fn power_iteration_examples() {
        assert!((spectral_norm(&Identity(17), 1e-10, 100, 0).unwrap() - 1.0).abs() < 1e-14);
        let lap = laplacian3d(&GridSpec::new(1, 2.0).unwrap());
        assert!((spectral_norm(&lap, 1e-10, 1000, 3).unwrap() - 9.0).abs() < 1e-9);
        let d = Diagonal((1..=20).map(|i| i as f64).collect());
        assert!((spectral_norm(&d, 1e-10, 10_000, 5).unwrap() - 20.0).abs() < 1e-8);
    }

    #[test]
    fn inverse_iteration_examples() {
        let lap = laplacian3d(&GridSpec::new(1, 2.0).unwrap());
        assert!((min_eig_spd(&lap, 1e-12, 100, 0).unwrap() - 3.0).abs() < 1e-9);
        assert!((min_eig_spd(&Identity(5), 1e-12, 100, 0).unwrap() - 1.0).abs() < 1e-12);
        let d = Diagonal(vec![2.0, 5.0, 7.0, 9.0]);
        assert!((min_eig_spd(&d, 1e-12, 100, 0).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn report_for_small_constant_field() {
        let grid = GridSpec::new(1, 2.0).unwrap();
        let f = CoefficientField::constant(grid, 1.0).unwrap();
        let (_, s) = ScaledOperator::from_field(&f, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap();
        let r = condition_numbers(&s, DEFAULT_TOL).unwrap();
        assert!((r.k - 3.0).abs() < 1e-12);
        assert!(r.kappa_eff >= r.k);
        // alpha equal to the norm gives kappa_eff = K
        let tight = crate::operator::rescale(&s.unscaled(), r.lambda_max).unwrap();
        let r2 = condition_numbers(&tight, DEFAULT_TOL).unwrap();
        assert!((r2.kappa_eff - r2.k).abs() < 1e-12);
    }

    #[test]
    fn iterative_matches_dense_on_pitchfork() {
        let grid = GridSpec::new(3, 1.0).unwrap();
        let f = rasterize(&pitchfork3d(&grid, 2, 2.0, 0.01).unwrap(), &grid).unwrap();
        let (g, s) = ScaledOperator::from_field(&f, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap();
        let dense = g.to_dense();
        let ev = dense_sym_eigenvalues(&dense);
        let hi = power_iteration(&g, 1e-8, 100_000, 1).unwrap();
        let lo = inverse_iteration(&g, Some(g.diagonal()), 1e-12, 1000, 2).unwrap();
        assert!((hi.value - ev[511]).abs() < 1e-6 * ev[511]);
        assert!((lo.value - ev[0]).abs() < 1e-8 * ev[0]);
        let inv_norm = dense_spectral_norm(&dense.try_inverse().unwrap());
        let r = condition_numbers(&s, DEFAULT_TOL).unwrap();
        assert!((r.kappa_eff - s.alpha * inv_norm).abs() < 1e-8 * r.kappa_eff);
    }

    #[test]
    fn precond_equality_and_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(12, 50.0, &mut rng);
        let ainv = a.clone().try_inverse().unwrap();
        let r = precond_lower_bound(&a, &ainv, dense_spectral_norm(&a), dense_spectral_norm(&ainv)).unwrap();
        assert!(r.slack.abs() < 1e-10 * r.k_a);
        let i = DMatrix::identity(6, 6);
        let r = precond_lower_bound(&i, &i, 1.0, 1.0).unwrap();
        assert!((r.kappa_composed - 1.0).abs() < 1e-14 && (r.k_a - 1.0).abs() < 1e-14);
        assert!(matches!(precond_lower_bound(&a, &ainv, 0.5, 1e6), Err(Error::Precondition(_))));
    }

    #[test]
    fn poincare_table_flags_decay() {
        let mk = |k: f64| {
            let grid = GridSpec::new(1, 1.0).unwrap();
            let f = CoefficientField::constant(grid, k).unwrap();
            let (_, s) = ScaledOperator::from_field(&f, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap();
            (s, k)
        };
        let t = poincare_check(&[mk(1.0), mk(0.1)], 1e-10).unwrap();
        assert!(t.decaying);
        assert!((t.rows[0].lambda_min / t.rows[1].lambda_min - 10.0).abs() < 1e-10);
        assert!((t.rows[0].c_squared - t.rows[1].c_squared).abs() < 1e-12);
    }
}
