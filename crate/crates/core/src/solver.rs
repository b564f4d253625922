//! Preconditioned conjugate gradient and the smallest-entry metric.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fast_inverse::FastInverseLaplacian;
use crate::linalg::{axpy, dot, norm, Diagonal, Identity, LinearOperator};
use crate::operator::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
    InverseLaplacian,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub preconditioner: Preconditioner,
}

/// Preconditioned CG for an SPD operator `a` with SPD preconditioner `m`,
/// starting from zero. Converged when the true relative residual is at most `tol`.
pub fn pcg(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = a.dim();
    if b.len() != n || m.dim() != n {
        return domain(format!("dimension mismatch: operator {n}, rhs {}, preconditioner {}", b.len(), m.dim()));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return domain("right-hand side is zero");
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = m.apply_vec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    let mut best = (x.clone(), rel);

    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 {
            return Err(Error::CgBreakdown { iteration: it });
        }
        let step = rz / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        rel = norm(&r) / bnorm;
        if rel <= tol {
            // confirm against the true residual before stopping
            let ax = a.apply_vec(&x);
            for ((ri, bi), axi) in r.iter_mut().zip(b).zip(&ax) {
                *ri = bi - axi;
            }
            rel = norm(&r) / bnorm;
            if rel <= tol {
                return Ok((x, it, rel));
            }
            z = m.apply_vec(&r);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        if rel < best.1 {
            best = (x.clone(), rel);
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let (best, residual) = if rel < best.1 { (x, rel) } else { best };
    Err(Error::CgNotConverged {
        best,
        residual,
        iterations: max_iter,
    })
}

/// Solves `G x = b` with the chosen preconditioner.
pub fn cg_solve(
    g: &SparseOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
) -> Result<SolveResult> {
    let (x, iterations, relative_residual) = match precond {
        Preconditioner::None => pcg(g, &Identity(g.size()), b, tol, max_iter)?,
        Preconditioner::Jacobi => {
            let inv: Vec<f64> = g.diagonal().iter().map(|d| 1.0 / d).collect();
            if inv.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return domain("jacobi preconditioner needs a positive diagonal");
            }
            pcg(g, &Diagonal(inv), b, tol, max_iter)?
        }
        Preconditioner::InverseLaplacian => {
            let m = FastInverseLaplacian::new_3d(g.cells_per_axis())?.negated();
            pcg(g, &m, b, tol, max_iter)?
        }
    };
    Ok(SolveResult {
        x,
        iterations,
        relative_residual,
        preconditioner: precond,
    })
}

/// Default threshold separating numerical zeros from small entries.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

/// Smallest normalized magnitude among entries above `zero_tol * ||x||`.
pub fn epsilon_metric(x: &[f64], zero_tol: f64) -> Result<f64> {
    let nx = norm(x);
    if nx == 0.0 || !nx.is_finite() {
        return domain("vector is zero or not finite");
    }
    x.iter()
        .map(|v| v.abs())
        .filter(|v| *v > zero_tol * nx)
        .min_by(f64::total_cmp)
        .map(|v| v / nx)
        .ok_or_else(|| Error::Domain("every entry is below the zero threshold".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{pitchfork3d, rasterize, CoefficientField, InterfaceRule};
    use crate::grid::GridSpec;
    use crate::operator::{assemble_g, build_source, BoundaryMode};

    #[test]
    fn identity_solves_in_one_step() {
        let g = SparseOperator::identity(2);
        let b: Vec<f64> = (0..8).map(|i| i as f64 + 1.0).collect();
        let r = cg_solve(&g, &b, 1e-12, 10, Preconditioner::None).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, b);
    }

    #[test]
    fn constant_field_matches_dense_solve() {
        let grid = GridSpec::new(1, 2.0).unwrap();
        let f = CoefficientField::constant(grid, 1.0).unwrap();
        let g = assemble_g(&f, &grid, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap();
        let mut b = vec![0.0; 8];
        b[0] = 1.0;
        let dense = g.to_dense().lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        for p in [Preconditioner::None, Preconditioner::Jacobi, Preconditioner::InverseLaplacian] {
            let r = cg_solve(&g, &b, 1e-13, 100, p).unwrap();
            for (x, y) in r.x.iter().zip(dense.iter()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_helps_on_heterogeneous_field() {
        let grid = GridSpec::new(3, 1.0).unwrap();
        let f = rasterize(&pitchfork3d(&grid, 3, 2.0, 0.01).unwrap(), &grid).unwrap();
        let g = assemble_g(&f, &grid, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap();
        let b = build_source(&grid, &[(3, 1.0), (200, -1.0), (511, 1.0)]).unwrap();
        let plain = cg_solve(&g, &b, 1e-10, 10_000, Preconditioner::None).unwrap();
        let jac = cg_solve(&g, &b, 1e-10, 10_000, Preconditioner::Jacobi).unwrap();
        assert!(jac.iterations < plain.iterations);
        let scale = norm(&plain.x);
        for (x, y) in plain.x.iter().zip(&jac.x) {
            assert!((x - y).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn non_spd_breaks_down() {
        let mut g = SparseOperator::identity(1);
        g.set_diag(0, -1.0);
        let b = vec![1.0; 1];
        assert!(matches!(
            cg_solve(&g, &b, 1e-10, 10, Preconditioner::None),
            Err(Error::CgBreakdown { .. })
        ));
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let grid = GridSpec::new(2, 1.0).unwrap();
        let g = crate::operator::laplacian3d(&grid);
        let b = vec![1.0; 64];
        match cg_solve(&g, &b, 1e-14, 1, Preconditioner::None) {
            Err(Error::CgNotConverged { best, residual, .. }) => {
                assert_eq!(best.len(), 64);
                assert!(residual < 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_metric(&[0.0, 1.0, 0.0], DEFAULT_ZERO_TOL).unwrap(), 1.0);
        assert!((epsilon_metric(&[3.0, 4.0, 0.0], 1e-12).unwrap() - 0.6).abs() < 1e-15);
        assert!(epsilon_metric(&[0.0, 0.0], 1e-12).is_err());
        let x = [1e-20, 2.0, -0.5];
        let e = epsilon_metric(&x, 1e-12).unwrap();
        assert!((e - 0.5 / norm(&x)).abs() < 1e-15);
    }
}
