//! Assembly of the 7-band heterogeneous Poisson operator and its
//! Gershgorin-normalized form.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::{interface_value, CoefficientField, InterfaceRule};
use crate::grid::{neighbor, Direction, GridSpec, Neighbor};
use crate::linalg::LinearOperator;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Zero head in a ghost layer whose permeability mirrors the boundary cell.
    #[default]
    GhostDirichlet,
    /// Listed rows replaced by unit rows, with the matching columns zeroed.
    IdentityRows(BTreeSet<usize>),
}

/// Symmetric operator on an `n x n x n` grid stored as its diagonal plus the
/// three lower bands (offsets `-n^2`, `-n`, `-1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    diag: Vec<f64>,
    /// `lower[axis][a]` holds `A[a, a - stride(axis)]`, or 0 when absent.
    lower: [Vec<f64>; 3],
}

impl SparseOperator {
    pub fn zeros(n: usize) -> Self {
        let size = n * n * n;
        SparseOperator {
            n,
            diag: vec![0.0; size],
            lower: [vec![0.0; size], vec![0.0; size], vec![0.0; size]],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut op = SparseOperator::zeros(n);
        op.diag.fill(1.0);
        op
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn lower_band(&self, axis: usize) -> &[f64] {
        &self.lower[axis]
    }

    /// Entry in row `a` coupling to the neighbor in direction `dir`
    /// (0 when the neighbor is outside the grid).
    pub fn entry_dir(&self, a: usize, dir: Direction) -> f64 {
        match neighbor(a, dir, self.n) {
            Neighbor::OutOfDomain => 0.0,
            Neighbor::Cell(b) => {
                if dir.is_plus() {
                    self.lower[dir.axis()][b]
                } else {
                    self.lower[dir.axis()][a]
                }
            }
        }
    }

    /// Dense-style access to `A[a, b]`.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return self.diag[a];
        }
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        for dir in Direction::LOWER {
            if neighbor(hi, dir, self.n) == Neighbor::Cell(lo) {
                return self.lower[dir.axis()][hi];
            }
        }
        0.0
    }

    pub fn set_diag(&mut self, a: usize, v: f64) {
        self.diag[a] = v;
    }

    /// Sets the symmetric pair coupling `a` to its neighbor in `dir`.
    pub fn set_coupling(&mut self, a: usize, dir: Direction, v: f64) -> Result<()> {
        match neighbor(a, dir, self.n) {
            Neighbor::OutOfDomain => domain(format!("cell {a} has no neighbor in {dir:?}")),
            Neighbor::Cell(b) => {
                let row = if dir.is_plus() { b } else { a };
                self.lower[dir.axis()][row] = v;
                Ok(())
            }
        }
    }

    /// Number of stored lower-triangle nonzeros (diagonal included).
    pub fn lower_nnz(&self) -> usize {
        self.diag.iter().filter(|v| **v != 0.0).count()
            + self
                .lower
                .iter()
                .map(|band| band.iter().filter(|v| **v != 0.0).count())
                .sum::<usize>()
    }

    pub fn nnz(&self) -> usize {
        2 * self.lower_nnz() - self.diag.iter().filter(|v| **v != 0.0).count()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> SparseOperator {
        SparseOperator {
            n: self.n,
            diag: self.diag.iter().map(|v| v * c).collect(),
            lower: self.lower.clone().map(|band| band.iter().map(|v| v * c).collect()),
        }
    }

    /// Largest absolute row sum; an upper bound on the spectral norm.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.size())
            .map(|a| {
                self.diag[a].abs()
                    + Direction::ALL
                        .iter()
                        .map(|&d| self.entry_dir(a, d).abs())
                        .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.diag
            .iter()
            .chain(self.lower.iter().flatten())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Row-major list of `(row, col, value)` for the lower triangle.
    pub fn lower_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.lower_nnz());
        for a in 0..self.size() {
            for dir in Direction::LOWER {
                let v = self.lower[dir.axis()][a];
                if v != 0.0 {
                    let b = a - dir.stride(self.n);
                    out.push((a, b, v));
                }
            }
            if self.diag[a] != 0.0 {
                out.push((a, a, self.diag[a]));
            }
        }
        out.sort_by_key(|&(r, c, _)| (c, r));
        out
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.size()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let size = self.size();
        for (a, ya) in y.iter_mut().enumerate() {
            *ya = self.diag[a] * x[a];
        }
        for axis in 0..3 {
            let s = [n * n, n, 1][axis];
            let band = &self.lower[axis];
            for a in s..size {
                let v = band[a];
                if v != 0.0 {
                    y[a] += v * x[a - s];
                    y[a - s] += v * x[a];
                }
            }
        }
    }
}

/// Assembles `G` from cell permeabilities.
pub fn assemble_g(
    field: &CoefficientField,
    grid: &GridSpec,
    rule: InterfaceRule,
    boundary: &BoundaryMode,
) -> Result<SparseOperator> {
    if field.grid() != grid {
        return domain("field and grid do not match");
    }
    let n = grid.n();
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let mut op = SparseOperator::zeros(n);
    for a in 0..grid.num_cells() {
        let ka = field.k(a);
        let mut d = 0.0;
        for dir in Direction::ALL {
            let t = match neighbor(a, dir, n) {
                Neighbor::Cell(b) => interface_value(ka, field.k(b), rule)?,
                Neighbor::OutOfDomain => ka,
            };
            d += t;
            if !dir.is_plus() && matches!(neighbor(a, dir, n), Neighbor::Cell(_)) {
                op.lower[dir.axis()][a] = -t * inv_dx2;
            }
        }
        op.diag[a] = d * inv_dx2;
    }
    if let BoundaryMode::IdentityRows(rows) = boundary {
        for &a in rows {
            if a >= grid.num_cells() {
                return domain(format!("identity row {a} is outside the grid"));
            }
            op.diag[a] = 1.0;
            for dir in Direction::ALL {
                if let Neighbor::Cell(_) = neighbor(a, dir, n) {
                    op.set_coupling(a, dir, 0.0)?;
                }
            }
        }
    }
    Ok(op)
}

/// The constant-coefficient 7-point Laplacian (diagonal 6, couplings -1).
pub fn laplacian3d(grid: &GridSpec) -> SparseOperator {
    let n = grid.n();
    let mut op = SparseOperator::zeros(n);
    op.diag.fill(6.0);
    for a in 0..grid.num_cells() {
        for dir in Direction::LOWER {
            if let Neighbor::Cell(_) = neighbor(a, dir, n) {
                op.lower[dir.axis()][a] = -1.0;
            }
        }
    }
    op
}

/// `12 k_max N^{2/3} / L^2`, a Gershgorin bound on `||G||`.
pub fn gershgorin_alpha(field: &CoefficientField) -> f64 {
    let g = field.grid();
    12.0 * field.k_max() / (g.dx() * g.dx())
}

/// `G' = G / alpha` together with its normalization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledOperator {
    pub op: SparseOperator,
    pub alpha: f64,
}

impl ScaledOperator {
    /// Assembles `G`, applies the Gershgorin normalization, and checks `||G'|| <= 1`.
    pub fn from_field(
        field: &CoefficientField,
        rule: InterfaceRule,
        boundary: &BoundaryMode,
    ) -> Result<(SparseOperator, ScaledOperator)> {
        let g = assemble_g(field, field.grid(), rule, boundary)?;
        let scaled = rescale(&g, gershgorin_alpha(field))?;
        scaled.check_normalized()?;
        Ok((g, scaled))
    }

    pub fn size(&self) -> usize {
        self.op.size()
    }

    /// Recovers `G` from `G'`.
    pub fn unscaled(&self) -> SparseOperator {
        self.op.scaled(self.alpha)
    }

    /// Checks the row-sum bound `||G'|| <= 1`.
    pub fn check_normalized(&self) -> Result<()> {
        let bound = self.op.max_abs_row_sum();
        if bound > 1.0 + 1e-12 {
            return Err(Error::Precondition(format!(
                "normalized operator has row-sum bound {bound} > 1"
            )));
        }
        Ok(())
    }
}

pub fn rescale(g: &SparseOperator, alpha: f64) -> Result<ScaledOperator> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return domain(format!("subnormalization must be positive, got {alpha}"));
    }
    let op = if alpha == 1.0 { g.clone() } else { g.scaled(1.0 / alpha) };
    Ok(ScaledOperator { op, alpha })
}

/// Sparse source vector with the given `(cell, amplitude)` support.
pub fn build_source(grid: &GridSpec, sites: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut b = vec![0.0; grid.num_cells()];
    let mut seen = BTreeSet::new();
    for &(a, amp) in sites {
        if a >= b.len() {
            return domain(format!("source site {a} is outside the grid"));
        }
        if !seen.insert(a) {
            return domain(format!("duplicate source site {a}"));
        }
        b[a] = amp;
    }
    Ok(b)
}

/// `count` distinct random sites with alternating +1/-1 amplitudes.
pub fn random_sites(grid: &GridSpec, count: usize, seed: u64, stream: u64) -> Result<Vec<(usize, f64)>> {
    let size = grid.num_cells();
    if count > size {
        return domain(format!("cannot place {count} distinct sites in {size} cells"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok(index::sample(&mut rng, size, count)
        .into_iter()
        .enumerate()
        .map(|(t, a)| (a, if t % 2 == 0 { 1.0 } else { -1.0 }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense_sym_eigenvalues, dot};
    use crate::field::{pitchfork3d, rasterize};
    use rand::Rng;

    fn unit_field(ell: u32, side: f64) -> CoefficientField {
        CoefficientField::constant(GridSpec::new(ell, side).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn constant_field_is_laplacian() {
        let f = unit_field(2, 4.0);
        let g = assemble_g(&f, f.grid(), InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet)
            .unwrap();
        let interior = f.grid().linear_index(1, 1, 1).unwrap();
        assert_eq!(g.get(interior, interior), 6.0);
        for dir in Direction::ALL {
            assert_eq!(g.entry_dir(interior, dir), -1.0);
        }
        assert_eq!(g, laplacian3d(f.grid()));
    }

    #[test]
    fn n2_laplacian_spectrum() {
        let f = unit_field(1, 2.0);
        let g = assemble_g(&f, f.grid(), InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet)
            .unwrap();
        let ev = dense_sym_eigenvalues(&g.to_dense());
        let lmin = 12.0 * (std::f64::consts::PI / 6.0).sin().powi(2);
        assert!((ev[0] - lmin).abs() < 1e-12);
        assert!((ev[0] - 3.0).abs() < 1e-12);
        assert!((ev[7] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn doubled_cell_matches_hand_assembly() {
        let grid = GridSpec::new(1, 2.0).unwrap();
        let mut k = vec![1.0; 8];
        k[0] = 2.0;
        let f = CoefficientField::new(grid, k.clone()).unwrap();
        let g = assemble_g(&f, &grid, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet)
            .unwrap()
            .to_dense();
        // six-flux balance per cell with harmonic faces and mirrored ghosts
        let h = |a: f64, b: f64| 2.0 * a * b / (a + b);
        let mut expect = nalgebra::DMatrix::<f64>::zeros(8, 8);
        for a in 0..8usize {
            let (i, j, kk) = (a >> 2, (a >> 1) & 1, a & 1);
            let mut diag = 0.0;
            for (axis, c) in [(0usize, i), (1, j), (2, kk)] {
                let stride = [4usize, 2, 1][axis];
                // one face is interior, the other is on the boundary
                let b = if c == 0 { a + stride } else { a - stride };
                let t = h(k[a], k[b]);
                expect[(a, b)] = -t;
                diag += t + k[a];
            }
            expect[(a, a)] = diag;
        }
        assert!((g - expect).abs().max() < 1e-15);
    }

    #[test]
    fn laplacian_properties() {
        let g = laplacian3d(&GridSpec::new(1, 1.0).unwrap());
        assert_eq!(g.trace(), 48.0);
        let dense = g.to_dense();
        for a in 0..8 {
            let off: f64 = (0..8).filter(|&b| b != a).map(|b| dense[(a, b)]).sum();
            assert_eq!(off, -3.0);
            assert_eq!(dense[(a, a)], 6.0);
        }
        let grid = GridSpec::new(3, 3.0).unwrap();
        let f = CoefficientField::constant(grid, 1.0).unwrap();
        let gf = assemble_g(&f, &grid, InterfaceRule::Geometric, &BoundaryMode::GhostDirichlet)
            .unwrap();
        let dx2 = grid.dx() * grid.dx();
        assert!((gf.scaled(dx2).to_dense() - laplacian3d(&grid).to_dense()).abs().max() < 1e-13);
    }

    #[test]
    fn gershgorin_examples() {
        assert_eq!(gershgorin_alpha(&unit_field(1, 1.0)), 48.0);
        for ell in 1..4 {
            let n = (1 << ell) as f64;
            assert_eq!(gershgorin_alpha(&unit_field(ell, n)), 12.0);
        }
    }

    #[test]
    fn rescale_examples() {
        let grid = GridSpec::new(2, 4.0).unwrap();
        let f = CoefficientField::constant(grid, 1.0).unwrap();
        let (g, s) = ScaledOperator::from_field(&f, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap();
        assert_eq!(s.alpha, 12.0);
        assert_eq!(s.op.max_abs_entry(), 0.5);
        assert!((s.unscaled().to_dense() - g.to_dense()).abs().max() < 1e-14);

        let small = g.scaled(1.0 / 12.0);
        assert_eq!(rescale(&small, 1.0).unwrap().op, small);
        assert!(rescale(&g, 0.0).is_err());
        assert!(rescale(&g, -1.0).is_err());
    }

    #[test]
    fn identity_rows_mode() {
        let grid = GridSpec::new(2, 1.0).unwrap();
        let f = CoefficientField::constant(grid, 1.0).unwrap();
        let rows: BTreeSet<usize> = [0, 21].into_iter().collect();
        let g = assemble_g(&f, &grid, InterfaceRule::Harmonic, &BoundaryMode::IdentityRows(rows))
            .unwrap();
        let d = g.to_dense();
        for a in [0usize, 21] {
            for b in 0..64 {
                let e = if a == b { 1.0 } else { 0.0 };
                assert_eq!(d[(a, b)], e);
                assert_eq!(d[(b, a)], e);
            }
        }
        assert!(dense_sym_eigenvalues(&d)[0] > 0.0);
    }

    #[test]
    fn row_structure_matches_neighbors() {
        let grid = GridSpec::new(2, 1.0).unwrap();
        let net = pitchfork3d(&grid, 2, 1.0, 0.05).unwrap();
        let f = rasterize(&net, &grid).unwrap();
        let g = assemble_g(&f, &grid, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet)
            .unwrap();
        let d = g.to_dense();
        let n = grid.n();
        for a in 0..grid.num_cells() {
            let mut cols: Vec<usize> = (0..grid.num_cells())
                .filter(|&b| b != a && d[(a, b)] != 0.0)
                .collect();
            cols.sort();
            let mut expect: Vec<usize> = Direction::ALL
                .iter()
                .filter_map(|&dir| match neighbor(a, dir, n) {
                    Neighbor::Cell(b) => Some(b),
                    Neighbor::OutOfDomain => None,
                })
                .collect();
            expect.sort();
            assert_eq!(cols, expect);
            assert!(d[(a, a)] > 0.0);
            assert!(cols.iter().all(|&b| d[(a, b)] < 0.0));
        }
        assert_eq!(d.clone(), d.transpose());
    }

    #[test]
    fn flux_balance_on_random_head() {
        let grid = GridSpec::new(3, 1.7).unwrap();
        let net = pitchfork3d(&grid, 3, 1.2, 0.02).unwrap();
        let f = rasterize(&net, &grid).unwrap();
        let g = assemble_g(&f, &grid, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h: Vec<f64> = (0..grid.num_cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gh = g.apply_vec(&h);
        let n = grid.n();
        let dx2 = grid.dx() * grid.dx();
        for a in 0..grid.num_cells() {
            let (i, j, k) = grid.coords(a).unwrap();
            if [i, j, k].iter().any(|&c| c == 0 || c == n - 1) {
                continue;
            }
            // inflow minus outflow, with the overall sign flipped
            let mut flux = 0.0;
            for dir in Direction::ALL {
                if let Neighbor::Cell(b) = neighbor(a, dir, n) {
                    let t = interface_value(f.k(a), f.k(b), InterfaceRule::Harmonic).unwrap();
                    flux += t * (h[b] - h[a]) / dx2;
                }
            }
            assert!((gh[a] + flux).abs() < 1e-9 * (1.0 + flux.abs()));
        }
        assert!(dot(&h, &gh) > 0.0);
    }

    #[test]
    fn sources() {
        let grid = GridSpec::new(2, 1.0).unwrap();
        let b = build_source(&grid, &[(5, 1.0)]).unwrap();
        assert_eq!(b.iter().sum::<f64>(), 1.0);
        assert_eq!(b[5], 1.0);
        assert!(build_source(&grid, &[(5, 1.0), (5, -1.0)]).is_err());
        assert!(build_source(&grid, &[(64, 1.0)]).is_err());

        let s1 = random_sites(&grid, 20, 7, 0).unwrap();
        let s2 = random_sites(&grid, 20, 7, 0).unwrap();
        assert_eq!(s1, s2);
        let b = build_source(&grid, &s1).unwrap();
        assert_eq!(b.iter().sum::<f64>(), 0.0);
        assert_eq!(b.iter().filter(|v| **v != 0.0).count(), 20);
        assert_ne!(random_sites(&grid, 20, 7, 1).unwrap(), s1);
    }
}
