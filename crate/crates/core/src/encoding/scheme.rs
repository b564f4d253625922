use serde::Serialize;

use crate::census::ValueCensus;
use crate::error::{domain, Result};
use crate::grid::GridSpec;

/// An in-range `(d, m^hi, m^lo)` and the `(row, col)` it addresses.
pub type Occurrence = ((usize, usize, usize), (usize, usize));

/// Labels `(d, m)` for the nonzeros of `G'`.
///
/// For `m^hi = 0` the pair addresses the lower-triangle entry `(m^lo, m^lo - stride)`
/// (the diagonal entry `(m^lo, m^lo)` in section 00); for `m^hi = 1` it addresses
/// the transposed entry.
#[derive(Debug, Clone, Serialize)]
pub struct LabelScheme {
    pub ell: u32,
    #[serde(rename = "N")]
    pub num_cells: usize,
    #[serde(rename = "D_prime")]
    pub d_prime: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub val_bits: u32,
    pub census: ValueCensus,
}

/// Builds the label scheme of a census taken on `grid`.
pub fn build_label_scheme(census: &ValueCensus, grid: &GridSpec) -> Result<LabelScheme> {
    if census.cells_per_axis() != grid.n() {
        return domain(format!(
            "census has {} cells per axis, grid has {}",
            census.cells_per_axis(),
            grid.n()
        ));
    }
    let n = grid.num_cells();
    Ok(LabelScheme {
        ell: grid.ell(),
        num_cells: n,
        d_prime: census.d_prime,
        d: census.d_padded,
        m: 2 * n,
        s: 2 * census.d_padded,
        val_bits: census.val_bits,
        census: census.clone(),
    })
}

impl LabelScheme {
    pub fn n(&self) -> usize {
        1 << self.ell
    }

    pub fn section(&self, d: usize) -> usize {
        self.census.split_label(d).0
    }

    pub fn value(&self, d: usize) -> Option<f64> {
        self.census.value(d)
    }

    pub fn is_padded(&self, d: usize) -> bool {
        self.value(d).is_none()
    }

    /// Labels with no value, in increasing order.
    pub fn padded_labels(&self) -> Vec<usize> {
        (0..self.d).filter(|&d| self.is_padded(d)).collect()
    }

    pub fn stride(&self, section: usize) -> usize {
        match section {
            1 => 1,
            2 => self.n(),
            3 => self.n() * self.n(),
            _ => 0,
        }
    }

    /// Coordinate of cell `a` along the axis of `section`.
    pub fn axis_coord(&self, a: usize, section: usize) -> usize {
        let n = self.n();
        match section {
            1 => a % n,
            2 => (a / n) % n,
            3 => a / (n * n),
            _ => 0,
        }
    }

    /// Value index that `(d^ind = section, m^lo)` must carry to be in range.
    pub fn expected_val(&self, section: usize, m_lo: usize) -> Option<usize> {
        if section != 0 && self.axis_coord(m_lo, section) == 0 {
            return None;
        }
        self.census.lower_val_index(section, m_lo)
    }

    /// Matrix position addressed by `(d, m^hi, m^lo)`, or `None` when out of range.
    pub fn entry(&self, d: usize, m_hi: usize, m_lo: usize) -> Option<(usize, usize)> {
        if d >= self.d || m_hi > 1 || m_lo >= self.num_cells || self.is_padded(d) {
            return None;
        }
        let (section, val) = self.census.split_label(d);
        if section == 0 && m_hi == 1 {
            return None;
        }
        if self.expected_val(section, m_lo) != Some(val) {
            return None;
        }
        let a = m_lo;
        let b = a - self.stride(section);
        Some(if m_hi == 0 { (a, b) } else { (b, a) })
    }

    /// Column of the entry addressed by `(d, m)`.
    pub fn column(&self, d: usize, m_hi: usize, m_lo: usize) -> Option<usize> {
        self.entry(d, m_hi, m_lo).map(|(_, c)| c)
    }

    /// Inverse of [`LabelScheme::entry`].
    pub fn occurrence(&self, row: usize, col: usize) -> Option<(usize, usize, usize)> {
        let (hi, lo, m_hi) = if row >= col { (row, col, 0) } else { (col, row, 1) };
        let section = (0..4).find(|&s| hi - lo == self.stride(s) && (s == 0 || self.axis_coord(hi, s) > 0))?;
        let val = self.expected_val(section, hi)?;
        Some((self.census.label(section, val), m_hi, hi))
    }

    /// Every in-range `(d, m^hi, m^lo)` with its `(row, col)`.
    pub fn occurrences(&self) -> Vec<Occurrence> {
        let mut out = Vec::new();
        for d in 0..self.d {
            for m_hi in 0..2 {
                for m_lo in 0..self.num_cells {
                    if let Some(rc) = self.entry(d, m_hi, m_lo) {
                        out.push(((d, m_hi, m_lo), rc));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::census;
    use crate::field::{pitchfork3d, rasterize, CoefficientField, InterfaceRule};
    use crate::linalg::LinearOperator;
    use crate::operator::BoundaryMode;

    fn scheme_for(field: &CoefficientField) -> (nalgebra::DMatrix<f64>, LabelScheme) {
        let (s, c) = census(field, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap();
        (s.op.to_dense(), build_label_scheme(&c, field.grid()).unwrap())
    }

    #[test]
    fn constant_padding_arithmetic() {
        let grid = GridSpec::new(1, 1.0).unwrap();
        let (_, s) = scheme_for(&CoefficientField::constant(grid, 1.0).unwrap());
        assert_eq!((s.d_prime, s.d, s.m, s.s), (4, 4, 16, 8));
        assert_eq!(s.m * s.d, s.num_cells * s.s);
        assert!(s.padded_labels().is_empty());
    }

    #[test]
    fn occurrences_are_a_bijection_onto_nonzeros() {
        for (ell, f) in [(1u32, 1u32), (2, 1), (2, 2)] {
            let grid = GridSpec::new(ell, 1.0).unwrap();
            let field = rasterize(&pitchfork3d(&grid, f, 1.5, 0.02).unwrap(), &grid).unwrap();
            let (dense, s) = scheme_for(&field);
            let occ = s.occurrences();
            let nnz = dense.iter().filter(|v| **v != 0.0).count();
            assert_eq!(occ.len(), nnz);
            let mut seen = std::collections::BTreeSet::new();
            for ((d, m_hi, m_lo), (r, c)) in occ {
                assert!(seen.insert((r, c)));
                assert!((s.value(d).unwrap() - dense[(r, c)]).abs() < 1e-12);
                assert_eq!(s.occurrence(r, c), Some((d, m_hi, m_lo)));
                if s.section(d) == 0 {
                    assert_eq!((m_lo, r, c), (r, m_lo, m_lo));
                }
            }
        }
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let grid = GridSpec::new(1, 1.0).unwrap();
        let (s, c) = census(
            &CoefficientField::constant(grid, 1.0).unwrap(),
            InterfaceRule::Harmonic,
            &BoundaryMode::GhostDirichlet,
        )
        .unwrap();
        let _ = s;
        assert!(build_label_scheme(&c, &GridSpec::new(2, 1.0).unwrap()).is_err());
    }
}
