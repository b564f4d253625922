//! Distinct-value census of the normalized operator.
//!
//! Every nonzero of `G'` belongs to one of four sections: the diagonal (00),
//! the `+-1` band (01), the `+-n` band (10) and the `+-n^2` band (11). Values
//! are labelled per section, so equal values in different sections get
//! different labels. A label is `d = section * 2^w + d_val`, where `w` is
//! wide enough for the most populous section.

use serde::Serialize;

use crate::error::Result;
use crate::field::{interface_value, CoefficientField, InterfaceRule};
use crate::grid::{neighbor, Direction, Neighbor};
use crate::operator::{BoundaryMode, ScaledOperator, SparseOperator};

/// Values closer than this are one distinct value. `G'` entries lie in [-1, 1].
pub const VALUE_TOL: f64 = 1e-12;

const NO_LABEL: u32 = u32::MAX;

/// Section index for the diagonal.
pub const SECTION_DIAG: usize = 0;

/// Section tag (1, 2, 3) of a direction's band.
pub fn section_of(dir: Direction) -> usize {
    dir.section()
}

/// Smallest power of two that is at least `x` (and at least 1).
pub fn next_pow2(x: usize) -> usize {
    x.max(1).next_power_of_two()
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueCensus {
    /// Distinct cell permeabilities.
    pub cell_values: usize,
    /// Sorted distinct permeabilities on interior faces.
    pub interface_values: Vec<f64>,
    /// Distinct nonzero values of `G'` regardless of section.
    pub d_init: usize,
    /// Sorted distinct values per section.
    pub section_values: [Vec<f64>; 4],
    /// Distinct values after section relabeling.
    pub d_prime: usize,
    /// Width of the `d_val` field.
    pub val_bits: u32,
    /// Padded label count, `4 * 2^val_bits`.
    pub d_padded: usize,
    #[serde(skip)]
    n: usize,
    /// `lookup[section][a]`: value index of `G'[a, a]` (section 0) or of
    /// `G'[a, a - stride]` (sections 1..3).
    #[serde(skip)]
    lookup: [Vec<u32>; 4],
}

fn cluster(sorted: &[f64]) -> Vec<f64> {
    let mut reps: Vec<f64> = Vec::new();
    for &v in sorted {
        match reps.last() {
            Some(&r) if (v - r).abs() <= VALUE_TOL => {}
            _ => reps.push(v),
        }
    }
    reps
}

fn find(reps: &[f64], v: f64) -> u32 {
    let idx = reps.partition_point(|&r| r < v - VALUE_TOL);
    debug_assert!(idx < reps.len() && (reps[idx] - v).abs() <= VALUE_TOL);
    idx as u32
}

impl ValueCensus {
    /// Census of an already normalized operator.
    pub fn from_operator(op: &SparseOperator, cell_values: usize, interface_values: Vec<f64>) -> Self {
        let n = op.cells_per_axis();
        let size = op.size();

        let mut raw: [Vec<f64>; 4] = Default::default();
        for a in 0..size {
            let d = op.diagonal()[a];
            if d != 0.0 {
                raw[SECTION_DIAG].push(d);
            }
            for dir in Direction::LOWER {
                let v = op.lower_band(dir.axis())[a];
                if v != 0.0 {
                    raw[dir.section()].push(v);
                }
            }
        }

        let mut all: Vec<f64> = raw.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        let d_init = cluster(&all).len();

        let section_values = raw.map(|mut v| {
            v.sort_by(f64::total_cmp);
            cluster(&v)
        });

        let mut lookup: [Vec<u32>; 4] = std::array::from_fn(|_| vec![NO_LABEL; size]);
        for a in 0..size {
            let d = op.diagonal()[a];
            if d != 0.0 {
                lookup[SECTION_DIAG][a] = find(&section_values[SECTION_DIAG], d);
            }
            for dir in Direction::LOWER {
                let v = op.lower_band(dir.axis())[a];
                if v != 0.0 {
                    let s = dir.section();
                    lookup[s][a] = find(&section_values[s], v);
                }
            }
        }

        let d_prime = section_values.iter().map(Vec::len).sum();
        let widest = section_values.iter().map(Vec::len).max().unwrap_or(1);
        let val_bits = next_pow2(widest).trailing_zeros();
        ValueCensus {
            cell_values,
            interface_values,
            d_init,
            section_values,
            d_prime,
            val_bits,
            d_padded: 4 << val_bits,
            n,
            lookup,
        }
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn label(&self, section: usize, val: usize) -> usize {
        (section << self.val_bits) | val
    }

    /// Splits a label into `(section, d_val)`.
    pub fn split_label(&self, d: usize) -> (usize, usize) {
        (d >> self.val_bits, d & ((1 << self.val_bits) - 1))
    }

    /// Value of label `d`, or `None` for a padding label.
    pub fn value(&self, d: usize) -> Option<f64> {
        let (s, v) = self.split_label(d);
        self.section_values.get(s)?.get(v).copied()
    }

    /// Label `d -> G'_d` table over all `D` labels.
    pub fn value_table(&self) -> Vec<Option<f64>> {
        (0..self.d_padded).map(|d| self.value(d)).collect()
    }

    /// Label of the diagonal entry of row `a`.
    pub fn diag_label(&self, a: usize) -> Option<usize> {
        let v = *self.lookup[SECTION_DIAG].get(a)?;
        (v != NO_LABEL).then(|| self.label(SECTION_DIAG, v as usize))
    }

    /// Label of the entry coupling row `a` to its neighbor in `dir`.
    pub fn lookup(&self, a: usize, dir: Direction) -> Option<usize> {
        let row = match neighbor(a, dir, self.n) {
            Neighbor::OutOfDomain => return None,
            Neighbor::Cell(b) => {
                if dir.is_plus() {
                    b
                } else {
                    a
                }
            }
        };
        let s = dir.section();
        let v = self.lookup[s][row];
        (v != NO_LABEL).then(|| self.label(s, v as usize))
    }

    /// Value index stored for `(section, row)`, where the row is the lower
    /// endpoint's larger index for off-diagonal sections.
    pub fn lower_val_index(&self, section: usize, row: usize) -> Option<usize> {
        let v = *self.lookup.get(section)?.get(row)?;
        (v != NO_LABEL).then_some(v as usize)
    }
}

/// Assembles and normalizes `G` for `field`, then takes its census.
pub fn census(
    field: &CoefficientField,
    rule: InterfaceRule,
    boundary: &BoundaryMode,
) -> Result<(ScaledOperator, ValueCensus)> {
    let (_, scaled) = ScaledOperator::from_field(field, rule, boundary)?;
    let c = census_of(field, &scaled, rule)?;
    Ok((scaled, c))
}

pub fn census_of(field: &CoefficientField, scaled: &ScaledOperator, rule: InterfaceRule) -> Result<ValueCensus> {
    let grid = field.grid();
    let n = grid.n();
    let mut faces = Vec::new();
    for a in 0..grid.num_cells() {
        for dir in Direction::LOWER {
            if let Neighbor::Cell(b) = neighbor(a, dir, n) {
                faces.push(interface_value(field.k(a), field.k(b), rule)?);
            }
        }
    }
    faces.sort_by(f64::total_cmp);
    faces.dedup();
    Ok(ValueCensus::from_operator(
        &scaled.op,
        field.distinct_values(),
        faces,
    ))
}
