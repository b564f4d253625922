//! Cubic grid geometry and index algebra.
//!
//! Cells are linearized row by row: `a = k + j*n + i*n^2`, so `i` (the x axis)
//! is the slowest index and `k` (the z axis) the fastest.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Face directions, in the row order used by the assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    MinusX,
    MinusY,
    MinusZ,
    PlusZ,
    PlusY,
    PlusX,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::MinusX,
        Direction::MinusY,
        Direction::MinusZ,
        Direction::PlusZ,
        Direction::PlusY,
        Direction::PlusX,
    ];

    /// The three directions pointing to lower cell indices.
    pub const LOWER: [Direction; 3] = [Direction::MinusX, Direction::MinusY, Direction::MinusZ];

    /// Axis number: 0 = x (i), 1 = y (j), 2 = z (k).
    pub fn axis(self) -> usize {
        match self {
            Direction::MinusX | Direction::PlusX => 0,
            Direction::MinusY | Direction::PlusY => 1,
            Direction::MinusZ | Direction::PlusZ => 2,
        }
    }

    pub fn is_plus(self) -> bool {
        matches!(self, Direction::PlusX | Direction::PlusY | Direction::PlusZ)
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::MinusX => Direction::PlusX,
            Direction::MinusY => Direction::PlusY,
            Direction::MinusZ => Direction::PlusZ,
            Direction::PlusZ => Direction::MinusZ,
            Direction::PlusY => Direction::MinusY,
            Direction::PlusX => Direction::MinusX,
        }
    }

    /// Magnitude of the linear-index offset along this direction's axis.
    pub fn stride(self, n: usize) -> usize {
        match self.axis() {
            0 => n * n,
            1 => n,
            _ => 1,
        }
    }

    /// Section tag used by the block-encoding label scheme:
    /// 1 for the z band (+-1), 2 for y (+-n), 3 for x (+-n^2).
    pub fn section(self) -> usize {
        3 - self.axis()
    }
}

/// A neighbor slot: either an in-domain cell index or outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Cell(usize),
    OutOfDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    ell: u32,
    side: f64,
}

impl GridSpec {
    pub fn new(ell: u32, side: f64) -> Result<Self> {
        if ell > 20 {
            return domain(format!("refinement level {ell} is too large"));
        }
        if !(side.is_finite() && side > 0.0) {
            return domain(format!("side length must be positive, got {side}"));
        }
        Ok(GridSpec { ell, side })
    }

    /// Builds a grid from a cell count per axis, rejecting non powers of two.
    pub fn from_cells_per_axis(n: usize, side: f64) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return domain(format!("cells per axis must be a power of two, got {n}"));
        }
        GridSpec::new(n.trailing_zeros(), side)
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        1 << self.ell
    }

    /// Total cell count, `n^3`.
    pub fn num_cells(&self) -> usize {
        1 << (3 * self.ell)
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn dx(&self) -> f64 {
        self.side / self.n() as f64
    }

    /// The grid with twice the resolution over the same domain.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            ell: self.ell + 1,
            side: self.side,
        }
    }

    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> Result<usize> {
        linear_index(i, j, k, self.n())
    }

    pub fn coords(&self, a: usize) -> Result<(usize, usize, usize)> {
        grid_coords(a, self.n())
    }

    /// Cell-center coordinates in physical units.
    pub fn center(&self, a: usize) -> Result<[f64; 3]> {
        let (i, j, k) = self.coords(a)?;
        let dx = self.dx();
        Ok([
            (i as f64 + 0.5) * dx,
            (j as f64 + 0.5) * dx,
            (k as f64 + 0.5) * dx,
        ])
    }
}

pub fn linear_index(i: usize, j: usize, k: usize, n: usize) -> Result<usize> {
    if i >= n || j >= n || k >= n {
        return domain(format!("cell ({i}, {j}, {k}) is outside an n = {n} grid"));
    }
    Ok(k + j * n + i * n * n)
}

pub fn grid_coords(a: usize, n: usize) -> Result<(usize, usize, usize)> {
    if a >= n * n * n {
        return domain(format!("cell index {a} is outside an n = {n} grid"));
    }
    Ok((a / (n * n), (a / n) % n, a % n))
}

/// The neighbor of cell `a` in direction `dir`, without wrap-around.
pub fn neighbor(a: usize, dir: Direction, n: usize) -> Neighbor {
    let (i, j, k) = (a / (n * n), (a / n) % n, a % n);
    let coord = [i, j, k][dir.axis()];
    let stride = dir.stride(n);
    if dir.is_plus() {
        if coord + 1 < n {
            Neighbor::Cell(a + stride)
        } else {
            Neighbor::OutOfDomain
        }
    } else if coord > 0 {
        Neighbor::Cell(a - stride)
    } else {
        Neighbor::OutOfDomain
    }
}

/// All six face neighbors of `a`, in [`Direction::ALL`] order.
pub fn neighbors(a: usize, n: usize) -> Result<[(Direction, Neighbor); 6]> {
    if a >= n * n * n {
        return domain(format!("cell index {a} is outside an n = {n} grid"));
    }
    Ok(Direction::ALL.map(|d| (d, neighbor(a, d, n))))
}

/// Indices in the `2n` grid of the eight children of cell `(i, j, k)` at level `ell`,
/// sorted ascending.
pub fn refine_indices(i: usize, j: usize, k: usize, ell: u32) -> Result<[usize; 8]> {
    let n = 1usize << ell;
    if i >= n || j >= n || k >= n {
        return domain(format!("cell ({i}, {j}, {k}) is outside an n = {n} grid"));
    }
    let r = 2 * k + 2 * n * (2 * j + 2 * n * 2 * i);
    let two_n = 2 * n;
    let four_n2 = 4 * n * n;
    Ok([
        r,
        r + 1,
        r + two_n,
        r + two_n + 1,
        r + four_n2,
        r + four_n2 + 1,
        r + four_n2 + two_n,
        r + four_n2 + two_n + 1,
    ])
}

/// Moves every set bit of a `3*ell`-bit cell index one slot up within its
/// axis field, producing the base index of the refined cell block.
///
/// Bit `p` of the z field (`p < ell`) goes to `p + 1`, the y field to `p + 2`,
/// and the x field to `p + 3`.
pub fn refine_bits(r: usize, ell: u32) -> usize {
    let ell = ell as usize;
    let mut out = 0;
    for p in 0..3 * ell {
        if (r >> p) & 1 == 1 {
            let shift = if p < ell {
                1
            } else if p < 2 * ell {
                2
            } else {
                3
            };
            out |= 1 << (p + shift);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_index_examples() {
        assert_eq!(linear_index(1, 1, 1, 2).unwrap(), 7);
        assert_eq!(linear_index(0, 0, 0, 5).unwrap(), 0);
        assert_eq!(linear_index(1, 2, 3, 4).unwrap(), 27);
        assert!(linear_index(2, 0, 0, 2).is_err());
    }

    #[test]
    fn grid_coords_examples() {
        assert_eq!(grid_coords(7, 2).unwrap(), (1, 1, 1));
        assert_eq!(grid_coords(0, 2).unwrap(), (0, 0, 0));
        assert_eq!(grid_coords(27, 4).unwrap(), (1, 2, 3));
        assert!(grid_coords(8, 2).is_err());
    }

    #[test]
    fn round_trip_exhaustive() {
        for n in [1, 2, 4, 8] {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let a = linear_index(i, j, k, n).unwrap();
                        assert_eq!(grid_coords(a, n).unwrap(), (i, j, k));
                    }
                }
            }
        }
    }

    #[test]
    fn corner_neighbors() {
        let nb = neighbors(0, 2).unwrap();
        let mut inside: Vec<usize> = nb
            .iter()
            .filter_map(|(_, c)| match c {
                Neighbor::Cell(b) => Some(*b),
                Neighbor::OutOfDomain => None,
            })
            .collect();
        inside.sort();
        assert_eq!(inside, vec![1, 2, 4]);
    }

    #[test]
    fn interior_neighbors() {
        let nb = neighbors(13, 3).unwrap();
        let cells: Vec<usize> = nb
            .iter()
            .map(|(_, c)| match c {
                Neighbor::Cell(b) => *b,
                Neighbor::OutOfDomain => panic!("interior cell has an outside neighbor"),
            })
            .collect();
        // (-x, -y, -z, +z, +y, +x)
        assert_eq!(cells, vec![4, 10, 12, 14, 16, 22]);
    }

    #[test]
    fn no_wraparound() {
        assert_eq!(neighbor(1, Direction::MinusZ, 2), Neighbor::Cell(0));
        assert_eq!(neighbor(1, Direction::PlusZ, 2), Neighbor::OutOfDomain);
        assert_eq!(neighbor(2, Direction::MinusZ, 2), Neighbor::OutOfDomain);
    }

    #[test]
    fn refine_examples() {
        assert_eq!(
            refine_indices(1, 2, 3, 2).unwrap(),
            [166, 167, 174, 175, 230, 231, 238, 239]
        );
        let n = 4;
        assert_eq!(
            refine_indices(0, 0, 0, 2).unwrap(),
            [
                0,
                1,
                2 * n,
                2 * n + 1,
                4 * n * n,
                4 * n * n + 1,
                4 * n * n + 2 * n,
                4 * n * n + 2 * n + 1
            ]
        );
        assert!(refine_indices(4, 0, 0, 2).is_err());
        assert_eq!(refine_bits(27, 2), 166);
    }

    #[test]
    fn refine_matches_child_enumeration() {
        for ell in 0..=2u32 {
            let n = 1usize << ell;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut children = Vec::new();
                        for a in 0..2 {
                            for b in 0..2 {
                                for c in 0..2 {
                                    children.push(
                                        linear_index(2 * i + a, 2 * j + b, 2 * k + c, 2 * n)
                                            .unwrap(),
                                    );
                                }
                            }
                        }
                        children.sort();
                        assert_eq!(refine_indices(i, j, k, ell).unwrap().to_vec(), children);
                    }
                }
            }
        }
    }

    #[test]
    fn bit_shift_rule_matches_arithmetic() {
        for ell in 0..=3u32 {
            let n = 1usize << ell;
            for r in 0..n * n * n {
                let (i, j, k) = grid_coords(r, n).unwrap();
                let arithmetic = 2 * k + 2 * n * (2 * j + 2 * n * 2 * i);
                assert_eq!(refine_bits(r, ell), arithmetic, "r = {r}, ell = {ell}");
            }
        }
    }

    #[test]
    fn grid_rejects_non_power_of_two() {
        assert!(GridSpec::from_cells_per_axis(3, 1.0).is_err());
        let g = GridSpec::from_cells_per_axis(8, 2.0).unwrap();
        assert_eq!(g.ell(), 3);
        assert_eq!(g.num_cells(), 512);
        assert!((g.dx() * g.n() as f64 - g.side()).abs() < 1e-15);
    }
}
