//! Matrix Market (symmetric, real, coordinate) and CSV vector exchange.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{neighbor, Direction, Neighbor};
use crate::operator::SparseOperator;

const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

/// Serializes the lower triangle with 17 significant digits.
pub fn to_matrix_market(op: &SparseOperator) -> String {
    let triplets = op.lower_triplets();
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(out, "{} {} {}", op.size(), op.size(), triplets.len());
    for (r, c, v) in triplets {
        let _ = writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v);
    }
    out
}

pub fn write_matrix_market(path: &Path, op: &SparseOperator) -> Result<()> {
    fs::write(path, to_matrix_market(op))?;
    Ok(())
}

/// Parses a symmetric coordinate file whose nonzeros lie on the 7-point bands.
pub fn from_matrix_market(text: &str) -> Result<SparseOperator> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (first_no, first) = match lines.next() {
        Some(l) => l,
        None => return parse_err(1, "empty file"),
    };
    let words: Vec<String> = first.split_whitespace().map(str::to_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return parse_err(first_no, "expected a %%MatrixMarket matrix header");
    }
    if words[2] != "coordinate" || words[3] != "real" || words[4] != "symmetric" {
        return parse_err(first_no, "only coordinate real symmetric matrices are supported");
    }

    let mut op: Option<SparseOperator> = None;
    let mut expected = 0usize;
    let mut count = 0usize;
    for (no, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match op.as_mut() {
            None => {
                if fields.len() != 3 {
                    return parse_err(no, "size line must have three integers");
                }
                let nums: Vec<usize> = fields
                    .iter()
                    .map(|f| f.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .or_else(|e| parse_err(no, e.to_string()))?;
                if nums[0] != nums[1] {
                    return parse_err(no, "matrix must be square");
                }
                let n = (nums[0] as f64).cbrt().round() as usize;
                if n * n * n != nums[0] {
                    return parse_err(no, format!("dimension {} is not a perfect cube", nums[0]));
                }
                expected = nums[2];
                op = Some(SparseOperator::zeros(n));
            }
            Some(m) => {
                if fields.len() != 3 {
                    return parse_err(no, "entry line must be `row col value`");
                }
                let r: usize = fields[0].parse().or_else(|e: std::num::ParseIntError| parse_err(no, e.to_string()))?;
                let c: usize = fields[1].parse().or_else(|e: std::num::ParseIntError| parse_err(no, e.to_string()))?;
                let v: f64 = fields[2].parse().or_else(|e: std::num::ParseFloatError| parse_err(no, e.to_string()))?;
                if r == 0 || c == 0 || r > m.size() || c > m.size() {
                    return parse_err(no, format!("index ({r}, {c}) out of range"));
                }
                let (r, c) = (r - 1, c - 1);
                if r < c {
                    return parse_err(no, "symmetric files store the lower triangle only");
                }
                if r == c {
                    m.set_diag(r, v);
                } else {
                    let n = m.cells_per_axis();
                    let dir = Direction::LOWER
                        .into_iter()
                        .find(|&d| neighbor(r, d, n) == Neighbor::Cell(c));
                    match dir {
                        Some(d) => m.set_coupling(r, d, v)?,
                        None => return parse_err(no, format!("entry ({}, {}) is off the 7-point bands", r + 1, c + 1)),
                    }
                }
                count += 1;
            }
        }
    }
    match op {
        None => parse_err(first_no, "missing size line"),
        Some(_) if count != expected => parse_err(
            text.lines().count(),
            format!("expected {expected} entries, found {count}"),
        ),
        Some(m) => Ok(m),
    }
}

pub fn read_matrix_market(path: &Path) -> Result<SparseOperator> {
    from_matrix_market(&fs::read_to_string(path)?)
}

pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(v.len() * 24);
    for x in v {
        let _ = writeln!(out, "{x:.16e}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{pitchfork3d, rasterize, InterfaceRule};
    use crate::grid::GridSpec;
    use crate::operator::{assemble_g, BoundaryMode};

    fn sample() -> SparseOperator {
        let grid = GridSpec::new(2, 1.3).unwrap();
        let f = rasterize(&pitchfork3d(&grid, 2, 1.7, 0.03).unwrap(), &grid).unwrap();
        assemble_g(&f, &grid, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let g = sample();
        let text = to_matrix_market(&g);
        assert!(text.lines().next().unwrap().contains("symmetric"));
        assert_eq!(from_matrix_market(&text).unwrap(), g);
    }

    #[test]
    fn entry_count_is_lower_band_count() {
        let g = sample();
        let text = to_matrix_market(&g);
        let n = 4usize;
        // diagonal + (n-1) n^2 couplings per axis
        let expected = n * n * n + 3 * (n - 1) * n * n;
        let size_line = text.lines().nth(1).unwrap();
        assert_eq!(size_line, format!("64 64 {expected}"));
        assert_eq!(text.lines().count(), expected + 2);
    }

    #[test]
    fn malformed_files_report_lines() {
        let bad_header = "%%MatrixMarket matrix array real general\n1 1\n1\n";
        assert!(matches!(from_matrix_market(bad_header), Err(Error::Parse { line: 1, .. })));

        let bad_value = format!("{HEADER}\n8 8 1\n1 1 abc\n");
        assert!(matches!(from_matrix_market(&bad_value), Err(Error::Parse { line: 3, .. })));

        let off_band = format!("{HEADER}\n8 8 1\n8 1 1.0\n");
        assert!(matches!(from_matrix_market(&off_band), Err(Error::Parse { line: 3, .. })));

        let upper = format!("{HEADER}\n8 8 1\n1 2 1.0\n");
        assert!(matches!(from_matrix_market(&upper), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        let v = vec![1.0 / 3.0, -2.5e-300, 7.0, std::f64::consts::PI];
        write_vector_csv(&path, &v).unwrap();
        assert_eq!(read_vector_csv(&path).unwrap(), v);
    }
}
