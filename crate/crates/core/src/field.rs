//! Permeability fields: the 3D pitchfork fracture generator, rasterization,
//! interface averaging, and plain-text field exchange.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceRule {
    Geometric,
    #[default]
    Harmonic,
}

/// Permeability assigned to the face between two cells.
pub fn interface_value(ka: f64, kb: f64, rule: InterfaceRule) -> Result<f64> {
    if !(ka > 0.0 && kb > 0.0) || !ka.is_finite() || !kb.is_finite() {
        return domain(format!("interface permeabilities must be positive, got {ka} and {kb}"));
    }
    if ka == kb {
        return Ok(ka);
    }
    Ok(match rule {
        InterfaceRule::Geometric => (ka * kb).sqrt(),
        InterfaceRule::Harmonic => 2.0 * ka * kb / (ka + kb),
    })
}

/// Inclusive cell-index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl CellBox {
    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        let c = [i, j, k];
        (0..3).all(|ax| self.lo[ax] <= c[ax] && c[ax] <= self.hi[ax])
    }

    pub fn cell_count(&self) -> usize {
        (0..3).map(|ax| self.hi[ax] - self.lo[ax] + 1).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fracture {
    pub scale: u32,
    pub extent: CellBox,
    pub permeability: f64,
    /// Horizontal axis the fracture runs along (0 = x, 1 = y).
    pub axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractureNetwork {
    pub fractures: Vec<Fracture>,
    pub scales: u32,
    pub beta: f64,
    pub k_bg: f64,
}

impl FractureNetwork {
    pub fn empty(k_bg: f64) -> Self {
        FractureNetwork {
            fractures: Vec::new(),
            scales: 0,
            beta: 0.0,
            k_bg,
        }
    }
}

/// Deterministic 3D pitchfork network with `scales` fracture scales.
///
/// The scale-0 trunk runs the full length of the x axis at mid-y and spans the
/// whole z extent. Every fracture of scale `s` spawns three scale `s + 1`
/// tines perpendicular to it (one at each endpoint, pointing in opposite
/// directions, and one crossing its midpoint). A scale-`s` fracture is
/// `n / 2^s` cells long and `n / 2^s` cells deep, centered on its parent's
/// z range, with permeability `(L / 2^s)^beta`.
pub fn pitchfork3d(grid: &GridSpec, scales: u32, beta: f64, k_bg: f64) -> Result<FractureNetwork> {
    let n = grid.n();
    if scales == 0 {
        return domain("a pitchfork network needs at least one scale");
    }
    if scales > grid.ell() {
        return domain(format!(
            "{scales} scales need at least 2^{scales} cells per axis, grid has {n}"
        ));
    }
    if !beta.is_finite() {
        return domain("beta must be finite");
    }
    let perm = |s: u32| (grid.side() / f64::from(1u32 << s)).powf(beta);
    let min_perm = (0..scales).map(perm).fold(f64::INFINITY, f64::min);
    if !(k_bg > 0.0 && k_bg < min_perm) {
        return domain(format!(
            "background permeability {k_bg} must be positive and below the smallest fracture permeability {min_perm}"
        ));
    }

    let last = n - 1;
    let trunk = Fracture {
        scale: 0,
        extent: CellBox {
            lo: [0, n / 2, 0],
            hi: [last, n / 2, last],
        },
        permeability: perm(0),
        axis: 0,
    };
    let mut fractures = vec![trunk];
    let mut parents = vec![0usize];
    for s in 1..scales {
        let len = n >> s;
        let mut next = Vec::with_capacity(parents.len() * 3);
        for &p in &parents {
            let parent = fractures[p].clone();
            let a = parent.axis;
            let b = 1 - a;
            let (a0, a1) = (parent.extent.lo[a], parent.extent.hi[a]);
            let pos = parent.extent.lo[b];
            let zc = (parent.extent.lo[2] + parent.extent.hi[2]).div_ceil(2);
            let z0 = zc.saturating_sub(len / 2);
            let z1 = (z0 + len - 1).min(last);
            let spans = [
                (a0, pos, (pos + len - 1).min(last)),
                (a1, pos.saturating_sub(len - 1), pos),
                (
                    (a0 + a1) / 2,
                    pos.saturating_sub(len / 2),
                    (pos.saturating_sub(len / 2) + len - 1).min(last),
                ),
            ];
            for (at, lo_b, hi_b) in spans {
                let mut lo = [0; 3];
                let mut hi = [0; 3];
                lo[a] = at;
                hi[a] = at;
                lo[b] = lo_b;
                hi[b] = hi_b;
                lo[2] = z0;
                hi[2] = z1;
                next.push(fractures.len());
                fractures.push(Fracture {
                    scale: s,
                    extent: CellBox { lo, hi },
                    permeability: perm(s),
                    axis: b,
                });
            }
        }
        parents = next;
    }
    Ok(FractureNetwork {
        fractures,
        scales,
        beta,
        k_bg,
    })
}

/// Cell permeabilities on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    grid: GridSpec,
    cell_k: Vec<f64>,
}

impl CoefficientField {
    pub fn new(grid: GridSpec, cell_k: Vec<f64>) -> Result<Self> {
        if cell_k.len() != grid.num_cells() {
            return domain(format!(
                "field has {} values but the grid has {} cells",
                cell_k.len(),
                grid.num_cells()
            ));
        }
        if let Some((a, k)) = cell_k
            .iter()
            .enumerate()
            .find(|(_, k)| !(k.is_finite() && **k > 0.0))
        {
            return domain(format!("cell {a} has non-positive permeability {k}"));
        }
        Ok(CoefficientField { grid, cell_k })
    }

    pub fn constant(grid: GridSpec, k: f64) -> Result<Self> {
        CoefficientField::new(grid, vec![k; grid.num_cells()])
    }

    /// Evaluates an arithmetic rule at every cell center.
    pub fn from_fn(grid: GridSpec, mut rule: impl FnMut([f64; 3]) -> f64) -> Result<Self> {
        let values = (0..grid.num_cells())
            .map(|a| grid.center(a).map(&mut rule))
            .collect::<Result<Vec<_>>>()?;
        CoefficientField::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.cell_k
    }

    pub fn k(&self, a: usize) -> f64 {
        self.cell_k[a]
    }

    pub fn k_max(&self) -> f64 {
        self.cell_k.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn k_min(&self) -> f64 {
        self.cell_k.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Number of distinct cell values.
    pub fn distinct_values(&self) -> usize {
        let mut v = self.cell_k.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        CoefficientField::new(self.grid, self.cell_k.iter().map(|k| k * c).collect())
    }
}

/// Paints a network onto a grid, resolving overlaps by the larger permeability.
pub fn rasterize(network: &FractureNetwork, grid: &GridSpec) -> Result<CoefficientField> {
    let n = grid.n();
    let mut cell_k = vec![network.k_bg; grid.num_cells()];
    for f in &network.fractures {
        if f.extent.hi.iter().any(|&h| h >= n) {
            return domain(format!("fracture extent {:?} exceeds an n = {n} grid", f.extent));
        }
        for i in f.extent.lo[0]..=f.extent.hi[0] {
            for j in f.extent.lo[1]..=f.extent.hi[1] {
                for k in f.extent.lo[2]..=f.extent.hi[2] {
                    let a = k + j * n + i * n * n;
                    cell_k[a] = cell_k[a].max(f.permeability);
                }
            }
        }
    }
    CoefficientField::new(*grid, cell_k)
}

/// Header stored on the first line of an exported field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub ell: u32,
    #[serde(rename = "L")]
    pub side: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(rename = "F", default)]
    pub scales: Option<u32>,
    #[serde(default)]
    pub k_bg: Option<f64>,
}

/// Writes a JSON header line followed by one value per line.
pub fn write_field(path: &Path, field: &CoefficientField, header: &FieldHeader) -> Result<()> {
    let mut out = serde_json::to_string(header)?;
    out.push('\n');
    for k in field.values() {
        out.push_str(&format!("{k:.16e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(FieldHeader, CoefficientField)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: FieldHeader = serde_json::from_str(lines.next().unwrap_or("")).map_err(|e| {
        Error::Parse {
            line: 1,
            msg: e.to_string(),
        }
    })?;
    let grid = GridSpec::new(header.ell, header.side)?;
    let mut values = Vec::with_capacity(grid.num_cells());
    for (idx, line) in lines.enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(t.parse::<f64>().map_err(|e| Error::Parse {
            line: idx + 2,
            msg: e.to_string(),
        })?);
    }
    let field = CoefficientField::new(grid, values)?;
    Ok((header, field))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(ell: u32) -> GridSpec {
        GridSpec::new(ell, 1.0).unwrap()
    }

    #[test]
    fn interface_examples() {
        assert_eq!(interface_value(4.0, 1.0, InterfaceRule::Geometric).unwrap(), 2.0);
        assert_eq!(interface_value(1.0, 3.0, InterfaceRule::Harmonic).unwrap(), 1.5);
        for rule in [InterfaceRule::Geometric, InterfaceRule::Harmonic] {
            assert_eq!(interface_value(0.37, 0.37, rule).unwrap(), 0.37);
        }
        assert!(interface_value(0.0, 1.0, InterfaceRule::Harmonic).is_err());
        assert!(interface_value(1.0, -2.0, InterfaceRule::Geometric).is_err());
    }

    #[test]
    fn single_scale_is_one_slab() {
        let g = GridSpec::new(3, 2.0).unwrap();
        let net = pitchfork3d(&g, 1, 1.5, 0.1).unwrap();
        assert_eq!(net.fractures.len(), 1);
        let field = rasterize(&net, &g).unwrap();
        assert_eq!(field.distinct_values(), 2);
        assert_eq!(field.k_max(), 2f64.powf(1.5));
        assert_eq!(field.k_min(), 0.1);
        assert_eq!(net.fractures[0].extent.cell_count(), 64);
    }

    #[test]
    fn two_scales_on_n4() {
        let g = grid(2);
        let net = pitchfork3d(&g, 2, 2.0, 0.01).unwrap();
        assert_eq!(net.fractures.len(), 4);
        let field = rasterize(&net, &g).unwrap();
        assert_eq!(field.distinct_values(), 3);

        // brute-force occupancy from the box list
        for a in 0..g.num_cells() {
            let (i, j, k) = g.coords(a).unwrap();
            let expected = net
                .fractures
                .iter()
                .filter(|f| f.extent.contains(i, j, k))
                .map(|f| f.permeability)
                .fold(net.k_bg, f64::max);
            assert_eq!(field.k(a), expected);
        }
    }

    #[test]
    fn five_scales_on_n32() {
        let g = grid(5);
        let net = pitchfork3d(&g, 5, 1.0, 1e-3).unwrap();
        assert_eq!(net.fractures.len(), 1 + 3 + 9 + 27 + 81);
        let scales: std::collections::BTreeSet<u32> =
            net.fractures.iter().map(|f| f.scale).collect();
        assert_eq!(scales.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        let field = rasterize(&net, &g).unwrap();
        assert_eq!(field.distinct_values(), 6);
    }

    #[test]
    fn too_many_scales() {
        assert!(pitchfork3d(&grid(2), 3, 1.0, 0.01).is_err());
        assert!(pitchfork3d(&grid(2), 0, 1.0, 0.01).is_err());
        // background must stay below the finest fracture
        assert!(pitchfork3d(&grid(2), 2, 1.0, 0.9).is_err());
    }

    #[test]
    fn empty_network_is_uniform() {
        let g = grid(2);
        let field = rasterize(&FractureNetwork::empty(0.3), &g).unwrap();
        assert!(field.values().iter().all(|&k| k == 0.3));
    }

    #[test]
    fn overlap_takes_larger_permeability() {
        let g = grid(2);
        let mk = |scale, lo, hi, permeability| Fracture {
            scale,
            extent: CellBox { lo, hi },
            permeability,
            axis: 0,
        };
        let net = FractureNetwork {
            fractures: vec![
                mk(1, [1, 0, 0], [1, 3, 0], 0.5),
                mk(0, [0, 1, 0], [3, 1, 0], 1.0),
            ],
            scales: 2,
            beta: 1.0,
            k_bg: 0.1,
        };
        let field = rasterize(&net, &g).unwrap();
        let overlap = g.linear_index(1, 1, 0).unwrap();
        assert_eq!(field.k(overlap), 1.0);
        assert_eq!(field.k(g.linear_index(1, 2, 0).unwrap()), 0.5);
        assert_eq!(field.k(g.linear_index(3, 3, 3).unwrap()), 0.1);
    }

    #[test]
    fn rasterize_is_deterministic() {
        let g = grid(4);
        let net = pitchfork3d(&g, 4, 1.0, 1e-2).unwrap();
        assert_eq!(rasterize(&net, &g).unwrap(), rasterize(&net, &g).unwrap());
    }

    #[test]
    fn field_rejects_bad_values() {
        assert!(CoefficientField::new(grid(1), vec![1.0; 7]).is_err());
        let mut v = vec![1.0; 8];
        v[3] = 0.0;
        assert!(CoefficientField::new(grid(1), v).is_err());
    }

    #[test]
    fn field_file_round_trip() {
        let g = grid(2);
        let net = pitchfork3d(&g, 2, 1.3, 0.05).unwrap();
        let field = rasterize(&net, &g).unwrap();
        let header = FieldHeader {
            ell: 2,
            side: 1.0,
            beta: Some(1.3),
            scales: Some(2),
            k_bg: Some(0.05),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        write_field(&path, &field, &header).unwrap();
        let (h2, f2) = read_field(&path).unwrap();
        assert_eq!(h2, header);
        assert_eq!(f2, field);
    }
}
