//! JSON experiment configuration.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{pitchfork3d, rasterize, CoefficientField, InterfaceRule};
use crate::grid::GridSpec;
use crate::operator::BoundaryMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant,
    Pitchfork,
    /// `k = 1 + a sin(pi x/L) sin(pi y/L) sin(pi z/L)` with `a = smooth_amplitude`.
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    GhostDirichlet,
    IdentityRows(Vec<usize>),
}

impl BoundaryConfig {
    pub fn to_mode(&self) -> BoundaryMode {
        match self {
            BoundaryConfig::GhostDirichlet => BoundaryMode::GhostDirichlet,
            BoundaryConfig::IdentityRows(rows) => BoundaryMode::IdentityRows(rows.iter().copied().collect::<BTreeSet<_>>()),
        }
    }
}

fn default_boundary() -> BoundaryConfig {
    BoundaryConfig::GhostDirichlet
}

fn default_k() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub ell: u32,
    #[serde(rename = "L")]
    pub side: f64,
    pub field: FieldKind,
    #[serde(rename = "F", default)]
    pub scales: Option<u32>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub k_bg: Option<f64>,
    /// Value of the constant field.
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_amplitude")]
    pub smooth_amplitude: f64,
    #[serde(default)]
    pub rule: InterfaceRule,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryConfig,
}

fn missing(name: &str) -> Error {
    Error::Config(format!("missing field `{name}`"))
}

impl InstanceConfig {
    pub fn constant(ell: u32, side: f64) -> Self {
        InstanceConfig {
            ell,
            side,
            field: FieldKind::Constant,
            scales: None,
            beta: None,
            k_bg: None,
            k: 1.0,
            smooth_amplitude: default_amplitude(),
            rule: InterfaceRule::default(),
            boundary: BoundaryConfig::GhostDirichlet,
        }
    }

    pub fn pitchfork(ell: u32, side: f64, scales: u32, beta: f64, k_bg: f64) -> Self {
        InstanceConfig {
            field: FieldKind::Pitchfork,
            scales: Some(scales),
            beta: Some(beta),
            k_bg: Some(k_bg),
            ..Self::constant(ell, side)
        }
    }

    pub fn smooth(ell: u32, side: f64, amplitude: f64) -> Self {
        InstanceConfig {
            field: FieldKind::Smooth,
            smooth_amplitude: amplitude,
            ..Self::constant(ell, side)
        }
    }

    pub fn with_ell(&self, ell: u32) -> Self {
        InstanceConfig { ell, ..self.clone() }
    }

    /// Checks that the fields required by the field kind are present.
    pub fn validate(&self) -> Result<()> {
        if self.field == FieldKind::Pitchfork {
            self.scales.ok_or_else(|| missing("F"))?;
            self.beta.ok_or_else(|| missing("beta"))?;
            self.k_bg.ok_or_else(|| missing("k_bg"))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.ell, self.side)
    }

    pub fn build_field(&self) -> Result<CoefficientField> {
        self.validate()?;
        let grid = self.grid()?;
        match self.field {
            FieldKind::Constant => CoefficientField::constant(grid, self.k),
            FieldKind::Pitchfork => {
                let net = pitchfork3d(
                    &grid,
                    self.scales.ok_or_else(|| missing("F"))?,
                    self.beta.ok_or_else(|| missing("beta"))?,
                    self.k_bg.ok_or_else(|| missing("k_bg"))?,
                )?;
                rasterize(&net, &grid)
            }
            FieldKind::Smooth => {
                let (l, a) = (self.side, self.smooth_amplitude);
                CoefficientField::from_fn(grid, |[x, y, z]| {
                    1.0 + a * (PI * x / l).sin() * (PI * y / l).sin() * (PI * z / l).sin()
                })
            }
        }
    }
}

fn default_tol() -> f64 {
    1e-8
}
fn default_cg_tol() -> f64 {
    1e-10
}
fn default_shots() -> u64 {
    1_000_000
}
fn default_draws() -> usize {
    20
}
fn default_sites() -> usize {
    20
}
fn default_ell_min() -> u32 {
    1
}
fn default_ell_max() -> u32 {
    5
}
fn default_refinements() -> u32 {
    1
}
fn default_pairs() -> usize {
    1000
}
fn default_pair_dim() -> usize {
    64
}
fn default_lap_n() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// Eigensolver relative tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Source sites per draw, capped at `N`.
    #[serde(default = "default_sites")]
    pub sites: usize,
    #[serde(default = "default_ell_min")]
    pub ell_min: u32,
    #[serde(default = "default_ell_max")]
    pub ell_max: u32,
    #[serde(default = "default_refinements")]
    pub refinements: u32,
    /// Base cell of the readout region; the grid center when absent.
    #[serde(default)]
    pub cell: Option<[usize; 3]>,
    #[serde(default = "default_pairs")]
    pub random_pairs: usize,
    #[serde(default = "default_pair_dim")]
    pub pair_dim_max: usize,
    #[serde(default = "default_lap_n")]
    pub laplacian_n_max: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    #[serde(default)]
    pub experiment: ExperimentParams,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceConfig) -> Self {
        ExperimentConfig {
            instance,
            experiment: ExperimentParams::default(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.instance.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_fields_are_named() {
        let err = ExperimentConfig::from_json(r#"{"instance": {"L": 1.0, "field": "constant"}}"#).unwrap_err();
        assert!(err.to_string().contains("`ell`"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"instance": {"ell": 1, "L": 1.0, "field": "pitchfork", "F": 1, "beta": 2.0}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("`k_bg`"), "{err}");
    }

    #[test]
    fn defaults_fill_experiment_section() {
        let c = ExperimentConfig::from_json(r#"{"instance": {"ell": 2, "L": 1.0, "field": "constant"}}"#).unwrap();
        assert_eq!(c.experiment.draws, 20);
        assert_eq!(c.instance.rule, InterfaceRule::Harmonic);
        assert_eq!(c.instance.boundary, BoundaryConfig::GhostDirichlet);
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::new(InstanceConfig::pitchfork(3, 2.0, 2, 1.5, 0.01));
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn smooth_field_is_bounded() {
        let f = InstanceConfig::smooth(2, 1.0, 0.5).build_field().unwrap();
        assert!(f.k_min() >= 1.0 && f.k_max() <= 1.5);
    }
}
