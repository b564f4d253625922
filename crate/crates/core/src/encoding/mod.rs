//! Block encoding of the normalized operator `G'` as a gate-level circuit.

mod layout;
mod oracles;
mod scheme;
mod verify;

pub use layout::RegisterLayout;
pub use oracles::{
    assemble_block_encoding, control_dprime, data_rotation, layout_for, o_c_circuit, o_rg_circuit, o_t_circuit,
    rotation_angles, value_lookup,
};
pub use scheme::{build_label_scheme, LabelScheme, Occurrence};
pub use verify::{ancilla_zero_block, fit_block, verify_block, BlockEncodingResult, BLOCK_TOL};

use serde::Serialize;

use crate::census::{census, ValueCensus};
use crate::error::Result;
use crate::field::{CoefficientField, InterfaceRule};
use crate::grid::GridSpec;
use crate::operator::{BoundaryMode, ScaledOperator};

/// Everything built for one instance.
#[derive(Debug, Clone)]
pub struct EncodedInstance {
    pub scaled: ScaledOperator,
    pub scheme: LabelScheme,
    pub layout: RegisterLayout,
    pub circuit: crate::circuit::Circuit,
}

/// Census, label scheme, layout and circuit for `field`.
pub fn encode_field(field: &CoefficientField, rule: InterfaceRule, boundary: &BoundaryMode) -> Result<EncodedInstance> {
    let (scaled, c) = census(field, rule, boundary)?;
    EncodedInstance::from_parts(scaled, &c, field.grid())
}

/// Verification summary written by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct EncodingReport {
    #[serde(rename = "D_prime")]
    pub d_prime: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub expected_subnorm: usize,
    #[serde(flatten)]
    pub result: BlockEncodingResult,
}

impl EncodedInstance {
    /// Builds the circuit for an operator whose census is already known.
    pub fn from_parts(scaled: ScaledOperator, census: &ValueCensus, grid: &GridSpec) -> Result<Self> {
        let scheme = build_label_scheme(census, grid)?;
        let layout = layout_for(&scheme);
        let circuit = assemble_block_encoding(&scheme, &layout)?;
        Ok(EncodedInstance {
            scaled,
            scheme,
            layout,
            circuit,
        })
    }

    pub fn verify(&self) -> Result<EncodingReport> {
        let result = verify_block(&self.circuit, &self.scaled)?;
        Ok(EncodingReport {
            d_prime: self.scheme.d_prime,
            d: self.scheme.d,
            expected_subnorm: self.scheme.s,
            result,
        })
    }
}
