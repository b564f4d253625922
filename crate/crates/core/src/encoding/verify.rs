use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::circuit::{unitarity_error, Circuit};
use crate::error::{domain, Error, Result};
use crate::linalg::LinearOperator;
use crate::operator::ScaledOperator;

/// Largest acceptable block residual.
pub const BLOCK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct BlockEncodingResult {
    #[serde(skip)]
    pub circuit: Circuit,
    #[serde(rename = "N")]
    pub n: usize,
    pub qubits: usize,
    pub gate_counts: BTreeMap<String, usize>,
    pub cost: usize,
    /// Fitted `c` with `block ~ G' / c`.
    pub measured_subnorm: f64,
    /// `max |c block - G'|`.
    pub max_block_error: f64,
    /// Largest imaginary part in the block.
    pub max_imag: f64,
    pub unitarity_error: f64,
    /// `max |block - block^T|`.
    pub hermiticity_error: f64,
}

/// Top-left `n x n` block of `u`, which is the all-ancillas-zero block when
/// the system register occupies the lowest qubits.
pub fn ancilla_zero_block(u: &DMatrix<Complex64>, n: usize) -> DMatrix<Complex64> {
    u.view((0, 0), (n, n)).into_owned()
}

/// Fits `block ~ target / c` and measures the residual.
pub fn fit_block(block: &DMatrix<Complex64>, target: &DMatrix<f64>) -> Result<(f64, f64, (usize, usize))> {
    let num: f64 = block.iter().zip(target.iter()).map(|(b, t)| b.re * t).sum();
    let den: f64 = target.iter().map(|t| t * t).sum();
    if den == 0.0 || num == 0.0 {
        return domain("block or target is zero; no proportionality constant exists");
    }
    let c = den / num;
    let mut worst = (0.0f64, (0, 0));
    for r in 0..target.nrows() {
        for col in 0..target.ncols() {
            let e = (block[(r, col)] * c - Complex64::new(target[(r, col)], 0.0)).norm();
            if e > worst.0 {
                worst = (e, (r, col));
            }
        }
    }
    Ok((c, worst.0, worst.1))
}

/// Realizes `circuit` densely and checks that its ancilla-zero block is
/// proportional to `G'`.
pub fn verify_block(circuit: &Circuit, scaled: &ScaledOperator) -> Result<BlockEncodingResult> {
    let n = scaled.size();
    if n > 1 << circuit.num_qubits() {
        return domain("operator does not fit the circuit");
    }
    let u = circuit.to_unitary()?;
    let block = ancilla_zero_block(&u, n);
    let target = scaled.op.to_dense();
    let (c, max_err, (r, col)) = fit_block(&block, &target)?;
    if max_err.is_nan() || max_err > BLOCK_TOL {
        return Err(Error::BlockMismatch {
            row: r,
            col,
            expected: target[(r, col)],
            actual: block[(r, col)].re * c,
            max_error: max_err,
        });
    }
    let max_imag = block.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let hermiticity_error = (&block - block.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(BlockEncodingResult {
        n,
        qubits: circuit.num_qubits(),
        gate_counts: circuit.gate_counts(),
        cost: circuit.cost(),
        measured_subnorm: c,
        max_block_error: max_err,
        max_imag,
        unitarity_error: unitarity_error(&u),
        hermiticity_error,
        circuit: circuit.clone(),
    })
}
