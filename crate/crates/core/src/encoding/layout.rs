use std::ops::Range;

use serde::Serialize;

use crate::circuit::Control;

/// Qubit assignment of the block-encoding circuit, least significant first:
/// the column register `j = N_c || N_b || N_a` (each `ell` qubits), then the
/// sparsity register `s = d^ind || d^val || m^hi`, then the `in_range`,
/// `del` and `data` ancillas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegisterLayout {
    pub ell: u32,
    /// Width of `s_else`, which holds `d^val`.
    pub val_bits: u32,
}

impl RegisterLayout {
    pub fn new(ell: u32, val_bits: u32) -> Self {
        RegisterLayout { ell, val_bits }
    }

    fn l(&self) -> usize {
        self.ell as usize
    }

    /// Lowest `ell` bits of `j` (stride 1 axis).
    pub fn n_a(&self) -> Range<usize> {
        0..self.l()
    }

    pub fn n_b(&self) -> Range<usize> {
        self.l()..2 * self.l()
    }

    /// Highest `ell` bits of `j` (stride `n^2` axis).
    pub fn n_c(&self) -> Range<usize> {
        2 * self.l()..3 * self.l()
    }

    pub fn j(&self) -> Range<usize> {
        0..3 * self.l()
    }

    pub fn s_lo(&self) -> usize {
        3 * self.l()
    }

    pub fn s_else(&self) -> Range<usize> {
        let start = self.s_lo() + 1;
        start..start + self.val_bits as usize
    }

    pub fn s_mid(&self) -> usize {
        self.s_else().end
    }

    pub fn s_hi(&self) -> usize {
        self.s_mid() + 1
    }

    pub fn in_range(&self) -> usize {
        self.s_hi() + 1
    }

    pub fn del(&self) -> usize {
        self.in_range() + 1
    }

    pub fn data(&self) -> usize {
        self.del() + 1
    }

    pub fn total_qubits(&self) -> usize {
        self.data() + 1
    }

    /// `s` register, holding `2 d + m^hi`.
    pub fn s(&self) -> Vec<usize> {
        (self.s_lo()..=self.s_hi()).collect()
    }

    /// `d` register (`s_else`, `s_mid`, `s_hi`), holding `d^ind * 2^w + d^val`.
    pub fn d(&self) -> Vec<usize> {
        (self.s_lo() + 1..=self.s_hi()).collect()
    }

    pub fn sparsity_width(&self) -> usize {
        self.val_bits as usize + 3
    }

    /// Number of ancilla qubits above the column register.
    pub fn ancilla_count(&self) -> usize {
        self.total_qubits() - 3 * self.l()
    }

    /// Controls selecting `d^ind = section`.
    pub fn section_controls(&self, section: usize) -> Vec<Control> {
        vec![
            Control {
                qubit: self.s_mid(),
                on: section & 1 == 1,
            },
            Control {
                qubit: self.s_hi(),
                on: section & 2 == 2,
            },
        ]
    }

    /// Column-register qubits touched by the shift of `section` and the shift's modulus.
    pub fn shift_register(&self, section: usize) -> (Vec<usize>, u64) {
        let n = 1u64 << self.ell;
        match section {
            1 => (self.j().collect(), n * n * n),
            2 => ((self.n_b().start..self.n_c().end).collect(), n * n),
            3 => (self.n_c().collect(), n),
            _ => (Vec::new(), 1),
        }
    }

    /// Composes a basis index from register values.
    pub fn basis_index(&self, j: usize, m_hi: usize, d: usize) -> usize {
        j | (m_hi << self.s_lo()) | (d << (self.s_lo() + 1))
    }

    pub fn j_value(&self, index: usize) -> usize {
        index & ((1 << (3 * self.l())) - 1)
    }

    pub fn m_hi_value(&self, index: usize) -> usize {
        (index >> self.s_lo()) & 1
    }

    pub fn d_value(&self, index: usize) -> usize {
        (index >> (self.s_lo() + 1)) & ((1 << (self.val_bits + 2)) - 1)
    }

    pub fn bit(&self, index: usize, qubit: usize) -> bool {
        (index >> qubit) & 1 == 1
    }
}
