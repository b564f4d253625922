use crate::circuit::{modular_add, Circuit, Control, Gate};
use crate::error::{domain, Result};

use super::layout::RegisterLayout;
use super::scheme::LabelScheme;

/// Values of `|G'_d|` above 1 by no more than this are clamped before `arccos`.
const ROTATION_SLACK: f64 = 1e-12;

/// Layout sized for `scheme`.
pub fn layout_for(scheme: &LabelScheme) -> RegisterLayout {
    RegisterLayout::new(scheme.ell, scheme.val_bits)
}

fn check(layout: &RegisterLayout, scheme: &LabelScheme) -> Result<()> {
    if layout.ell != scheme.ell || layout.val_bits != scheme.val_bits {
        return domain("register layout does not match the label scheme");
    }
    Ok(())
}

/// Transposition oracle: flips `m^hi` in the three off-diagonal sections.
pub fn o_t_circuit(layout: &RegisterLayout, scheme: &LabelScheme) -> Result<Circuit> {
    check(layout, scheme)?;
    let mut c = Circuit::new(layout.total_qubits());
    for section in 1..4 {
        c.push(Gate::MultiControlledX {
            controls: layout.section_controls(section),
            target: layout.s_lo(),
        })?;
    }
    Ok(c)
}

/// Column oracle: for `m^hi = 0` subtracts the section's stride from `m^lo`
/// (mod `N`), leaving the column index in the `j` register.
pub fn o_c_circuit(layout: &RegisterLayout, scheme: &LabelScheme) -> Result<Circuit> {
    check(layout, scheme)?;
    let mut c = Circuit::new(layout.total_qubits());
    for section in 1..4 {
        let mut controls = layout.section_controls(section);
        controls.push(Control::off(layout.s_lo()));
        let (register, modulus) = layout.shift_register(section);
        c.push(modular_add(controls, register, -1, modulus))?;
    }
    Ok(c)
}

/// Splits `[start, end)` into aligned power-of-two blocks `(base, log2 size)`.
pub(super) fn aligned_blocks(start: usize, end: usize) -> Vec<(usize, u32)> {
    let mut out = Vec::new();
    let mut v = start;
    while v < end {
        let mut size = if v == 0 { end.next_power_of_two() } else { 1 << v.trailing_zeros() };
        while v + size > end {
            size >>= 1;
        }
        out.push((v, size.trailing_zeros()));
        v += size;
    }
    out
}

/// Flips `del` for every padded label, gated on `in_range = 0`. The padded
/// values of a section form the range `[count, 2^w)`, which is covered by
/// aligned blocks, one multi-controlled X per block.
pub fn control_dprime(layout: &RegisterLayout, scheme: &LabelScheme) -> Result<Circuit> {
    check(layout, scheme)?;
    let mut c = Circuit::new(layout.total_qubits());
    let width = 1usize << scheme.val_bits;
    for section in 0..4 {
        let count = scheme.census.section_values[section].len();
        for (base, free) in aligned_blocks(count, width) {
            let mut controls = layout.section_controls(section);
            for (i, q) in layout.s_else().enumerate().skip(free as usize) {
                controls.push(Control {
                    qubit: q,
                    on: (base >> i) & 1 == 1,
                });
            }
            controls.push(Control::off(layout.in_range()));
            c.push(Gate::MultiControlledX {
                controls,
                target: layout.del(),
            })?;
        }
    }
    Ok(c)
}

/// Census lookup: flips `del` when `in_range = 0` and an unpadded label does
/// not carry the value stored at `(d^ind, m^lo)`.
pub fn value_lookup(layout: &RegisterLayout, scheme: &LabelScheme) -> Result<Circuit> {
    check(layout, scheme)?;
    let mut register = layout.d();
    register.extend(layout.j());
    let d_width = layout.d().len();
    let table: Vec<bool> = (0..1usize << register.len())
        .map(|v| {
            let d = v & ((1 << d_width) - 1);
            let m_lo = v >> d_width;
            if scheme.is_padded(d) {
                return false;
            }
            let (section, val) = scheme.census.split_label(d);
            let stored = if section != 0 && scheme.axis_coord(m_lo, section) == 0 {
                // out of range already, the value is irrelevant
                Some(val)
            } else {
                scheme.census.lower_val_index(section, m_lo)
            };
            stored != Some(val)
        })
        .collect();
    let mut c = Circuit::new(layout.total_qubits());
    c.push(Gate::LookupX {
        controls: vec![Control::off(layout.in_range())],
        register,
        table,
        target: layout.del(),
    })?;
    Ok(c)
}

/// Range oracle: the four structural conditions each set `in_range` and
/// `del`, then padded and mismatched labels set `del`.
pub fn o_rg_circuit(layout: &RegisterLayout, scheme: &LabelScheme) -> Result<Circuit> {
    check(layout, scheme)?;
    let mut conditions = Vec::with_capacity(4);
    let mut diag = layout.section_controls(0);
    diag.push(Control::on(layout.s_lo()));
    conditions.push(diag);
    for (section, field) in [(1, layout.n_a()), (2, layout.n_b()), (3, layout.n_c())] {
        let mut controls = layout.section_controls(section);
        controls.extend(field.map(Control::off));
        conditions.push(controls);
    }

    let mut c = Circuit::new(layout.total_qubits());
    for controls in conditions {
        c.push(Gate::MultiControlledX {
            controls: controls.clone(),
            target: layout.in_range(),
        })?;
        c.push(Gate::MultiControlledX {
            controls,
            target: layout.del(),
        })?;
    }
    c.append(&control_dprime(layout, scheme)?)?;
    c.append(&value_lookup(layout, scheme)?)?;
    Ok(c)
}

/// Rotation angle `2 arccos(G'_d)`, or `pi` (matrix entry 0) for padded labels.
pub fn rotation_angles(scheme: &LabelScheme) -> Result<Vec<f64>> {
    (0..scheme.d)
        .map(|d| match scheme.value(d) {
            None => Ok(std::f64::consts::PI),
            Some(v) if v.abs() > 1.0 + ROTATION_SLACK || !v.is_finite() => {
                domain(format!("|G'_{d}| = {} exceeds 1; the operator is not normalized", v.abs()))
            }
            Some(v) => Ok(2.0 * v.clamp(-1.0, 1.0).acos()),
        })
        .collect()
}

/// Data oracle: `Z` on the data qubit, then `R_X(2 arccos G'_d)` keyed by `d`.
pub fn data_rotation(layout: &RegisterLayout, scheme: &LabelScheme) -> Result<Circuit> {
    check(layout, scheme)?;
    let mut c = Circuit::new(layout.total_qubits());
    c.push(Gate::PauliZ(layout.data()))?;
    c.push(Gate::ControlledRotX {
        register: layout.d(),
        angles: rotation_angles(scheme)?,
        target: layout.data(),
    })?;
    Ok(c)
}

fn hadamards(layout: &RegisterLayout) -> Result<Circuit> {
    let mut c = Circuit::new(layout.total_qubits());
    for q in layout.s() {
        c.push(Gate::Hadamard(q))?;
    }
    Ok(c)
}

/// Full block encoding: `H_s`, the `+1` adders, the range oracle, the data
/// oracle, transposition, the `-1` adders, `H_s`.
pub fn assemble_block_encoding(scheme: &LabelScheme, layout: &RegisterLayout) -> Result<Circuit> {
    check(layout, scheme)?;
    let mut c = hadamards(layout)?;
    c.append(&o_c_circuit(layout, scheme)?.inverse())?;
    c.append(&o_rg_circuit(layout, scheme)?)?;
    c.append(&data_rotation(layout, scheme)?)?;
    c.append(&o_t_circuit(layout, scheme)?)?;
    c.append(&o_c_circuit(layout, scheme)?)?;
    c.append(&hadamards(layout)?)?;
    Ok(c)
}
