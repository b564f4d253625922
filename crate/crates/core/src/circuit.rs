//! Gate-level circuit IR with statevector and dense-unitary realization.
//!
//! Qubit `q` is bit `q` of a basis-state index. Registers are listed least
//! significant qubit first.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};

/// Environment variable overriding the dense-unitary qubit limit.
pub const MAX_DENSE_QUBITS_ENV: &str = "QLS_POISSON_MAX_DENSE_QUBITS";
pub const DEFAULT_MAX_DENSE_QUBITS: usize = 12;

/// Qubit limit for [`Circuit::to_unitary`].
pub fn max_dense_qubits() -> usize {
    std::env::var(MAX_DENSE_QUBITS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_DENSE_QUBITS)
}

/// A control on `qubit`, active on `|1>` when `on` and on `|0>` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Control {
    pub qubit: usize,
    pub on: bool,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Control { qubit, on: true }
    }

    pub fn off(qubit: usize) -> Self {
        Control { qubit, on: false }
    }

    #[inline]
    fn holds(&self, index: usize) -> bool {
        ((index >> self.qubit) & 1 == 1) == self.on
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Gate {
    PauliX(usize),
    Hadamard(usize),
    PauliZ(usize),
    MultiControlledX {
        controls: Vec<Control>,
        target: usize,
    },
    /// `R_X(angles[v])` on `target`, where `v` is the value held by `register`.
    ControlledRotX {
        register: Vec<usize>,
        angles: Vec<f64>,
        target: usize,
    },
    /// `v -> (v + addend) mod modulus` on `register` for `v < modulus`;
    /// larger values are left alone.
    ControlledModularAdd {
        controls: Vec<Control>,
        register: Vec<usize>,
        addend: u64,
        modulus: u64,
    },
    /// Flips `target` when the controls hold and `table[v]` is set for the
    /// value `v` held by `register`.
    LookupX {
        controls: Vec<Control>,
        register: Vec<usize>,
        table: Vec<bool>,
        target: usize,
    },
}

#[inline]
fn gather(index: usize, register: &[usize]) -> usize {
    register
        .iter()
        .enumerate()
        .fold(0, |v, (i, &q)| v | (((index >> q) & 1) << i))
}

#[inline]
fn scatter(index: usize, register: &[usize], value: usize) -> usize {
    register.iter().enumerate().fold(index, |acc, (i, &q)| {
        (acc & !(1 << q)) | (((value >> i) & 1) << q)
    })
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::PauliX(_) => "PauliX",
            Gate::Hadamard(_) => "Hadamard",
            Gate::PauliZ(_) => "PauliZ",
            Gate::MultiControlledX { .. } => "MultiControlledX",
            Gate::ControlledRotX { .. } => "ControlledRotX",
            Gate::ControlledModularAdd { .. } => "ControlledModularAdd",
            Gate::LookupX { .. } => "LookupX",
        }
    }

    /// Every qubit the gate touches.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::PauliX(q) | Gate::Hadamard(q) | Gate::PauliZ(q) => vec![*q],
            Gate::MultiControlledX { controls, target } => {
                let mut v: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
                v.push(*target);
                v
            }
            Gate::ControlledRotX { register, target, .. } => {
                let mut v = register.clone();
                v.push(*target);
                v
            }
            Gate::ControlledModularAdd { controls, register, .. } => {
                let mut v: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
                v.extend(register);
                v
            }
            Gate::LookupX {
                controls,
                register,
                target,
                ..
            } => {
                let mut v: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
                v.extend(register);
                v.push(*target);
                v
            }
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let mut qs = self.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= num_qubits) {
            return domain(format!("{}: qubit {q} outside a {num_qubits}-qubit circuit", self.name()));
        }
        qs.sort_unstable();
        if qs.windows(2).any(|w| w[0] == w[1]) {
            return domain(format!("{}: repeated qubit", self.name()));
        }
        match self {
            Gate::ControlledRotX { register, angles, .. } => {
                if angles.len() != 1 << register.len() {
                    return domain("rotation table must have one angle per register value");
                }
                if angles.iter().any(|a| !a.is_finite()) {
                    return domain("rotation angles must be finite");
                }
            }
            Gate::ControlledModularAdd {
                register,
                addend,
                modulus,
                ..
            } => {
                if *modulus == 0 || *modulus > 1u64 << register.len() {
                    return domain(format!("modulus {modulus} does not fit a {}-qubit register", register.len()));
                }
                if addend >= modulus {
                    return domain("addend must be reduced modulo the modulus");
                }
            }
            Gate::LookupX { register, table, .. } if table.len() != 1 << register.len() => {
                return domain("lookup table must have one entry per register value");
            }
            _ => {}
        }
        Ok(())
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::ControlledRotX {
                register,
                angles,
                target,
            } => Gate::ControlledRotX {
                register: register.clone(),
                angles: angles.iter().map(|a| -a).collect(),
                target: *target,
            },
            Gate::ControlledModularAdd {
                controls,
                register,
                addend,
                modulus,
            } => Gate::ControlledModularAdd {
                controls: controls.clone(),
                register: register.clone(),
                addend: (modulus - addend) % modulus,
                modulus: *modulus,
            },
            g => g.clone(),
        }
    }

    /// Whether the gate maps basis states to basis states (up to sign).
    pub fn is_classical(&self) -> bool {
        !matches!(self, Gate::Hadamard(_) | Gate::ControlledRotX { .. })
    }

    /// Image of a basis state under a classical gate, with its sign.
    pub fn apply_basis(&self, index: usize) -> Option<(usize, f64)> {
        match self {
            Gate::PauliX(q) => Some((index ^ (1 << q), 1.0)),
            Gate::PauliZ(q) => Some((index, if (index >> q) & 1 == 1 { -1.0 } else { 1.0 })),
            Gate::MultiControlledX { controls, target } => {
                let fire = controls.iter().all(|c| c.holds(index));
                Some((if fire { index ^ (1 << target) } else { index }, 1.0))
            }
            Gate::ControlledModularAdd {
                controls,
                register,
                addend,
                modulus,
            } => {
                if !controls.iter().all(|c| c.holds(index)) {
                    return Some((index, 1.0));
                }
                let v = gather(index, register) as u64;
                if v >= *modulus {
                    return Some((index, 1.0));
                }
                let w = (v + addend) % modulus;
                Some((scatter(index, register, w as usize), 1.0))
            }
            Gate::LookupX {
                controls,
                register,
                table,
                target,
            } => {
                let fire = controls.iter().all(|c| c.holds(index)) && table[gather(index, register)];
                Some((if fire { index ^ (1 << target) } else { index }, 1.0))
            }
            Gate::Hadamard(_) | Gate::ControlledRotX { .. } => None,
        }
    }

    fn apply(&self, state: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let dim = state.len();
        match self {
            Gate::Hadamard(q) => {
                let bit = 1 << q;
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..dim {
                    if i & bit == 0 {
                        let (a, b) = (state[i], state[i | bit]);
                        state[i] = (a + b) * s;
                        state[i | bit] = (a - b) * s;
                    }
                }
            }
            Gate::ControlledRotX {
                register,
                angles,
                target,
            } => {
                let bit = 1 << target;
                for i in 0..dim {
                    if i & bit == 0 {
                        let half = 0.5 * angles[gather(i, register)];
                        let (c, s) = (half.cos(), half.sin());
                        let (a, b) = (state[i], state[i | bit]);
                        let mis = Complex64::new(0.0, -s);
                        state[i] = a * c + b * mis;
                        state[i | bit] = a * mis + b * c;
                    }
                }
            }
            Gate::PauliZ(q) => {
                let bit = 1 << q;
                for (i, amp) in state.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *amp = -*amp;
                    }
                }
            }
            Gate::PauliX(_) | Gate::MultiControlledX { .. } | Gate::LookupX { .. } => {
                // involutive flips of one target bit
                let target = match self {
                    Gate::PauliX(q) => *q,
                    Gate::MultiControlledX { target, .. } | Gate::LookupX { target, .. } => *target,
                    _ => unreachable!(),
                };
                let bit = 1 << target;
                for i in 0..dim {
                    if i & bit == 0 {
                        let (j, _) = self.apply_basis(i).expect("classical gate");
                        if j != i {
                            state.swap(i, j);
                        }
                    }
                }
            }
            Gate::ControlledModularAdd { .. } => {
                scratch.clear();
                scratch.resize(dim, Complex64::new(0.0, 0.0));
                for (i, amp) in state.iter().enumerate() {
                    let (j, _) = self.apply_basis(i).expect("classical gate");
                    scratch[j] = *amp;
                }
                state.copy_from_slice(scratch);
            }
        }
    }

    /// Cost in elementary operations used for resource audits.
    pub fn cost(&self) -> usize {
        match self {
            Gate::PauliX(_) | Gate::Hadamard(_) | Gate::PauliZ(_) => 1,
            Gate::MultiControlledX { controls, .. } => controls.len().max(1),
            Gate::ControlledModularAdd { controls, register, .. } => register.len() + controls.len(),
            Gate::ControlledRotX { register, angles, .. } => {
                let active = angles.iter().filter(|a| **a != 0.0).count();
                active * register.len().max(1)
            }
            Gate::LookupX { controls, register, .. } => register.len() + controls.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit {
            num_qubits,
            gates: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends `other` after `self`.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.num_qubits > self.num_qubits {
            return domain("appended circuit is wider than the target");
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    pub fn apply_to_state(&self, state: &[Complex64]) -> Result<Vec<Complex64>> {
        if state.len() != 1 << self.num_qubits {
            return domain(format!(
                "state has {} amplitudes, circuit needs {}",
                state.len(),
                1usize << self.num_qubits
            ));
        }
        let mut out = state.to_vec();
        self.apply_in_place(&mut out);
        Ok(out)
    }

    fn apply_in_place(&self, state: &mut [Complex64]) {
        let mut scratch = Vec::new();
        for g in &self.gates {
            g.apply(state, &mut scratch);
        }
    }

    /// State reached from `|index>`.
    pub fn apply_to_basis_state(&self, index: usize) -> Result<Vec<Complex64>> {
        let dim = 1usize << self.num_qubits;
        if index >= dim {
            return domain("basis index out of range");
        }
        let mut state = vec![Complex64::new(0.0, 0.0); dim];
        state[index] = Complex64::new(1.0, 0.0);
        self.apply_in_place(&mut state);
        Ok(state)
    }

    /// Image of `|index>` when every gate is classical.
    pub fn permute_basis(&self, index: usize) -> Result<(usize, f64)> {
        let mut cur = (index, 1.0);
        for g in &self.gates {
            let (j, s) = g
                .apply_basis(cur.0)
                .ok_or_else(|| Error::Domain(format!("{} is not a classical gate", g.name())))?;
            cur = (j, cur.1 * s);
        }
        Ok(cur)
    }

    /// Dense unitary, refused above [`max_dense_qubits`].
    pub fn to_unitary(&self) -> Result<DMatrix<Complex64>> {
        let limit = max_dense_qubits();
        if self.num_qubits > limit {
            return Err(Error::QubitBudget {
                needed: self.num_qubits,
                limit,
            });
        }
        let dim = 1usize << self.num_qubits;
        let cols: Vec<Vec<Complex64>> = (0..dim)
            .into_par_iter()
            .map(|c| self.apply_to_basis_state(c).expect("index in range"))
            .collect();
        Ok(DMatrix::from_fn(dim, dim, |r, c| cols[c][r]))
    }

    pub fn gate_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for g in &self.gates {
            *m.entry(g.name().to_string()).or_insert(0) += 1;
        }
        m
    }

    pub fn cost(&self) -> usize {
        self.gates.iter().map(Gate::cost).sum()
    }

    /// One gate per line.
    pub fn to_text(&self) -> String {
        fn ctl(cs: &[Control]) -> String {
            cs.iter()
                .map(|c| if c.on { c.qubit.to_string() } else { format!("~{}", c.qubit) })
                .collect::<Vec<_>>()
                .join(" ")
        }
        fn reg(r: &[usize]) -> String {
            r.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        }
        let mut out = format!("qubits {}\n", self.num_qubits);
        for g in &self.gates {
            let _ = match g {
                Gate::PauliX(q) => writeln!(out, "X {q}"),
                Gate::Hadamard(q) => writeln!(out, "H {q}"),
                Gate::PauliZ(q) => writeln!(out, "Z {q}"),
                Gate::MultiControlledX { controls, target } => writeln!(out, "MCX {} ; {target}", ctl(controls)),
                Gate::ControlledRotX {
                    register,
                    angles,
                    target,
                } => {
                    let a: Vec<String> = angles.iter().map(f64::to_string).collect();
                    writeln!(out, "ROTX {} ; {target} ; {}", reg(register), a.join(" "))
                }
                Gate::ControlledModularAdd {
                    controls,
                    register,
                    addend,
                    modulus,
                } => writeln!(out, "ADD {} ; {} ; {addend} {modulus}", ctl(controls), reg(register)),
                Gate::LookupX {
                    controls,
                    register,
                    table,
                    target,
                } => {
                    let bits: String = table.iter().map(|b| if *b { '1' } else { '0' }).collect();
                    writeln!(out, "LOOKUP {} ; {} ; {target} ; {bits}", ctl(controls), reg(register))
                }
            };
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let perr = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, head) = lines.next().ok_or_else(|| perr(1, "empty circuit"))?;
        let num_qubits: usize = head
            .strip_prefix("qubits ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| perr(1, "expected `qubits <count>`"))?;
        let mut c = Circuit::new(num_qubits);
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (op, rest) = line.split_once(' ').unwrap_or((line, ""));
            let parts: Vec<&str> = rest.split(';').map(str::trim).collect();
            let uint = |s: &str| s.parse::<usize>().map_err(|_| perr(no, "expected a qubit index"));
            let controls = |s: &str| -> Result<Vec<Control>> {
                s.split_whitespace()
                    .map(|t| match t.strip_prefix('~') {
                        Some(q) => uint(q).map(Control::off),
                        None => uint(t).map(Control::on),
                    })
                    .collect()
            };
            let register = |s: &str| -> Result<Vec<usize>> {
                if s.is_empty() {
                    return Ok(Vec::new());
                }
                s.split(',').map(|t| uint(t.trim())).collect()
            };
            let want = |k: usize| {
                if parts.len() == k {
                    Ok(())
                } else {
                    Err(perr(no, "wrong number of `;` separated fields"))
                }
            };
            let gate = match op {
                "X" => Gate::PauliX(uint(rest.trim())?),
                "H" => Gate::Hadamard(uint(rest.trim())?),
                "Z" => Gate::PauliZ(uint(rest.trim())?),
                "MCX" => {
                    want(2)?;
                    Gate::MultiControlledX {
                        controls: controls(parts[0])?,
                        target: uint(parts[1])?,
                    }
                }
                "ROTX" => {
                    want(3)?;
                    let angles = parts[2]
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|_| perr(no, "bad angle")))
                        .collect::<Result<Vec<_>>>()?;
                    Gate::ControlledRotX {
                        register: register(parts[0])?,
                        angles,
                        target: uint(parts[1])?,
                    }
                }
                "ADD" => {
                    want(3)?;
                    let nums: Vec<u64> = parts[2]
                        .split_whitespace()
                        .map(|t| t.parse::<u64>().map_err(|_| perr(no, "bad addend or modulus")))
                        .collect::<Result<_>>()?;
                    if nums.len() != 2 {
                        return Err(perr(no, "expected `addend modulus`"));
                    }
                    Gate::ControlledModularAdd {
                        controls: controls(parts[0])?,
                        register: register(parts[1])?,
                        addend: nums[0],
                        modulus: nums[1],
                    }
                }
                "LOOKUP" => {
                    want(4)?;
                    let table = parts[3]
                        .chars()
                        .map(|ch| match ch {
                            '0' => Ok(false),
                            '1' => Ok(true),
                            _ => Err(perr(no, "table must be a 0/1 string")),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Gate::LookupX {
                        controls: controls(parts[0])?,
                        register: register(parts[1])?,
                        table,
                        target: uint(parts[2])?,
                    }
                }
                _ => return Err(perr(no, "unknown gate")),
            };
            c.push(gate).map_err(|e| perr(no, &e.to_string()))?;
        }
        Ok(c)
    }
}

/// Builds an addend-reduced modular adder; `addend` may be negative.
pub fn modular_add(controls: Vec<Control>, register: Vec<usize>, addend: i64, modulus: u64) -> Gate {
    Gate::ControlledModularAdd {
        controls,
        register,
        addend: addend.rem_euclid(modulus as i64) as u64,
        modulus,
    }
}

/// Largest entrywise deviation of `u^dagger u` from the identity.
pub fn unitarity_error(u: &DMatrix<Complex64>) -> f64 {
    let p = u.adjoint() * u;
    let mut worst = 0.0f64;
    for r in 0..p.nrows() {
        for c in 0..p.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((p[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}
