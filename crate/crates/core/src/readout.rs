//! Region observables under grid refinement and their overlap estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::circuit::{Circuit, Gate};
use crate::error::{domain, Result};
use crate::grid::{linear_index, refine_bits};
use crate::linalg::norm;

/// Uniform superposition over the refined children of one base cell.
#[derive(Debug, Clone, Serialize)]
pub struct RegionObservable {
    pub base_cell: (usize, usize, usize),
    pub base_level: u32,
    pub target_level: u32,
    #[serde(skip)]
    pub prep_circuit: Circuit,
    pub support: Vec<usize>,
    pub amplitude: f64,
}

impl RegionObservable {
    pub fn refinements(&self) -> u32 {
        self.target_level - self.base_level
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

/// Prepares `|phi>` for cell `(i, j, k)` of level `ell`, refined `t` times.
pub fn region_state_prep(i: usize, j: usize, k: usize, ell: u32, t: u32) -> Result<RegionObservable> {
    let n = 1usize << ell;
    let r = linear_index(i, j, k, n)?;
    let mut base = r;
    for s in 0..t {
        base = refine_bits(base, ell + s);
    }
    let level = ell + t;
    let width = 3 * level as usize;
    let mut circuit = Circuit::new(width);
    for q in 0..width {
        if (base >> q) & 1 == 1 {
            circuit.push(Gate::PauliX(q))?;
        }
    }
    let mut free = Vec::with_capacity(3 * t as usize);
    for field in 0..3usize {
        for b in 0..t as usize {
            free.push(field * level as usize + b);
        }
    }
    for &q in &free {
        circuit.push(Gate::Hadamard(q))?;
    }
    let mut support: Vec<usize> = (0..1usize << free.len())
        .map(|m| {
            free.iter()
                .enumerate()
                .fold(base, |acc, (bit, &q)| acc | (((m >> bit) & 1) << q))
        })
        .collect();
    support.sort_unstable();
    Ok(RegionObservable {
        base_cell: (i, j, k),
        base_level: ell,
        target_level: level,
        prep_circuit: circuit,
        amplitude: 8f64.powf(-(t as f64) / 2.0),
        support,
    })
}

/// `<phi|x>` for a real `x` on the target level.
pub fn exact_overlap(obs: &RegionObservable, x: &[f64]) -> Result<f64> {
    let dim = 1usize << (3 * obs.target_level);
    if x.len() != dim {
        return domain(format!("vector has {} entries, level {} needs {dim}", x.len(), obs.target_level));
    }
    Ok(obs.amplitude * obs.support.iter().map(|&a| x[a]).sum::<f64>())
}

/// Mean of `x` over the support, which is comparable across levels.
pub fn region_average(obs: &RegionObservable, x: &[f64]) -> Result<f64> {
    Ok(exact_overlap(obs, x)? * obs.amplitude)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HadamardEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub shots: u64,
    /// Exact `Re <phi|x>` for the normalized state.
    pub exact: f64,
}

/// Simulated Hadamard test for `Re <phi|x>` with `x` normalized internally.
pub fn hadamard_test_estimate(obs: &RegionObservable, x_state: &[f64], shots: u64, seed: u64) -> Result<HadamardEstimate> {
    if shots == 0 {
        return domain("shots must be positive");
    }
    let nx = norm(x_state);
    if nx == 0.0 {
        return domain("state vector is zero");
    }
    let exact = exact_overlap(obs, x_state)? / nx;
    let p0 = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeros = Binomial::new(shots, p0)
        .map_err(|e| crate::error::Error::Domain(e.to_string()))?
        .sample(&mut rng);
    let mean = (2.0 * zeros as f64 - shots as f64) / shots as f64;
    let stderr = if shots > 1 {
        let var = (1.0 - mean * mean) * shots as f64 / (shots as f64 - 1.0);
        (var.max(0.0) / shots as f64).sqrt()
    } else {
        0.0
    };
    Ok(HadamardEstimate {
        estimate: mean,
        stderr,
        shots,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::refine_indices;

    #[test]
    fn base_case_is_a_basis_state() {
        let obs = region_state_prep(1, 1, 1, 1, 0).unwrap();
        assert_eq!(obs.support, vec![7]);
        assert_eq!(obs.prep_circuit.num_qubits(), 3);
        let s = obs.prep_circuit.apply_to_basis_state(0).unwrap();
        assert_eq!(s[7].re, 1.0);
    }

    #[test]
    fn one_doubling_matches_children() {
        let obs = region_state_prep(1, 2, 3, 2, 1).unwrap();
        assert_eq!(obs.support, vec![166, 167, 174, 175, 230, 231, 238, 239]);
        assert_eq!(obs.support, refine_indices(1, 2, 3, 2).unwrap().to_vec());
        let s = obs.prep_circuit.apply_to_basis_state(0).unwrap();
        for (a, amp) in s.iter().enumerate() {
            let want = if obs.support.contains(&a) { 1.0 / 8f64.sqrt() } else { 0.0 };
            assert!((amp.re - want).abs() < 1e-15 && amp.im == 0.0);
        }
    }

    #[test]
    fn doubling_adds_three_qubits_and_three_hadamards() {
        let a = region_state_prep(1, 0, 1, 1, 0).unwrap();
        let b = region_state_prep(1, 0, 1, 1, 1).unwrap();
        let h = |o: &RegionObservable| o.prep_circuit.gate_counts().get("Hadamard").copied().unwrap_or(0);
        assert_eq!(b.prep_circuit.num_qubits() - a.prep_circuit.num_qubits(), 3);
        assert_eq!(h(&b) - h(&a), 3);
    }

    #[test]
    fn overlap_examples() {
        let obs = region_state_prep(0, 1, 0, 1, 0).unwrap();
        let mut x = vec![0.0; 8];
        x[obs.support[0]] = 1.0;
        assert_eq!(exact_overlap(&obs, &x).unwrap(), 1.0);

        let obs = region_state_prep(0, 1, 0, 1, 1).unwrap();
        let mut x = vec![0.0; 64];
        for &a in &obs.support {
            x[a] = 2.5;
        }
        assert!((exact_overlap(&obs, &x).unwrap() - 2.5 * 8f64.sqrt()).abs() < 1e-14);
        assert!((region_average(&obs, &x).unwrap() - 2.5).abs() < 1e-14);
        assert!(exact_overlap(&obs, &[0.0; 8]).is_err());
    }

    #[test]
    fn hadamard_test_extremes() {
        let obs = region_state_prep(0, 0, 0, 1, 0).unwrap();
        let mut x = vec![0.0; 8];
        x[0] = 3.0;
        let e = hadamard_test_estimate(&obs, &x, 1000, 1).unwrap();
        assert_eq!((e.estimate, e.stderr), (1.0, 0.0));
        x[0] = 0.0;
        x[5] = 1.0;
        let shots = 10_000;
        let e = hadamard_test_estimate(&obs, &x, shots, 2).unwrap();
        assert!(e.estimate.abs() < 4.0 / (shots as f64).sqrt());
        assert_eq!(
            hadamard_test_estimate(&obs, &x, shots, 2).unwrap().estimate,
            e.estimate
        );
    }
}
