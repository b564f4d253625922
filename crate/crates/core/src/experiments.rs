//! Figure-level experiments shared by the command line and the test suites.

use std::ops::RangeInclusive;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::census::{census_of, ValueCensus};
use crate::config::{FieldKind, InstanceConfig};
use crate::encoding::{assemble_block_encoding, build_label_scheme, layout_for};
use crate::error::{Error, Result};
use crate::fast_inverse::{dense_laplacian, laplacian_eigs_2d, FastInverseLaplacian};
use crate::field::CoefficientField;
use crate::linalg::{dense_spectral_norm, linear_fit, LinearOperator};
use crate::operator::{build_source, random_sites, ScaledOperator, SparseOperator};
use crate::readout::{exact_overlap, hadamard_test_estimate, region_average, region_state_prep};
use crate::solver::{cg_solve, epsilon_metric, Preconditioner, DEFAULT_ZERO_TOL};
use crate::spectral::{condition_numbers, poincare_check, precond_lower_bound, random_spd, PoincareTable, PrecondBoundReport};

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Assembled instance and its census.
#[derive(Debug, Clone)]
pub struct Instance {
    pub config: InstanceConfig,
    pub field: CoefficientField,
    pub g: SparseOperator,
    pub scaled: ScaledOperator,
    pub census: ValueCensus,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub ell: u32,
    #[serde(rename = "L")]
    pub side: f64,
    #[serde(rename = "F")]
    pub scales: Option<u32>,
    pub alpha: f64,
    pub k_max: f64,
    pub k_min: f64,
    pub nnz: usize,
    pub cell_values: usize,
    pub interface_values: usize,
    #[serde(rename = "D_init")]
    pub d_init: usize,
    #[serde(rename = "D_prime")]
    pub d_prime: usize,
    #[serde(rename = "D")]
    pub d: usize,
}

impl Instance {
    pub fn build(config: &InstanceConfig) -> Result<Self> {
        let field = config.build_field()?;
        let (g, scaled) = ScaledOperator::from_field(&field, config.rule, &config.boundary.to_mode())?;
        let census = census_of(&field, &scaled, config.rule)?;
        Ok(Instance {
            config: config.clone(),
            field,
            g,
            scaled,
            census,
        })
    }

    pub fn summary(&self) -> InstanceSummary {
        InstanceSummary {
            n: self.g.size(),
            ell: self.config.ell,
            side: self.config.side,
            scales: if self.config.field == FieldKind::Pitchfork {
                self.config.scales
            } else {
                None
            },
            alpha: self.scaled.alpha,
            k_max: self.field.k_max(),
            k_min: self.field.k_min(),
            nnz: self.g.nnz(),
            cell_values: self.census.cell_values,
            interface_values: self.census.interface_values.len(),
            d_init: self.census.d_init,
            d_prime: self.census.d_prime,
            d: self.census.d_padded,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub kappa_eff: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaSweep {
    pub rows: Vec<KappaRow>,
    /// Least-squares slope of `log kappa_eff` against `log N`.
    pub exponent: f64,
}

/// Fit slope of `log y` against `log x`, refusing fewer than three points.
pub fn loglog_exponent(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 3 {
        return Err(Error::Precondition(format!("a scaling fit needs at least 3 points, got {}", x.len())));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly).0)
}

/// Condition numbers over `ells`; failed eigensolves are flagged and left out of the fit.
pub fn kappa_sweep(base: &InstanceConfig, ells: RangeInclusive<u32>, tol: f64) -> Result<KappaSweep> {
    let ells: Vec<u32> = ells.collect();
    let rows: Vec<KappaRow> = ells
        .par_iter()
        .map(|&ell| {
            let cfg = base.with_ell(ell);
            let n = 1usize << (3 * ell);
            let report = Instance::build(&cfg).and_then(|inst| condition_numbers(&inst.scaled, tol));
            match report {
                Ok(r) => KappaRow {
                    n,
                    lambda_min: r.lambda_min,
                    lambda_max: r.lambda_max,
                    k: r.k,
                    kappa_eff: r.kappa_eff,
                    ok: true,
                },
                Err(_) => KappaRow {
                    n,
                    lambda_min: f64::NAN,
                    lambda_max: f64::NAN,
                    k: f64::NAN,
                    kappa_eff: f64::NAN,
                    ok: false,
                },
            }
        })
        .collect();
    let good: Vec<&KappaRow> = rows.iter().filter(|r| r.ok).collect();
    let x: Vec<f64> = good.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = good.iter().map(|r| r.kappa_eff).collect();
    let exponent = loglog_exponent(&x, &y)?;
    Ok(KappaSweep { rows, exponent })
}

/// `lambda_min(G)` under mesh refinement of one domain.
pub fn lambda_min_plateau(base: &InstanceConfig, ells: RangeInclusive<u32>, tol: f64) -> Result<PoincareTable> {
    let instances = ells
        .map(|ell| {
            let inst = Instance::build(&base.with_ell(ell))?;
            Ok((inst.scaled, inst.field.k_min()))
        })
        .collect::<Result<Vec<_>>>()?;
    poincare_check(&instances, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub draw: usize,
    pub epsilon: f64,
    pub log_inv_epsilon: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub draws: usize,
    pub failed: usize,
    pub mean_log_inv_epsilon: f64,
    pub std_log_inv_epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsSweep {
    pub rows: Vec<EpsRow>,
    pub summary: Vec<EpsSummary>,
    /// Slope of `log(mean log(1/eps))` against `log N`.
    pub trend_exponent: f64,
    /// Whether the mean of `log(1/eps)` is nondecreasing in `N`.
    pub monotone: bool,
}

impl EpsSweep {
    /// `log(1/eps)` grows slower than `c N^power`.
    pub fn sublinear_in(&self, power: f64) -> bool {
        self.trend_exponent < power
    }
}

/// Smallest-entry metric over random point-source right-hand sides.
/// Draw `d` at level `ell` uses stream `d` of the seeded generator.
pub fn eps_sweep(
    base: &InstanceConfig,
    ells: RangeInclusive<u32>,
    draws: usize,
    sites: usize,
    seed: u64,
    cg_tol: f64,
) -> Result<EpsSweep> {
    let instances = ells
        .map(|ell| Instance::build(&base.with_ell(ell)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..draws).map(move |d| (i, d)))
        .collect();
    let results: Vec<Option<EpsRow>> = jobs
        .par_iter()
        .map(|&(i, draw)| {
            let inst = &instances[i];
            let grid = inst.field.grid();
            let n = grid.num_cells();
            let row = (|| -> Result<EpsRow> {
                let s = random_sites(grid, sites.min(n), seed, draw as u64)?;
                let b = build_source(grid, &s)?;
                let sol = cg_solve(&inst.g, &b, cg_tol, 20 * n + 1000, Preconditioner::Jacobi)?;
                let eps = epsilon_metric(&sol.x, DEFAULT_ZERO_TOL)?;
                Ok(EpsRow {
                    n,
                    draw,
                    epsilon: eps,
                    log_inv_epsilon: -eps.ln(),
                    iterations: sol.iterations,
                })
            })();
            row.ok()
        })
        .collect();

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let chunk = &results[i * draws..(i + 1) * draws];
        let ok: Vec<&EpsRow> = chunk.iter().flatten().collect();
        let vals: Vec<f64> = ok.iter().map(|r| r.log_inv_epsilon).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
        } else {
            0.0
        };
        summary.push(EpsSummary {
            n: inst.g.size(),
            draws,
            failed: draws - ok.len(),
            mean_log_inv_epsilon: mean,
            std_log_inv_epsilon: var.sqrt(),
        });
        rows.extend(ok.into_iter().cloned());
    }
    let usable: Vec<&EpsSummary> = summary.iter().filter(|s| s.failed < s.draws).collect();
    let x: Vec<f64> = usable.iter().map(|s| s.n as f64).collect();
    let y: Vec<f64> = usable.iter().map(|s| s.mean_log_inv_epsilon).collect();
    // NaN when fewer than three levels have a successful solve
    let trend_exponent = if x.len() >= 3 { loglog_exponent(&x, &y)? } else { f64::NAN };
    let monotone = y.windows(2).all(|w| w[1] >= w[0]);
    Ok(EpsSweep {
        rows,
        summary,
        trend_exponent,
        monotone,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomPairSummary {
    pub pairs: usize,
    /// `min slack / K_A` over the pairs.
    pub min_relative_slack: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecondCheck {
    /// `A = G`, `M = Delta^{-1}` with `alpha_A = ||G||`, `alpha_M = 1`.
    pub laplacian_pair: PrecondBoundReport,
    /// `M = A^{-1}` with tight subnormalizations.
    pub equality_case: PrecondBoundReport,
    pub identity_case: PrecondBoundReport,
    pub random: RandomPairSummary,
    pub rel_tol: f64,
    pub all_hold: bool,
}

/// Relative slack tolerance for the lower bound.
pub const PRECOND_REL_TOL: f64 = 1e-10;

/// Random SPD pair with subnormalizations at or above the norms.
fn random_pair(rng: &mut ChaCha8Rng, dim_max: usize) -> Result<PrecondBoundReport> {
    let dim = rng.random_range(1..=dim_max.max(1));
    let ca = 10f64.powf(rng.random_range(0.0..4.0));
    let cm = 10f64.powf(rng.random_range(0.0..4.0));
    let a = random_spd(dim, ca, rng);
    let m = random_spd(dim, cm, rng);
    let alpha_a = dense_spectral_norm(&a) * (1.0 + rng.random_range(0.0..1.0f64).powi(3));
    let alpha_m = dense_spectral_norm(&m) * (1.0 + rng.random_range(0.0..1.0f64).powi(3));
    precond_lower_bound(&a, &m, alpha_a, alpha_m)
}

/// Preconditioning lower bound on `(G, Delta^{-1})`, the equality and
/// identity cases, and `pairs` random SPD pairs of dimension at most `dim_max`.
pub fn precond_check(instance: &InstanceConfig, pairs: usize, dim_max: usize, seed: u64) -> Result<PrecondCheck> {
    let inst = Instance::build(instance)?;
    let g = inst.g.to_dense();
    let m = FastInverseLaplacian::new_3d(inst.g.cells_per_axis())?.to_dense();
    let laplacian_pair = precond_lower_bound(&g, &m, dense_spectral_norm(&g), 1.0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_spd(16, 100.0, &mut rng);
    let ainv = a.clone().try_inverse().ok_or_else(|| Error::Domain("singular test matrix".into()))?;
    let equality_case = precond_lower_bound(&a, &ainv, dense_spectral_norm(&a), dense_spectral_norm(&ainv))?;
    let eye = DMatrix::identity(8, 8);
    let identity_case = precond_lower_bound(&eye, &eye, 1.0, 1.0)?;

    let reports = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(p as u64 + 1);
            random_pair(&mut r, dim_max)
        })
        .collect::<Result<Vec<_>>>()?;
    let min_relative_slack = reports.iter().map(|r| r.slack / r.k_a).fold(f64::INFINITY, f64::min);
    let violations = reports.iter().filter(|r| !r.holds(PRECOND_REL_TOL)).count();

    let all_hold = violations == 0
        && laplacian_pair.holds(PRECOND_REL_TOL)
        && equality_case.slack.abs() <= PRECOND_REL_TOL * equality_case.k_a.max(1.0)
        && identity_case.holds(PRECOND_REL_TOL);
    Ok(PrecondCheck {
        laplacian_pair,
        equality_case,
        identity_case,
        random: RandomPairSummary {
            pairs,
            min_relative_slack,
            violations,
        },
        rel_tol: PRECOND_REL_TOL,
        all_hold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReadoutLevel {
    pub level: u32,
    pub support_size: usize,
    pub qubits: usize,
    pub hadamards: usize,
    pub exact: f64,
    pub region_average: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `<phi|x>` for the normalized solution.
    pub normalized_exact: f64,
    pub shots: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReadoutDemo {
    pub cell: [usize; 3],
    pub base_level: u32,
    pub levels: Vec<ReadoutLevel>,
    /// `|avg_fine - avg_base| / |avg_fine|`.
    pub relative_difference: f64,
    /// Largest `|estimate - normalized_exact|` over the levels.
    pub hadamard_error: f64,
}

/// Solves `G x = 1` on the base level and after `refinements` doublings and
/// compares the region averages over one base cell.
pub fn readout_demo(
    instance: &InstanceConfig,
    refinements: u32,
    cell: Option<[usize; 3]>,
    shots: u64,
    seed: u64,
    cg_tol: f64,
) -> Result<ReadoutDemo> {
    let n = 1usize << instance.ell;
    let cell = cell.unwrap_or([n / 2, n / 2, n / 2]);
    let mut levels = Vec::new();
    for t in [0, refinements] {
        let cfg = instance.with_ell(instance.ell + t);
        let inst = Instance::build(&cfg)?;
        let size = inst.g.size();
        let b = vec![1.0; size];
        let sol = cg_solve(&inst.g, &b, cg_tol, 20 * size + 1000, Preconditioner::Jacobi)?;
        let obs = region_state_prep(cell[0], cell[1], cell[2], instance.ell, t)?;
        let h = hadamard_test_estimate(&obs, &sol.x, shots, seed.wrapping_add(t as u64))?;
        levels.push(ReadoutLevel {
            level: obs.target_level,
            support_size: obs.support_size(),
            qubits: obs.prep_circuit.num_qubits(),
            hadamards: obs.prep_circuit.gate_counts().get("Hadamard").copied().unwrap_or(0),
            exact: exact_overlap(&obs, &sol.x)?,
            region_average: region_average(&obs, &sol.x)?,
            estimate: h.estimate,
            stderr: h.stderr,
            normalized_exact: h.exact,
            shots,
        });
    }
    let (base, fine) = (&levels[0], &levels[1]);
    let relative_difference = (fine.region_average - base.region_average).abs() / fine.region_average.abs();
    let hadamard_error = levels
        .iter()
        .map(|l| (l.estimate - l.normalized_exact).abs())
        .fold(0.0, f64::max);
    Ok(ReadoutDemo {
        cell,
        base_level: instance.ell,
        levels,
        relative_difference,
        hadamard_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplacianRow {
    pub n: usize,
    /// `max_i ||fast e_i - dense e_i|| / ||dense e_i||` plus random vectors.
    pub max_relative_error: f64,
    pub inverse_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplacianCheck {
    pub rows: Vec<LaplacianRow>,
    pub max_relative_error: f64,
    /// Rescaled eigenvalue at `n = 2`, `(kx, ky) = (1, 1)`.
    pub lambda_11_n2: f64,
}

/// Fast 2D inverse Laplacian against dense inversion for `n = 1..=n_max`.
pub fn laplacian_inverse_check(n_max: usize, seed: u64) -> Result<LaplacianCheck> {
    let rows = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let fast = FastInverseLaplacian::new_2d(n)?;
            let lu = dense_laplacian(n, 2).lu();
            let dim = n * n;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let mut worst = 0.0f64;
            let mut probes: Vec<Vec<f64>> = (0..dim)
                .map(|i| {
                    let mut e = vec![0.0; dim];
                    e[i] = 1.0;
                    e
                })
                .collect();
            probes.extend((0..4).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()));
            for v in probes {
                let want = lu
                    .solve(&DVector::from_vec(v.clone()))
                    .ok_or_else(|| Error::Domain("dense Laplacian is singular".into()))?;
                let got = fast.apply_vec(&v);
                let err = want.iter().zip(&got).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(err / want.norm());
            }
            Ok(LaplacianRow {
                n,
                max_relative_error: worst,
                inverse_norm: dense_spectral_norm(&fast.to_dense()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_relative_error = rows.iter().map(|r| r.max_relative_error).fold(0.0, f64::max);
    Ok(LaplacianCheck {
        rows,
        max_relative_error,
        lambda_11_n2: laplacian_eigs_2d(2)[0],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub ell: u32,
    #[serde(rename = "F")]
    pub scales: Option<u32>,
    #[serde(rename = "D_prime")]
    pub d_prime: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub qubits: usize,
    pub gates: usize,
    pub cost: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `||cost - fit|| / ||cost||`.
    pub relative_residual: f64,
}

/// Builds the block-encoding circuit for each instance and fits its cost to
/// `a + b log2 N + c D' log2 D'`.
pub fn gate_audit(instances: &[InstanceConfig]) -> Result<(Vec<AuditRow>, AuditFit)> {
    let rows = instances
        .par_iter()
        .map(|cfg| {
            let inst = Instance::build(cfg)?;
            let scheme = build_label_scheme(&inst.census, inst.field.grid())?;
            let layout = layout_for(&scheme);
            let circuit = assemble_block_encoding(&scheme, &layout)?;
            Ok(AuditRow {
                n: scheme.num_cells,
                ell: cfg.ell,
                scales: cfg.scales.filter(|_| cfg.field == FieldKind::Pitchfork),
                d_prime: scheme.d_prime,
                d: scheme.d,
                qubits: layout.total_qubits(),
                gates: circuit.len(),
                cost: circuit.cost(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_cost_model(&rows)?;
    Ok((rows, fit))
}

pub fn fit_cost_model(rows: &[AuditRow]) -> Result<AuditFit> {
    if rows.len() < 4 {
        return Err(Error::Precondition("the cost fit needs at least 4 instances".into()));
    }
    let x = DMatrix::from_fn(rows.len(), 3, |r, c| {
        let row = &rows[r];
        match c {
            0 => 1.0,
            1 => (row.n as f64).log2(),
            _ => row.d_prime as f64 * (row.d_prime as f64).log2(),
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.cost as f64));
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let resid = &y - &x * &coef;
    Ok(AuditFit {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        relative_residual: resid.norm() / y.norm(),
    })
}

/// Instance family for the cost audit: constant fields and pitchforks of
/// every admissible depth for `ell` in `ells`.
pub fn audit_family(ells: RangeInclusive<u32>, side: f64, beta: f64, k_bg: f64) -> Vec<InstanceConfig> {
    let mut out = Vec::new();
    for ell in ells {
        out.push(InstanceConfig::constant(ell, side));
        for f in 1..=ell {
            out.push(InstanceConfig::pitchfork(ell, side, f, beta, k_bg));
        }
    }
    out
}
