use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qls_poisson::circuit::{max_dense_qubits, MAX_DENSE_QUBITS_ENV};
use qls_poisson::config::{ExperimentConfig, InstanceConfig};
use qls_poisson::encoding::{build_label_scheme, layout_for, EncodedInstance};
use qls_poisson::experiments::{
    eps_sweep, kappa_sweep, laplacian_inverse_check, precond_check, readout_demo, write_csv, write_json, Instance,
};
use qls_poisson::field::{write_field, FieldHeader};
use qls_poisson::mm::write_matrix_market;
use qls_poisson::Error;

/// Largest relative error accepted from the fast inverse Laplacian.
const LAPLACIAN_TOL: f64 = 1e-10;
/// Hadamard-test estimates further than this many standard errors from the
/// exact overlap count as a failure.
const SHOT_SIGMAS: f64 = 5.0;

#[derive(Parser)]
#[command(name = "qls-poisson", version, about = "Heterogeneous Poisson operators and their block encodings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble G and G' and write them in Matrix Market format.
    Assemble(Common),
    /// Distinct-value census and label counts.
    Census(Common),
    /// Build the block-encoding circuit and verify its top-left block densely.
    VerifyEncoding(Common),
    /// Condition numbers over ell_min..=ell_max.
    KappaSweep(Common),
    /// Smallest normalized solution entry over ell_min..=ell_max.
    EpsSweep(Common),
    /// Preconditioning lower bound on random pairs and the inverse Laplacian pair.
    PrecondCheck(Common),
    /// Region-average readout at two refinement levels with shot sampling.
    ReadoutDemo(Common),
    /// Fast inverse Laplacian against dense inversion.
    LaplacianInverseCheck(Common),
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Verification(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", common.out.display())))?;
    Ok(cfg)
}

fn verified(ok: bool, msg: String) -> Outcome {
    if ok {
        println!("{msg}");
        Ok(())
    } else {
        Err(Failure::Verification(msg))
    }
}

fn assemble(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let inst = Instance::build(&cfg.instance)?;
    write_matrix_market(&out.join("G.mtx"), &inst.g)?;
    write_matrix_market(&out.join("Gprime.mtx"), &inst.scaled.op)?;
    let header = FieldHeader {
        ell: cfg.instance.ell,
        side: cfg.instance.side,
        beta: cfg.instance.beta,
        scales: cfg.instance.scales,
        k_bg: cfg.instance.k_bg,
    };
    write_field(&out.join("field.txt"), &inst.field, &header)?;
    let summary = inst.summary();
    write_json(&out.join("instance.json"), &summary)?;
    println!("N = {}, nnz = {}, alpha = {:.6e}", summary.n, summary.nnz, summary.alpha);
    Ok(())
}

fn census(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let inst = Instance::build(&cfg.instance)?;
    let summary = inst.summary();
    write_json(&out.join("census.json"), &inst.census)?;
    write_json(&out.join("instance.json"), &summary)?;
    println!(
        "D_init = {}, D' = {}, D = {}, cell values = {}, interface values = {}",
        summary.d_init, summary.d_prime, summary.d, summary.cell_values, summary.interface_values
    );
    Ok(())
}

fn encoding_qubits(instance: &InstanceConfig) -> Result<usize, Failure> {
    let inst = Instance::build(instance)?;
    let scheme = build_label_scheme(&inst.census, inst.field.grid())?;
    Ok(layout_for(&scheme).total_qubits())
}

fn verify_encoding(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let limit = max_dense_qubits();
    let needed = encoding_qubits(&cfg.instance)?;
    if needed > limit {
        let mut feasible = None;
        for ell in (1..cfg.instance.ell).rev() {
            if encoding_qubits(&cfg.instance.with_ell(ell))? <= limit {
                feasible = Some(ell);
                break;
            }
        }
        let hint = match feasible {
            Some(ell) => format!("the largest feasible ell for this field is {ell}"),
            None => "no ell fits".to_string(),
        };
        return Err(Failure::Usage(format!(
            "dense verification needs {needed} qubits, above the limit of {limit}; {hint} (raise the limit with {MAX_DENSE_QUBITS_ENV})"
        )));
    }
    let inst = Instance::build(&cfg.instance)?;
    let encoded = EncodedInstance::from_parts(inst.scaled, &inst.census, inst.field.grid())?;
    std::fs::write(out.join("circuit.txt"), encoded.circuit.to_text()).map_err(Error::from)?;
    let report = encoded.verify()?;
    write_json(&out.join("encoding.json"), &report)?;
    println!(
        "{} qubits, {} gates, block residual {:.2e}, subnorm {:.6} (2D = {})",
        report.result.qubits,
        encoded.circuit.len(),
        report.result.max_block_error,
        report.result.measured_subnorm,
        report.expected_subnorm
    );
    Ok(())
}

fn ells(cfg: &ExperimentConfig) -> Result<std::ops::RangeInclusive<u32>, Failure> {
    let e = &cfg.experiment;
    if e.ell_min == 0 || e.ell_min > e.ell_max {
        return Err(Failure::Usage(format!(
            "experiment ell range {}..={} is empty or starts at 0",
            e.ell_min, e.ell_max
        )));
    }
    Ok(e.ell_min..=e.ell_max)
}

fn run_kappa(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let sweep = kappa_sweep(&cfg.instance, ells(cfg)?, cfg.experiment.tol)?;
    write_csv(&out.join("kappa.csv"), &sweep.rows)?;
    write_json(&out.join("kappa.json"), &sweep)?;
    for r in &sweep.rows {
        println!("N = {:>6}  K = {:.4e}  kappa_eff = {:.4e}", r.n, r.k, r.kappa_eff);
    }
    verified(
        sweep.rows.iter().all(|r| r.ok),
        format!("kappa_eff ~ N^{:.4}", sweep.exponent),
    )
}

fn run_eps(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let e = &cfg.experiment;
    let sweep = eps_sweep(&cfg.instance, ells(cfg)?, e.draws, e.sites, cfg.seed, e.cg_tol)?;
    write_csv(&out.join("eps_rows.csv"), &sweep.rows)?;
    write_csv(&out.join("eps_summary.csv"), &sweep.summary)?;
    write_json(&out.join("eps.json"), &sweep)?;
    for s in &sweep.summary {
        println!(
            "N = {:>6}  mean log(1/eps) = {:.3}  failed solves {}/{}",
            s.n, s.mean_log_inv_epsilon, s.failed, s.draws
        );
    }
    let failed: usize = sweep.summary.iter().map(|s| s.failed).sum();
    verified(
        failed == 0,
        format!(
            "trend exponent {:.4}, monotone {}, {failed} failed solves",
            sweep.trend_exponent, sweep.monotone
        ),
    )
}

fn run_precond(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let e = &cfg.experiment;
    let r = precond_check(&cfg.instance, e.random_pairs, e.pair_dim_max, cfg.seed)?;
    write_json(&out.join("precond.json"), &r)?;
    verified(
        r.all_hold,
        format!(
            "{} random pairs, {} violations; inverse Laplacian pair K(MA) = {:.4}, K(A) = {:.4}, slack {:.4e}",
            r.random.pairs, r.random.violations, r.laplacian_pair.k_ma, r.laplacian_pair.k_a, r.laplacian_pair.slack
        ),
    )
}

fn run_readout(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let e = &cfg.experiment;
    let demo = readout_demo(&cfg.instance, e.refinements, e.cell, e.shots, cfg.seed, e.cg_tol)?;
    write_csv(&out.join("readout.csv"), &demo.levels)?;
    write_json(&out.join("readout.json"), &demo)?;
    for l in &demo.levels {
        println!(
            "level {}  region average {:.6e}  estimate {:.5} +- {:.5} (exact {:.5})",
            l.level, l.region_average, l.estimate, l.stderr, l.normalized_exact
        );
    }
    let within = demo
        .levels
        .iter()
        .all(|l| (l.estimate - l.normalized_exact).abs() <= SHOT_SIGMAS * l.stderr.max(f64::EPSILON));
    verified(
        within,
        format!(
            "relative difference {:.4}, largest shot error {:.3e}",
            demo.relative_difference, demo.hadamard_error
        ),
    )
}

fn run_laplacian(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let r = laplacian_inverse_check(cfg.experiment.laplacian_n_max, cfg.seed)?;
    write_csv(&out.join("laplacian.csv"), &r.rows)?;
    write_json(&out.join("laplacian.json"), &r)?;
    verified(
        r.max_relative_error <= LAPLACIAN_TOL && r.lambda_11_n2 == -1.0,
        format!(
            "max relative error {:.3e}, lambda_(1,1) at n = 2 is {}",
            r.max_relative_error, r.lambda_11_n2
        ),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&ExperimentConfig, &Path) -> Outcome) = match &cli.command {
        Command::Assemble(c) => (c, assemble),
        Command::Census(c) => (c, census),
        Command::VerifyEncoding(c) => (c, verify_encoding),
        Command::KappaSweep(c) => (c, run_kappa),
        Command::EpsSweep(c) => (c, run_eps),
        Command::PrecondCheck(c) => (c, run_precond),
        Command::ReadoutDemo(c) => (c, run_readout),
        Command::LaplacianInverseCheck(c) => (c, run_laplacian),
    };
    match load(common).and_then(|cfg| run(&cfg, &common.out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
