//! Configuration, instance summaries, and report files end to end.

use qls_poisson::config::{ExperimentConfig, InstanceConfig};
use qls_poisson::experiments::{kappa_sweep, write_csv, write_json, Instance};
use qls_poisson::mm::{read_matrix_market, write_matrix_market};

#[test]
fn config_file_drives_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"instance": {"ell": 1, "L": 1.0, "field": "pitchfork", "F": 1, "beta": 2.0, "k_bg": 0.01}, "seed": 3}"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.seed, 3);
    let inst = Instance::build(&cfg.instance).unwrap();
    let s = inst.summary();
    assert_eq!((s.n, s.d_prime, s.d), (8, 7, 8));
    assert!((s.alpha - 12.0 * s.k_max * 4.0).abs() < 1e-12);
}

#[test]
fn operator_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = Instance::build(&InstanceConfig::smooth(2, 1.5, 0.3)).unwrap();
    let path = dir.path().join("G.mtx");
    write_matrix_market(&path, &inst.g).unwrap();
    assert_eq!(read_matrix_market(&path).unwrap(), inst.g);
}

#[test]
fn sweep_reports_serialize() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = kappa_sweep(&InstanceConfig::constant(1, 1.0), 1..=3, 1e-8).unwrap();
    write_csv(&dir.path().join("kappa.csv"), &sweep.rows).unwrap();
    write_json(&dir.path().join("kappa.json"), &sweep).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("kappa.csv")).unwrap();
    assert!(csv.starts_with("N,lambda_min,lambda_max,K,kappa_eff"), "{csv}");
    assert_eq!(csv.lines().count(), 4);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("kappa.json")).unwrap()).unwrap();
    assert!(json["exponent"].as_f64().unwrap() > 0.0);
}
