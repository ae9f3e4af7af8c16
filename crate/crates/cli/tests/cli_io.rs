use std::path::Path;

use sbp_elastic::scenarios::ScenarioName;
use sbp_elastic_cli::config::{GridConfig, Policy};
use sbp_elastic_cli::snapshot::read_snapshot;
use sbp_elastic_cli::{parse_config, run, CliError, RunConfig};

fn small(scenario: ScenarioName, dir: &Path) -> RunConfig {
    let mut c = RunConfig::new(scenario);
    c.grid = Some(GridConfig { n1: 11, n2: 11, n3_coarse: 8, n3_fine: 9, n1_fine: None, n2_fine: None });
    c.output.dir = dir.to_path_buf();
    c
}

fn csv_values(path: &Path) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().flat_map(|rec| rec.unwrap().iter().map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect()
}

#[test]
fn zero_data_run_produces_zero_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(ScenarioName::Loh1Geometry, dir.path());
    c.time.t_end = Some(0.05);
    c.time.dt = Some(0.01);
    c.output.snapshot_stride = 2;
    c.output.energy_stride = 1;
    let o = run(&c).unwrap();
    assert_eq!(o.manifest.steps, 5);
    assert!(o.final_error.is_none());
    let rcv = csv_values(&dir.path().join("receiver_0.csv"));
    assert_eq!(rcv.len(), 6 * 4);
    assert!(rcv.chunks(4).all(|r| r[1..].iter().all(|v| *v == 0.0)));
    let energy = csv_values(&dir.path().join("energy.csv"));
    assert!(energy.chunks(7).all(|r| r[2..].iter().all(|v| *v == 0.0)));
    for name in o.manifest.files.iter().filter(|f| f.ends_with(".snap")) {
        let (_, u) = read_snapshot(&dir.path().join(name)).unwrap();
        assert!(u.raw().iter().all(|v| *v == 0.0), "{name}");
    }
    assert_eq!(o.manifest.snapshots, 8);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["steps"], 5);
    assert_eq!(manifest["blocks"].as_array().unwrap().len(), 2);
}

#[test]
fn manufactured_run_reports_error_and_matching_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(ScenarioName::Mms, dir.path());
    c.time.t_end = Some(0.05);
    c.output.snapshot_stride = 100;
    c.output.receivers = Some(vec![[1.0, 2.0, 1.5], [3.0, 3.0, 5.0]]);
    let o = run(&c).unwrap();
    let e = o.final_error.unwrap();
    assert!(e.l2 > 0.0 && e.l2 < 0.05, "{e:?}");
    assert_eq!(o.manifest.solver_stats.solves, 2 * o.manifest.steps);
    assert_eq!(o.manifest.solver_stats.not_converged, 0);
    let last = format!("snapshot_fine_{:06}.snap", o.manifest.steps);
    let (h, u) = read_snapshot(&dir.path().join(last)).unwrap();
    assert_eq!((h.n1, h.n2, h.n3), (21, 21, 9));
    assert!((h.time - o.manifest.t_end).abs() < 1e-15);
    assert!(u.is_finite());
    assert!(dir.path().join("error.csv").exists());
}

#[test]
fn warn_policy_continues_past_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(ScenarioName::Mms, dir.path());
    c.time.t_end = Some(0.02);
    c.solver = Some(sbp_elastic::krylov::SolverConfig { max_iter: 1, abs_tol: 1e-14, ..Default::default() });
    assert!(matches!(run(&c), Err(CliError::Core(sbp_elastic::Error::NonConvergence { .. }))));
    c.on_nonconvergence = Policy::Warn;
    let o = run(&c).unwrap();
    assert!(o.manifest.solver_stats.not_converged > 0);
}

#[test]
fn config_files_are_parsed_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.toml");
    std::fs::write(&p, "scenario = \"energy\"\n[grid]\nn1 = 25\nn2 = 25\nn3_coarse = 13\nn3_fine = 25\n").unwrap();
    let c = parse_config(&p).unwrap();
    assert_eq!(c.scenario, ScenarioName::Energy);
    std::fs::write(&p, "scenario = \"energy\"\n[grid]\nn1 = 25\nn2 = 25\nn3_coarse = 13\nn3_fine = 25\nn2_fine = 48\n").unwrap();
    let err = parse_config(&p).unwrap_err().to_string();
    assert!(err.contains("grid.n2_fine") && err.contains("25×25") && err.contains("49×48"), "{err}");
    assert!(matches!(parse_config(&dir.path().join("missing.toml")), Err(CliError::Io { .. })));
}

#[test]
fn unwritable_output_directory_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, b"x").unwrap();
    let c = small(ScenarioName::Mms, &file.join("sub"));
    assert!(matches!(run(&c), Err(CliError::Io { .. })));
}
