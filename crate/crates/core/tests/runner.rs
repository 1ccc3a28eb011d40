//! Config ingestion, outputs and exit codes of the experiment runner.

use std::path::Path;

use gie_core::runner::{self, ExperimentConfig, ResultRecord, RunError};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(cfg: &ExperimentConfig) -> Result<ResultRecord, RunError> {
    runner::with_threads(Some(1), || runner::execute(cfg)).unwrap()
}

#[test]
fn registry_lists_every_module() {
    let list = runner::list_experiments();
    assert!(list.len() >= 8);
    for module in ["interferometer", "hilbert", "gauge_pt", "fielddecomp", "pathint", "cosmo"] {
        assert!(list.iter().any(|(_, m, _)| *m == module), "{module}");
    }
    assert!(list.iter().any(|(n, _, _)| *n == "newton-check"));
}

#[test]
fn config_file_run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let json = dir.path().join("scan.json");
    let cfg = write(
        dir.path(),
        "scan.cfg",
        &format!(
            "experiment = gie-scan\nseed = 4\n\n[params]\nsteps = 10\nt_max = 5\n\n[output]\ncsv = {}\njson = {}\n",
            csv.display(),
            json.display()
        ),
    );
    let result = runner::run(&cfg, Some(1));
    assert_eq!(runner::exit_code(&result), 0);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 11);
    assert!(table.starts_with("t,phi_plus,phi_minus,phase_sum,negativity,witness\n"));
    let record = ResultRecord::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(record.seed, 4);
    assert_eq!(record, result.unwrap());
}

#[test]
fn defaults_are_echoed() {
    let cases = [
        ("gie-phases", &["m1", "m2", "d", "delta_x", "t", "G", "hbar"][..]),
        ("analog-coupling", &["mass", "omega", "separation", "G"]),
        ("branch-phase", &["protocol", "kernel", "d", "delta_x", "duration"]),
        ("kernel-causality", &["speed", "hold", "factors", "axis", "fraction"]),
        ("cosmo-spectrum", &["model", "eps", "kmin", "kmax", "nk", "H0", "eval_ktau", "start_ktau"]),
    ];
    for (name, keys) in cases {
        let record = run(&ExperimentConfig::new(name)).unwrap();
        for key in keys {
            assert!(record.inputs.contains_key(*key), "{name}: {key}");
        }
        assert!(!record.tolerances.is_empty(), "{name}");
    }
}

#[test]
fn error_classes_map_to_exit_codes() {
    let code = |cfg: ExperimentConfig| runner::exit_code(&run(&cfg));
    assert_eq!(code(ExperimentConfig::new("no-such-experiment")), 2);
    let mut unknown = ExperimentConfig::new("gie-phases");
    unknown.set("colour", "red");
    assert_eq!(code(unknown), 2);
    let mut invalid = ExperimentConfig::new("gie-phases");
    invalid.set("delta_x", 1.0);
    assert_eq!(code(invalid), 2);
    let mut tight = ExperimentConfig::new("newton-check");
    tight.set("n", 16);
    tight.tolerances.insert("newton".into(), "1e-12".into());
    assert_eq!(code(tight), 1);
    let mut unwritable = ExperimentConfig::new("gie-phases");
    unwritable.json = Some("/nonexistent-dir/out.json".into());
    assert_eq!(code(unwritable), 3);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "experiment = gie-phases\n[params\n");
    assert_eq!(runner::exit_code(&runner::run(&cfg, None)), 2);
    assert_eq!(runner::exit_code(&runner::run(&dir.path().join("missing.cfg"), None)), 2);
}

#[test]
fn records_independent_of_thread_count() {
    std::env::set_var("SOURCE_DATE_EPOCH", "0");
    let mut cfg = ExperimentConfig::new("decompose");
    cfg.set("n", 16);
    cfg.set("fields", 3);
    let one = runner::with_threads(Some(1), || runner::execute(&cfg)).unwrap().unwrap();
    let four = runner::with_threads(Some(4), || runner::execute(&cfg)).unwrap().unwrap();
    assert_eq!(one.to_json().unwrap(), four.to_json().unwrap());
}
