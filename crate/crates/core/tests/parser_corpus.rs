//! Runs the fuzz-target properties over the checked-in corpus seeds.

use std::fs;
use std::path::PathBuf;

use deconfound::harness::{parse_dataset_csv, CsvSchema, ExperimentConfig, ExperimentReport};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.display().to_string(), fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn dataset_csv_seeds() {
    let mut accepted = 0;
    for (name, bytes) in seeds("dataset_csv") {
        if let Ok(ds) = parse_dataset_csv(bytes.as_slice(), &CsvSchema::default()) {
            accepted += 1;
            assert_eq!(ds.treatment().len(), ds.n(), "{name}");
            assert!(ds.treatment().iter().all(|t| *t == 0.0 || *t == 1.0), "{name}");
            assert!(ds.outcome().iter().all(|y| y.is_finite()), "{name}");
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn experiment_config_seeds() {
    let mut accepted = 0;
    for (name, bytes) in seeds("experiment_config") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
            accepted += 1;
            let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
            assert_eq!(cfg, again, "{name}");
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn report_json_seeds() {
    let mut accepted = 0;
    for (name, bytes) in seeds("report_json") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        if let Ok(report) = ExperimentReport::from_json_str(text) {
            accepted += 1;
            let again = ExperimentReport::from_json_str(&report.to_json_string().unwrap()).unwrap();
            assert_eq!(report, again, "{name}");
        }
        let _ = ExperimentReport::from_csv_str(text);
    }
    assert!(accepted >= 2);
}

#[test]
fn non_finite_config_values_are_rejected() {
    for text in [
        "[dgp]\ntau = nan\n",
        "[dgp]\ns_t = inf\n",
        "[trim]\nepsilon = nan\n",
        "w_grid = [nan]\n",
        "[cv]\ngrid_min_ratio = nan\n",
        "settings = [{ s_t = nan, s_y = 1.0 }]\n",
    ] {
        assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
    }
}
