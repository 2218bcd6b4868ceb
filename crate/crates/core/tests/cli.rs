use std::fs;
use std::process::{Command, Output};

use irs_pilot::experiments::{builtin_experiment, ExperimentFile, CSV_FIXED_COLUMNS};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irs-pilot"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn allocate_from_channel_powers() {
    // Amplitude ratio 2 between the links gives a power ratio of √2.
    let out = run(&[
        "allocate", "--gain-db", "-80,-86.0206", "--elements", "100,100", "--pilot-dbm", "0", "--strategy", "simplified",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let dbm: Vec<f64> = text
        .lines()
        .filter(|l| l.trim_start().starts_with("IRS"))
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(dbm.len(), 2);
    assert!((dbm[1] - dbm[0] - 10.0 * 2f64.sqrt().log10()).abs() < 1e-3);
    assert!(text.contains("PAPR"));
}

#[test]
fn capacity_and_simulate_agree_for_perfect_csi() {
    let cap = run(&["capacity", "--builtin", "fig6", "--perfect-csi"]);
    let sim = run(&["simulate", "--builtin", "fig6", "--perfect-csi", "--trials", "400", "--seed", "1"]);
    assert!(cap.status.success() && sim.status.success());
    let bound = |text: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with("rate bound")).unwrap();
        line.split_whitespace().nth(2).unwrap().parse().unwrap()
    };
    assert_eq!(bound(&stdout(&cap)), bound(&stdout(&sim)));
}

#[test]
fn experiment_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig7.csv");
    let out = run(&["experiment", "fig7", "--trials", "4", "--seed", "9", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with(&CSV_FIXED_COLUMNS.join(",")));
    assert!(header.ends_with("p_1,p_2"));
    // 17 user positions × 2 strategies.
    assert_eq!(lines.count(), 34);
    let manifest = fs::read_to_string(dir.path().join("fig7.manifest.toml")).unwrap();
    let manifest: toml::Table = manifest.parse().unwrap();
    assert_eq!(manifest["master_seed"].as_integer(), Some(9));
    assert_eq!(manifest["rows"].as_integer(), Some(34));
    let echoed = toml::to_string(manifest["spec"].as_table().unwrap()).unwrap();
    let spec = ExperimentFile::parse(&echoed).unwrap();
    assert_eq!(spec.master_seed, 9);
    assert_eq!(spec.n_trials, 4);

    // Same seed, same bytes.
    let again = dir.path().join("again.csv");
    run(&["experiment", "fig7", "--trials", "4", "--seed", "9", "--out", again.to_str().unwrap()]);
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn experiment_file_runs_like_the_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = builtin_experiment("fig4").unwrap();
    spec.n_trials = 3;
    let file = dir.path().join("spec.toml");
    fs::write(&file, ExperimentFile::emit(&spec).unwrap()).unwrap();
    let from_file = dir.path().join("a.csv");
    let builtin = dir.path().join("b.csv");
    assert!(run(&["experiment", file.to_str().unwrap(), "--out", from_file.to_str().unwrap()]).status.success());
    assert!(run(&["experiment", "fig4", "--trials", "3", "--out", builtin.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(&from_file).unwrap(), fs::read(&builtin).unwrap());
}

#[test]
fn dump_spec_parses_back() {
    let out = run(&["experiment", "fig10", "--dump-spec"]);
    assert!(out.status.success());
    let spec = ExperimentFile::parse(&stdout(&out)).unwrap();
    assert_eq!(spec, builtin_experiment("fig10").unwrap());
}

#[test]
fn bad_input_fails_with_a_diagnostic() {
    for args in [
        vec!["experiment", "no-such-experiment"],
        vec!["capacity", "--scenario", "/definitely/missing.toml", "--user", "1,2,0"],
        vec!["simulate", "--builtin", "fig6", "--mask", "00"],
        vec!["allocate", "--builtin", "fig6", "--elements", "1,2,3"],
        vec!["capacity", "--builtin", "fig6", "--user", "1,2"],
    ] {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty(), "{args:?} gave no diagnostic");
    }
}
