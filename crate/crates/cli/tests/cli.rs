use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn adabs(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adabs"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("spawn adabs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn unknown_field_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"absorber":{"gamma":1,"cutoff":5},"state":{"number":{"n":1}},"times":[0],"extra":1}"#,
    );
    let out = adabs("evolve", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("extra"));
}

#[test]
fn invalid_value_reports_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"absorber":{"gamma":1,"cutoff":5},"state":{"two_point":{"p0":"half","n":2}},"times":[0]}"#,
    );
    let out = adabs("evolve", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("state.two_point.p0"));
}

#[test]
fn negative_rate_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"absorber":{"gamma":-1,"cutoff":5},"state":{"number":{"n":1}},"times":[0]}"#,
    );
    assert_eq!(adabs("evolve", &cfg, &tmp.path().join("out"), &[]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = adabs("evolve", &tmp.path().join("absent.json"), &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pfunction_requires_coherent_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"gamma":1,"t":1,"state":{"number":{"n":2}}}"#);
    assert_eq!(adabs("pfunction", &cfg, &tmp.path().join("out"), &[]).status.code(), Some(2));
}

#[test]
fn evolve_number_state_follows_one_photon_removal() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = adabs("evolve", &repo_config("evolve_number.json"), &out_dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&out_dir.join("pmf.csv"));
    assert_eq!(header[0], "t[1/gamma units]");
    assert!(header[1..].iter().all(|h| h.ends_with("[prob]")));
    for row in &rows {
        let vals: Vec<f64> = row.iter().map(|v| v.parse().unwrap()).collect();
        let sum: f64 = vals[1..].iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    let summary = read_json(&out_dir.join("summary.json"));
    assert!(summary.is_object());
    assert!(out_dir.join("final_state.json").exists());
}

#[test]
fn sample_configs_succeed() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, cfg) in [
        ("evolve", "evolve_coherent.json"),
        ("pfunction", "pfunction.json"),
        ("posterior", "posterior.json"),
        ("cascade", "cascade.json"),
    ] {
        let out_dir = tmp.path().join(cmd);
        let out = adabs(cmd, &repo_config(cfg), &out_dir, &[]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("summary.json").exists(), "{cmd}");
    }
}

#[test]
fn posterior_rows_normalize() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"n_list":[1,2,3],"times":[0.6931471805599453]}"#);
    let out_dir = tmp.path().join("out");
    assert!(adabs("posterior", &cfg, &out_dir, &[]).status.success());
    let (header, rows) = csv_rows(&out_dir.join("posterior.csv"));
    assert_eq!(header, ["t_a[1/gamma units]", "n[photons]", "p[prob]"]);
    let p: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    for (got, want) in p.iter().zip([9.0 / 16.0, 9.0 / 32.0, 27.0 / 256.0]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn cascade_outcomes_sum_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    assert!(adabs("cascade", &repo_config("cascade.json"), &out_dir, &[]).status.success());
    let (header, rows) = csv_rows(&out_dir.join("outcomes.csv"));
    assert_eq!(header[0], "click_index[splitter]");
    let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(rows.last().unwrap()[0], "none");
}

#[test]
fn seed_flag_controls_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"absorber":{"gamma":1,"cutoff":20},"state":{"number":{"n":2}},"t":1.5,"n_traj":2000,"seed":5}"#,
    );
    let run = |dir: &str, extra: &[&str]| {
        let out_dir = tmp.path().join(dir);
        assert!(adabs("trajectories", &cfg, &out_dir, extra).status.success());
        std::fs::read(out_dir.join("histogram.csv")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &["--seed", "5"]);
    let c = run("c", &["--seed", "6"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let summary = read_json(&tmp.path().join("c/summary.json"));
    assert_eq!(summary["seed"], 6);
    assert_eq!(summary["n_traj"], 2000);
}
