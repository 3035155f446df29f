use std::path::Path;
use std::process::{Command, Output};

use chfgap_cli::commands::{COMPARE_COLUMNS, EXPAND_COLUMNS};
use chfgap_cli::RunConfig;

fn chfgap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chfgap"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constants_one_interval() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(
        dir.path(),
        &[
            "constants",
            "--endpoints=-1,1",
            "--alpha",
            "0.3",
            "--beta-im",
            "0.5",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let j = read_json(&dir.path().join("constants.json"));
    assert!((j["gamma0"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert!(j["d_infty_1"]["re"].as_f64().unwrap().abs() < 1e-10);
    assert!((j["d_infty_1"]["im"].as_f64().unwrap() - 0.3).abs() < 1e-10);
    assert!(stdout(&o).contains("gamma0"));
}

#[test]
fn constants_two_bands() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(dir.path(), &["constants", "--endpoints=-2,-1,1,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let j = read_json(&dir.path().join("constants.json"));
    let tau = &j["tau"][0][0];
    assert!(tau["re"].as_f64().unwrap().abs() < 1e-12);
    assert!(tau["im"].as_f64().unwrap() > 0.0);
    assert!(j["omega"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_endpoints_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "--endpoints=1,-1",
        "--endpoints=-1,0.5,1",
        "--endpoints=-1,-1,0,1",
    ] {
        let o = chfgap(dir.path(), &["constants", bad]);
        assert_eq!(o.status.code(), Some(1), "{bad}");
        assert!(
            stderr(&o).contains("validation error"),
            "{bad}: {}",
            stderr(&o)
        );
    }
    let o = chfgap(dir.path(), &["expand", "--s-min=-1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = chfgap(dir.path(), &["expand", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn n1_mode_needs_genus_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(
        dir.path(),
        &["expand", "--endpoints=-2,-1,-0.5,0.5,1,2", "--mode", "n1"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("genus 1"), "{}", stderr(&o));
}

#[test]
fn oracle_off_skips() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(dir.path(), &["compare", "--oracle", "off"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("comparison skipped"));
    assert!(!dir.path().join("compare.csv").exists());
}

#[test]
fn oracle_range_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(
        dir.path(),
        &["compare", "--endpoints=-2,2", "--s-max", "20"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_reproduces_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(
        dir.path(),
        &[
            "compare",
            "--endpoints=-1,1",
            "--s-min",
            "6",
            "--s-max",
            "12",
            "--s-count",
            "4",
        ],
    );
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn compare_two_bands_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "compare",
        "--endpoints=-1.25,-0.25,0.25,1.25",
        "--s-min",
        "8",
        "--s-max",
        "16",
        "--s-count",
        "9",
    ];
    let o = chfgap(dir.path(), &args);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn verify_passes_and_detects_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(dir.path(), &["verify", "--endpoints=-2,-1,1,2"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert!(!report.contains("FAIL"));
    assert!(report.contains("PASS elliptic identity (a)"));

    let cfg = dir.path().join("perturbed.json");
    std::fs::write(
        &cfg,
        r#"{"endpoints": [-2, -1, 1, 2], "perturb_tau": 1e-6}"#,
    )
    .unwrap();
    let o = chfgap(dir.path(), &["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let report = std::fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert!(report.contains("FAIL theta quasi-periodicity"), "{report}");
}

#[test]
fn verify_genus_zero_skips() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(
        dir.path(),
        &[
            "verify",
            "--endpoints=-1,1",
            "--alpha",
            "0.6",
            "--beta-im",
            "0.4",
        ],
    );
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("SKIP elliptic identity (a): genus-1 only"));
}

#[test]
fn run_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(
        dir.path(),
        &[
            "expand",
            "--endpoints=-1.5,0.3,0.6,1",
            "--alpha",
            "0.1",
            "--s-count",
            "3",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let echoed = dir.path().join("run.json");
    let cfg = RunConfig::from_file(&echoed).unwrap();
    assert_eq!(cfg.endpoints, vec![-1.5, 0.3, 0.6, 1.0]);
    assert_eq!(cfg.alpha, 0.1);
    assert_eq!(cfg.s_count, 3);
    let first = std::fs::read_to_string(&echoed).unwrap();
    let o = chfgap(
        dir.path(),
        &["expand", "--config", echoed.to_str().unwrap()],
    );
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&echoed).unwrap(), first);
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"endpoint": [-1, 1]}"#).unwrap();
    let o = chfgap(
        dir.path(),
        &["constants", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(1));
}

fn parse_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(
        dir.path(),
        &["expand", "--endpoints=-1,1", "--s-count", "5"],
    );
    assert!(o.status.success());
    let (header, rows) = parse_csv(&dir.path().join("expand.csv"));
    assert_eq!(header, EXPAND_COLUMNS);
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r.len(), 7);
        let sum: f64 = r[1..6].iter().sum();
        assert!((sum - r[6]).abs() < 1e-9 * r[6].abs());
    }

    let o = chfgap(
        dir.path(),
        &[
            "compare",
            "--endpoints=-1,1",
            "--s-min",
            "6",
            "--s-max",
            "12",
            "--s-count",
            "4",
        ],
    );
    assert!(o.status.success());
    let (header, rows) = parse_csv(&dir.path().join("compare.csv"));
    assert_eq!(header, COMPARE_COLUMNS);
    for r in &rows {
        assert!((r[1] - r[2] - r[3]).abs() < 1e-9);
    }
}

#[test]
fn theta_column_oscillates_with_flow_period() {
    let dir = tempfile::tempdir().unwrap();
    let o = chfgap(
        dir.path(),
        &["constants", "--endpoints=-1.25,-0.25,0.25,1.25"],
    );
    assert!(o.status.success());
    let omega = read_json(&dir.path().join("constants.json"))["omega"][0]
        .as_f64()
        .unwrap();
    let period = 2.0 * std::f64::consts::PI / omega;
    let s0 = 4.0;
    let s1 = s0 + period;
    let o = chfgap(
        dir.path(),
        &[
            "expand",
            "--endpoints=-1.25,-0.25,0.25,1.25",
            "--s-min",
            &s0.to_string(),
            "--s-max",
            &s1.to_string(),
            "--s-count",
            "2",
        ],
    );
    assert!(o.status.success());
    let (_, rows) = parse_csv(&dir.path().join("expand.csv"));
    assert!((rows[0][3] - rows[1][3]).abs() < 1e-10);
}
