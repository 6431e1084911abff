use std::fs;
use std::path::Path;

use assert_cmd::Command;
use tempfile::TempDir;

const SMALL: &str = r#"
[grid]
n = 128
length = 60.0

[contour]
theta = 0.3
lambda = 0.9
x_cap = 20.0

[propagator]
method = "eigen"
dt = 0.01
t_final = 2.0
snapshot_stride = 50

[reference]
enabled = false

[diagnostics]
edge_x = 30.0
"#;

fn sescap() -> Command {
    Command::cargo_bin("sescap").unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.display().to_string()
}

fn body(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn check_passes_on_fresh_build() {
    let out = sescap().arg("check").assert().success().get_output().stdout.clone();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("PASS complex_symmetry"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn forced_theta_surfaces_validate_theta() {
    let a = sescap().args(["check", "--theta", "1.6"]).assert().code(1);
    let text = String::from_utf8(a.get_output().stdout.clone()).unwrap();
    assert!(text.contains("FAIL validate_theta"));
}

#[test]
fn flipped_v1_fails_complex_symmetry() {
    let a = sescap().args(["check", "--flip-v1"]).assert().code(2);
    let text = String::from_utf8(a.get_output().stdout.clone()).unwrap();
    assert!(text.contains("FAIL complex_symmetry"));
}

#[test]
fn run_writes_files_with_provenance() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    sescap()
        .args(["run", "--config", &cfg, "--out"])
        .arg(&out)
        .assert()
        .success();
    for name in ["snapshots.dat", "edge.dat", "reflection.dat", "spectrum.dat"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert!(text.starts_with("# sescap "), "{name}");
        assert!(text.contains("# [contour]\n# theta = 0.3\n"), "{name}");
        assert!(text.contains("# n = 128\n"), "{name}");
    }
    // t = 0, 0.5, 1, 1.5, 2 on 128 points
    assert_eq!(body(&out.join("snapshots.dat")).len(), 5 * 128);
}

fn run_and_read(cfg: &str, out: &Path, extra: &[&str]) -> Vec<Vec<u8>> {
    sescap().args(["run", "--config", cfg]).args(extra).arg("-o").arg(out).assert().success();
    ["snapshots.dat", "edge.dat", "reflection.dat", "spectrum.dat"]
        .iter()
        .map(|n| fs::read(out.join(n)).unwrap())
        .collect()
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let first = run_and_read(&cfg, &out, &[]);
    let second = run_and_read(&cfg, &out, &[]);
    assert!(first == second);
}

#[test]
fn sequential_flag_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let par = run_and_read(&cfg, &out, &[]);
    let seq = run_and_read(&cfg, &out, &["--sequential"]);
    assert!(par == seq);
}

#[test]
fn unscaled_run_matches_split_operator() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let run = |method: &str, sub: &str| {
        sescap()
            .args(["run", "--config", &cfg, "--set", "contour.theta=0"])
            .args(["--set", &format!("propagator.method={method}"), "--set", "propagator.dt=0.005"])
            .args(["--set", "propagator.snapshot_stride=100", "-o"])
            .arg(dir.path().join(sub))
            .assert()
            .success();
        body(&dir.path().join(sub).join("snapshots.dat"))
            .iter()
            .map(|l| l.split(", ").map(|c| c.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    let eigen = run("eigen", "e");
    let split = run("split5", "s");
    assert_eq!(eigen.len(), split.len());
    let worst = eigen
        .iter()
        .zip(&split)
        .map(|(a, b)| (a[2] - b[2]).hypot(a[3] - b[3]))
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn malformed_config_leaves_no_files() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nn = \"four hundred\"\n").unwrap();
    let out = dir.path().join("out");
    sescap().args(["run", "--config"]).arg(&cfg).arg("-o").arg(&out).assert().code(1);
    assert!(!out.exists());
}

#[test]
fn numerical_failure_leaves_no_files() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    // a packet sitting in the absorber is not representable in the eigenbasis
    // to the required accuracy
    let a = sescap()
        .args(["run", "--config", &cfg, "--set", "initial.x0=27", "--set", "initial.a=4", "-o"])
        .arg(&out)
        .assert();
    let code = a.get_output().status.code().unwrap();
    assert!(code == 1 || code == 2);
    assert!(!out.exists());
}

#[test]
fn validation_errors_name_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let a = sescap()
        .args(["run", "--config", &cfg, "--set", "propagator.method=split5", "-o"])
        .arg(dir.path().join("o"))
        .assert()
        .code(1);
    assert!(String::from_utf8_lossy(&a.get_output().stderr).contains("propagator.method"));

    let a = sescap().args(["config", "--set", "contour.theta=2.0"]).assert().code(1);
    assert!(String::from_utf8_lossy(&a.get_output().stderr).contains("contour.theta"));

    sescap().args(["config", "--set", "no_equals_sign"]).assert().code(1);
    sescap().args(["figure", "7"]).assert().code(1);
}

#[test]
fn printed_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = sescap().args(["config", "--config", &cfg]).assert().success().get_output().stdout.clone();
    let printed = dir.path().join("printed.toml");
    fs::write(&printed, &out).unwrap();
    let again = sescap().args(["config", "--config"]).arg(&printed).assert().success().get_output().stdout.clone();
    assert_eq!(out, again);
}

#[test]
fn spectrum_lists_bound_states() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    sescap().args(["spectrum", "--config", &cfg, "-o"]).arg(&out).assert().success();
    assert_eq!(body(&out.join("spectrum.dat")).len(), 128);
    let bound = body(&out.join("bound_states.dat"));
    assert!(!bound.is_empty());
    for row in bound {
        let re: f64 = row.split(", ").nth(1).unwrap().parse().unwrap();
        assert!(re < 0.0);
    }
}
