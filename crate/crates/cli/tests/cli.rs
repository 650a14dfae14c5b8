use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn potlab(dir: &Path, args: &[&str], config: Option<&str>) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_potlab"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("config.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    let output = cmd.output().unwrap();
    let text = String::from_utf8_lossy(&output.stdout).to_string() + &String::from_utf8_lossy(&output.stderr);
    (output.status.code().unwrap_or(-1), text)
}

fn summary(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("out/summary.txt")).unwrap().parse().unwrap()
}

const SMALL_SUITE: &str = "[suite]\nper_family = 3\nmin_atoms = 3\nmax_atoms = 6\n";

#[test]
fn one_point_space_passes() {
    let tmp = TempDir::new().unwrap();
    let (code, text) = potlab(tmp.path(), &["verify-theorem"], Some("[instance]\nrows = [[2.0]]\nweights = [3.0]\n"));
    assert_eq!(code, 0, "{text}");
    let s = summary(tmp.path());
    assert_eq!(s["status"].as_str(), Some("pass"));
    assert_eq!(s["command"].as_str(), Some("verify-theorem"));
    let csv = fs::read_to_string(tmp.path().join("out/data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn kernel_without_maximum_principle_fails() {
    let tmp = TempDir::new().unwrap();
    let (code, text) = potlab(tmp.path(), &["verify-theorem"], Some("[instance]\nrows = [[0.0, 1.0], [1.0, 1.0]]\n"));
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("weak maximum principle fails"));
    assert_eq!(summary(tmp.path())["status"].as_str(), Some("fail"));
}

#[test]
fn symmetric_two_point_solution() {
    let tmp = TempDir::new().unwrap();
    let (code, text) = potlab(tmp.path(), &["solve"], Some("[instance]\nrows = [[1.0, 2.0], [2.0, 1.0]]\n"));
    assert_eq!(code, 0, "{text}");
    let s = summary(tmp.path());
    let u = s["results"]["u"].as_array().unwrap();
    for v in u {
        assert!((v.as_float().unwrap() - 9.0).abs() < 1e-9);
    }
    assert!(tmp.path().join("out/solution.csv").exists());
}

#[test]
fn solve_rejects_q_outside_unit_interval() {
    let tmp = TempDir::new().unwrap();
    let (code, text) = potlab(tmp.path(), &["solve"], Some("[solve]\nq = 1.5\n"));
    assert_eq!(code, 2);
    assert!(text.contains("solve.q"), "{text}");
}

#[test]
fn capacity_closed_forms() {
    let tmp = TempDir::new().unwrap();
    let (code, _) = potlab(tmp.path(), &["capacity"], Some("[instance]\nrows = [[2.0, 1.0], [1.0, 2.0]]\n"));
    assert_eq!(code, 0);
    let cap = summary(tmp.path())["results"]["capacity"].as_float().unwrap();
    assert!((cap - 2.0 / 3.0).abs() < 1e-12);

    let (code, _) = potlab(tmp.path(), &["capacity"], Some("[instance]\nrows = [[inf]]\n"));
    assert_eq!(code, 0);
    assert_eq!(summary(tmp.path())["results"]["capacity"].as_float(), Some(0.0));
}

#[test]
fn capacity_suite_agrees() {
    let tmp = TempDir::new().unwrap();
    let (code, text) = potlab(tmp.path(), &["capacity", "--tol", "1e-9"], Some(SMALL_SUITE));
    assert_eq!(code, 0, "{text}");
    let s = summary(tmp.path());
    assert_eq!(s["config"]["capacity"]["tol"].as_float(), Some(1e-9));
    assert_eq!(s["results"]["capacity"]["cases"].as_integer(), Some(9));
}

#[test]
fn suites_are_reproducible_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let run = |jobs: &str, seed: &str| {
        let (code, text) = potlab(tmp.path(), &["verify-theorem", "--jobs", jobs, "--seed", seed], Some(SMALL_SUITE));
        assert_eq!(code, 0, "{text}");
        fs::read(tmp.path().join("out/data.csv")).unwrap()
    };
    let a = run("1", "7");
    assert_eq!(a, run("3", "7"));
    assert_ne!(a, run("1", "8"));
    assert_eq!(summary(tmp.path())["seed"].as_integer(), Some(8));
}

#[test]
fn wmp_suite_reports_every_instance() {
    let tmp = TempDir::new().unwrap();
    let (code, _) = potlab(tmp.path(), &["wmp"], Some(SMALL_SUITE));
    assert_eq!(code, 0);
    let csv = fs::read_to_string(tmp.path().join("out/data.csv")).unwrap();
    assert!(csv.starts_with("id,family,atoms,h,h_sym,a\n"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn default_counterexample_verdict() {
    let tmp = TempDir::new().unwrap();
    let (code, text) = potlab(tmp.path(), &["counterexample"], None);
    assert_eq!(code, 0, "{text}");
    let s = summary(tmp.path());
    let verdict: Vec<&str> = s["results"]["verdict"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(verdict, ["bounded", "bounded", "divergent"]);
    let csv = fs::read_to_string(tmp.path().join("out/data.csv")).unwrap();
    assert!(csv.starts_with("n,energy_bound,k_value,kappa_lower,"));
    let kappa: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(kappa.windows(2).all(|w| w[1] > w[0]));
    let svg = fs::read_to_string(tmp.path().join("out/plots/kappa_growth.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn counterexample_rejects_two_alpha_at_dimension() {
    let tmp = TempDir::new().unwrap();
    let (code, _) = potlab(tmp.path(), &["counterexample"], Some("[counterexample]\nalpha = 0.5\n"));
    assert_eq!(code, 2);
}

#[test]
fn unknown_config_keys_are_errors() {
    let tmp = TempDir::new().unwrap();
    let (code, text) = potlab(tmp.path(), &["wmp"], Some("sede = 1\n"));
    assert_eq!(code, 2);
    assert!(text.contains("sede"), "{text}");
}

#[test]
fn report_runs_every_check() {
    let tmp = TempDir::new().unwrap();
    let config = format!("{SMALL_SUITE}[counterexample]\ntruncations = [1000, 3000]\n");
    let (code, text) = potlab(tmp.path(), &["report"], Some(&config));
    let csv = fs::read_to_string(tmp.path().join("out/data.csv")).unwrap();
    let checks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(checks, ["verify-theorem", "capacity", "profile-envelope", "semigroup", "counterexample"]);
    assert_eq!(code, 0, "{text}\n{csv}");
    for f in
        ["verify_solver.csv", "capacity_data.csv", "counterexample_data.csv", "semigroup.csv", "plots/kappa_growth.svg"]
    {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
}
