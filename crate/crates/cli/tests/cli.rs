use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bilateral(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilateral"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("BILATERAL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn oracle_on_a_five_point_grid() {
    let dir = TempDir::new().unwrap();
    let o = bilateral(dir.path(), &["oracle", "--instance", "uniform", "--grid", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    let grid: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",grid"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    let expect = [(0.0, 0.0), (0.25, 0.09375), (0.5, 0.125), (0.75, 0.09375), (1.0, 0.0)];
    assert_eq!(grid, expect);
    assert!(csv.lines().any(|l| l.ends_with(",best") && l.starts_with("5.0")));
}

#[test]
fn run_writes_trajectory_and_report() {
    let dir = TempDir::new().unwrap();
    let args = [
        "run", "--instance", "two_third", "--set", "instance.epsilon=0.3", "--learner", "sb",
        "--horizon", "500", "--seed", "3",
    ];
    let o = bilateral(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("run_trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 501);
    assert!(csv.starts_with("t,price,s,b,gft,seller_accepts,buyer_accepts\n"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_report.json")).unwrap()).unwrap();
    assert_eq!(report["horizon"], 500);
    assert_eq!(report["seed"], 3);
    assert!(report["pseudo_regret"].is_f64());
    assert!(report["sb"]["arms"].as_u64().unwrap() >= 1);
}

#[test]
fn outputs_are_byte_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["run", "--instance", "uniform", "--learner", "fbp", "--horizon", "300", "--seed", "11"];
    for d in [&a, &b] {
        assert_eq!(code(&bilateral(d.path(), &args)), 0);
    }
    for f in ["run_trajectory.csv", "run_report.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let args = [
        "sweep", "--instance", "uniform", "--learner", "uniform", "--horizons", "50,100",
        "--replications", "3", "--jobs", "2",
    ];
    for d in [&a, &b] {
        assert_eq!(code(&bilateral(d.path(), &args)), 0);
    }
    for f in ["sweep_table.csv", "sweep_report.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_instance_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = bilateral(dir.path(), &["run", "--learner", "fbp", "--horizon", "10"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing key `instance`"), "{}", stderr(&o));
}

#[test]
fn adversary_exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = bilateral(dir.path(), &["adversary", "--learner", "fbp", "--horizon", "20", "--epsilon", "0.2"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = bilateral(dir.path(), &["adversary", "--learner", "sb", "--horizon", "20"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = bilateral(dir.path(), &["adversary", "--learner", "fbp", "--horizon", "40", "--epsilon", "0.03"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("adversary_report.json")).unwrap()).unwrap();
    assert_eq!(report["meets_bound"], true);
    assert_eq!(report["approximate"], false);
}

#[test]
fn bad_values_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let o = bilateral(dir.path(), &["run", "--instance", "needle", "--set", "instance.x=1.5", "--learner", "fbp", "--horizon", "5"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = bilateral(dir.path(), &["oracle", "--instance", "uniform", "--set", "instance.colour=1"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = bilateral(dir.path(), &["oracle", "--set", "nonsense"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn indist_verdicts() {
    let dir = TempDir::new().unwrap();
    let read = |d: &TempDir| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(d.path().join("indist_report.json")).unwrap()).unwrap()
    };
    assert_eq!(code(&bilateral(dir.path(), &["indist", "--grid", "2000"])), 0);
    let r = read(&dir);
    assert_eq!(r["verdict"], "indistinguishable");
    assert!(r["max_deviation"].as_f64().unwrap() <= 1e-12);
    assert_eq!(code(&bilateral(dir.path(), &["indist", "--grid", "2000", "--perturb"])), 0);
    let r = read(&dir);
    assert_eq!(r["verdict"], "distinguishable");
    assert!(r["max_deviation"].as_f64().unwrap() > 0.01);
}

#[test]
fn sweep_selftest_recovers_one_half() {
    let dir = TempDir::new().unwrap();
    let o = bilateral(dir.path(), &["sweep", "--selftest"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep_report.json")).unwrap()).unwrap();
    assert!((r["fitted_exponent"]["beta"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn selftest_passes() {
    let dir = TempDir::new().unwrap();
    let o = bilateral(dir.path(), &["selftest"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn config_file_round_trips() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(
        &path,
        "horizon = 200\nseed = 5\n[instance]\nname = \"sqrt_lower\"\nepsilon = 0.3\n[learner]\nname = \"fbp\"\n",
    )
    .unwrap();
    let o = bilateral(dir.path(), &["show-config", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = o.stdout;
    let again = dir.path().join("again.toml");
    fs::write(&again, &first).unwrap();
    let o = bilateral(dir.path(), &["show-config", "--config", again.to_str().unwrap()]);
    assert_eq!(o.stdout, first);
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("name = \"sqrt_lower\""));

    let o = bilateral(dir.path(), &["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("run_report.json").exists());
}
