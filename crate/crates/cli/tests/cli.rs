use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn laughlin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laughlin"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LAUGHLIN_OUT")
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|_| panic!("{}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("{}", String::from_utf8_lossy(&o.stderr)))
}

const SMALL_SAMPLE: &[&str] = &["sample", "--n", "12", "--sweeps", "3000", "--burn", "300", "--seed", "7"];

#[test]
fn sample_writes_documented_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_SAMPLE.to_vec();
    args.extend(["--out", "lau"]);
    let o = laughlin(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let status = stdout_json(&o);
    let hash = status["config_hash"].as_str().unwrap().to_string();
    let out = dir.path().join("lau");
    for name in ["density.json", "disk_averages.json", "angular_momentum.json", "config.json", "status.json", "metadata.json"] {
        let doc = json_file(&out.join(name));
        assert_eq!(doc["schema_version"], 1, "{name}");
        assert_eq!(doc["config_hash"], hash.as_str(), "{name}");
    }
    let radial = std::fs::read_to_string(out.join("radial.csv")).unwrap();
    let mut lines = radial.lines();
    assert_eq!(lines.next().unwrap(), format!("# schema_version=1 config_hash={hash}"));
    assert_eq!(lines.next().unwrap(), "radius,density,stderr");
    assert!(lines.count() > 10);
    let density = json_file(&out.join("density.json"));
    let g = &density["data"]["geometry"];
    let n = g["n"].as_u64().unwrap() as usize;
    assert_eq!(density["data"]["density"].as_array().unwrap().len(), n * n);
    let disks = json_file(&out.join("disk_averages.json"));
    assert_eq!(disks["data"]["scales"].as_array().unwrap().len(), 3);
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let mut args = SMALL_SAMPLE.to_vec();
        args.extend(["--out", run]);
        assert_eq!(laughlin(&args, dir.path()).status.code(), Some(0));
    }
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names.iter().filter(|n| *n != "metadata.json") {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let mut other = SMALL_SAMPLE.to_vec();
    let last = other.len() - 1;
    other[last] = "8";
    other.extend(["--out", "c"]);
    assert_eq!(laughlin(&other, dir.path()).status.code(), Some(0));
    assert_ne!(
        std::fs::read(a.join("density.json")).unwrap(),
        std::fs::read(dir.path().join("c/density.json")).unwrap()
    );
}

#[test]
fn default_output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_laughlin"))
        .args(["minimize", "--n", "4"])
        .current_dir(dir.path())
        .env("LAUGHLIN_OUT", "elsewhere")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let status = stdout_json(&o);
    let hash = status["config_hash"].as_str().unwrap();
    let out = dir.path().join("elsewhere").join(format!("minimize-{}", &hash[..12]));
    assert!(out.join("minimizer.json").is_file());
    let o = laughlin(&["minimize", "--n", "4"], dir.path());
    assert!(dir.path().join("runs").join(format!("minimize-{}", &hash[..12])).is_dir());
    assert_eq!(stdout_json(&o)["config_hash"], hash);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[minimize]\nn = 5\nseed = 3\nrestarts = 2\n").unwrap();
    let o = laughlin(&["--config", "run.toml", "minimize", "--seed", "9", "--out", "m"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let c = json_file(&dir.path().join("m/config.json"));
    assert_eq!(c["data"]["config"]["n"], 5);
    assert_eq!(c["data"]["config"]["seed"], 9);
    assert_eq!(c["data"]["config"]["restarts"], 2);
    let m = json_file(&dir.path().join("m/minimizer.json"));
    assert_eq!(m["data"]["points"].as_array().unwrap().len(), 5);
}

#[test]
fn usage_errors_exit_2_with_json_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "particles = 3\n").unwrap();
    let cases: &[&[&str]] = &[
        &["sample", "--no-such-flag"],
        &["sample", "--n", "0"],
        &["sample", "--prefactor", "hole:1"],
        &["tf"],
        &["tf", "--nuclei", "[[0,0],[1]]"],
        &["tf", "--nuclei", "[[0,0]]", "--pad", "wide"],
        &["--config", "bad.toml", "sample"],
        &["--config", "missing.toml", "sample"],
        &["--threads", "0", "minimize", "--n", "3"],
        &["report", "--runs", "nowhere"],
    ];
    for args in cases {
        let o = laughlin(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let d = stderr_json(&o);
        assert_eq!(d["status"], "error");
        assert_eq!(d["exit_code"], 2);
        assert!(d["message"].as_str().unwrap().len() > 3);
    }
    // Nothing was written for rejected configs.
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = laughlin(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verify"));
}

#[test]
fn tf_single_nucleus_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = laughlin(&["tf", "--nuclei", "[[0,0]]", "--grid", "256", "--pad", "auto", "--out", "tf1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("tf1");
    let s = json_file(&out.join("tf_summary.json"));
    let area = s["data"]["region"]["area"].as_f64().unwrap();
    assert!((area - 1.0).abs() <= 0.02, "{area}");
    assert_eq!(s["data"]["passed"], true);
    let sigma = json_file(&out.join("sigma.json"));
    assert_eq!(sigma["data"]["role"], "sigma");
    let region = std::fs::read_to_string(out.join("region.csv")).unwrap();
    assert!(region.lines().nth(1).unwrap() == "polyline,vertex,x,y");
}

#[test]
fn tf_non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = laughlin(&["tf", "--nuclei", "[[0,0],[1,0]]", "--grid", "64", "--max-iterations", "2"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["kind"], "tf_non_convergence");
}

#[test]
fn minimize_non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = laughlin(&["minimize", "--n", "12", "--max-iterations", "3", "--out", "m"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout_json(&o)["status"], "non_convergence");
    let m = json_file(&dir.path().join("m/minimizer.json"));
    assert_eq!(m["data"]["converged"], false);
}

#[test]
fn verify_exit_status_follows_violation_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = laughlin(&["verify", "--minimize-n", "8", "--restarts", "2", "--out", "ok"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json_file(&dir.path().join("ok/exclusion_report.json"));
    assert_eq!(r["data"]["violation"], false);
    let o = laughlin(&["verify", "--minimize-n", "8", "--slack", "-0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    // A single particle sits at the origin, so a disk of radius 0.05 holds
    // far more than its area allows.
    let o = laughlin(
        &["verify", "--minimize-n", "1", "--restarts", "1", "--k-max", "1", "--radii", "0.05", "--out", "bad"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json_file(&dir.path().join("bad/exclusion_report.json"));
    assert_eq!(r["data"]["violation"], true);
    assert_eq!(r["data"]["density_violation"], true);
}

#[test]
fn energy_and_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let o = laughlin(
        &["energy", "--n", "8", "--sweeps", "4000", "--burn", "400", "--prefactors", "identity", "hole-m1-center", "--out", "runs/e"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("runs/e/energy_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let c = json_file(&dir.path().join("runs/e/corollary.json"));
    assert_eq!(c["data"]["verdict"]["passed"], true);

    assert_eq!(laughlin(&["minimize", "--n", "4", "--out", "runs/m"], dir.path()).status.code(), Some(0));
    let o = laughlin(&["report", "--runs", "runs", "--out", "runs/report"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rep = json_file(&dir.path().join("runs/report/report.json"));
    let runs = rep["data"]["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(rep["data"]["all_passed"], true);
    let summary = std::fs::read_to_string(dir.path().join("runs/report/summary.csv")).unwrap();
    assert!(summary.contains("trap_energy_ratio"));
    assert!(summary.contains("minimum_energy"));
    // A second report ignores the first one.
    let o = laughlin(&["report", "--runs", "runs", "--out", "runs/report"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let again = json_file(&dir.path().join("runs/report/report.json"));
    assert_eq!(again, rep);
}
