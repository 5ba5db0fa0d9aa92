use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn swapdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swapdp"))
        .args(args)
        .env_remove("SWAPDP_THREADS")
        .output()
        .expect("run swapdp")
}

fn ok(args: &[&str]) -> Output {
    let out = swapdp(args);
    assert!(
        out.status.success(),
        "swapdp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Builds the M=3 desk scenario into `dir`.
fn build(dir: &Path, config: &str) -> PathBuf {
    let sc = dir.join("sc.json");
    ok(&[
        "scenario",
        "build",
        "--hospitals",
        s(&fixture("desk_hospitals.csv")),
        "--config",
        s(&fixture(config)),
        "--out",
        s(&sc),
    ]);
    sc
}

#[test]
fn golden_value_table() {
    let dir = tempfile::tempdir().unwrap();
    let sc = build(dir.path(), "desk_m3_config.json");
    let out = dir.path().join("bi");
    ok(&["solve", "bi", "--scenario", s(&sc), "--out", s(&out)]);
    let got = fs::read_to_string(out.join("values.csv")).unwrap();
    let want = fs::read_to_string(fixture("golden_m3_values.csv")).unwrap();
    assert_eq!(got, want);
    for f in ["policy.csv", "values.bin", "policy.bin", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve bi");
    assert!(manifest["artifacts"]["values.csv"].as_str().unwrap().len() == 64);
}

fn run_all(dir: &Path, threads: &str) {
    let sc = build(dir, "desk_m3_config.json");
    let t = ["--threads", threads];
    let rl = fixture("rl_short.json");
    let with = |rest: &[&str]| {
        let mut v: Vec<&str> = t.to_vec();
        v.extend_from_slice(rest);
        ok(&v);
    };
    let d = |n: &str| dir.join(n);
    with(&["solve", "bi", "--scenario", s(&sc), "--out", s(&d("bi"))]);
    with(&[
        "solve",
        "rl",
        "--scenario",
        s(&sc),
        "--out",
        s(&d("rl")),
        "--rl-config",
        s(&rl),
    ]);
    with(&[
        "solve",
        "flat",
        "--scenario",
        s(&sc),
        "--out",
        s(&d("flat")),
    ]);
    for p in ["bi", "rl", "flat"] {
        let pol = d(p);
        let out = d(&format!("eval_{p}.csv"));
        let dump = d(&format!("dump_{p}.csv"));
        with(&[
            "evaluate",
            "--scenario",
            s(&sc),
            "--policy",
            s(&pol),
            "--paths",
            "60",
            "--seed",
            "4",
            "--out",
            s(&out),
            "--dump",
            s(&dump),
        ]);
    }
    with(&[
        "evaluate",
        "--scenario",
        s(&sc),
        "--policy",
        "benchmark",
        "--paths",
        "60",
        "--out",
        s(&d("eval_bench.csv")),
    ]);
    with(&[
        "sweep",
        "--scenario",
        s(&sc),
        "--param",
        "fleet_size",
        "--from",
        "2",
        "--to",
        "4",
        "--solver",
        "bi",
        "--paths",
        "40",
        "--out",
        s(&d("sweep.csv")),
    ]);
}

fn collect(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, root, out);
        } else {
            let name = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            let bytes = fs::read(&p).unwrap();
            if name.ends_with("manifest.json") {
                // wall-clock timings and argument paths differ between runs
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("timings");
                v.as_object_mut().unwrap().remove("args");
                out.push((name, serde_json::to_vec(&v).unwrap()));
            } else {
                out.push((name, bytes));
            }
        }
    }
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    let mut runs = Vec::new();
    for threads in ["1", "4", "4"] {
        let dir = tempfile::tempdir().unwrap();
        run_all(dir.path(), threads);
        let mut files = Vec::new();
        collect(dir.path(), dir.path(), &mut files);
        runs.push(files);
    }
    assert!(runs[0].len() > 15);
    for r in &runs[1..] {
        assert_eq!(r.len(), runs[0].len());
        for ((na, a), (nb, b)) in runs[0].iter().zip(r) {
            assert_eq!(na, nb);
            assert!(a == b, "{na} differs");
        }
    }
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let sc = build(dir.path(), "desk_m3_config.json");
    let out = Command::new(env!("CARGO_BIN_EXE_swapdp"))
        .args([
            "solve",
            "bi",
            "--scenario",
            s(&sc),
            "--out",
            s(&dir.path().join("bi")),
        ])
        .env("SWAPDP_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_swapdp"))
        .args([
            "solve",
            "bi",
            "--scenario",
            s(&sc),
            "--out",
            s(&dir.path().join("bi")),
        ])
        .env("SWAPDP_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn capacity_guard_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.json");
    fs::write(&cfg, r#"{"fleet_size": 30}"#).unwrap();
    let sc = dir.path().join("sc.json");
    ok(&[
        "scenario",
        "build",
        "--hospitals",
        s(&fixture("desk_hospitals.csv")),
        "--config",
        s(&cfg),
        "--out",
        s(&sc),
    ]);
    let out = swapdp(&[
        "solve",
        "bi",
        "--scenario",
        s(&sc),
        "--out",
        s(&dir.path().join("bi")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solve rl"));
    let out = swapdp(&[
        "solve",
        "bi",
        "--scenario",
        s(&sc),
        "--out",
        s(&dir.path().join("bi")),
        "--max-fleet",
        "40",
    ]);
    assert!(out.status.success());
}

#[test]
fn policy_from_another_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = build(dir.path(), "desk_m3_config.json");
    ok(&[
        "solve",
        "bi",
        "--scenario",
        s(&a),
        "--out",
        s(&dir.path().join("bi")),
    ]);
    let other = tempfile::tempdir().unwrap();
    let b = build(other.path(), "desk_config.json");
    let out = swapdp(&[
        "evaluate",
        "--scenario",
        s(&b),
        "--policy",
        s(&dir.path().join("bi")),
        "--out",
        s(&other.path().join("e.csv")),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let out = swapdp(&[
        "evaluate",
        "--scenario",
        s(&a),
        "--policy",
        s(&dir.path().join("bi/values.bin")),
        "--out",
        s(&other.path().join("e.csv")),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bands = dir.path().join("near.json");
    fs::write(&bands, r#"{"fleet_size": 3, "bands": [5.0, 10.0]}"#).unwrap();
    let out = swapdp(&[
        "scenario",
        "build",
        "--hospitals",
        s(&fixture("desk_hospitals.csv")),
        "--config",
        s(&bands),
        "--out",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no hospitals in range"));

    let typo = dir.path().join("typo.json");
    fs::write(&typo, r#"{"fleet_size": 3, "rho_21": 0.4}"#).unwrap();
    let out = swapdp(&[
        "scenario",
        "build",
        "--hospitals",
        s(&fixture("desk_hospitals.csv")),
        "--config",
        s(&typo),
        "--out",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let bad_csv = dir.path().join("h.csv");
    fs::write(
        &bad_csv,
        "name,district,distance_km,population\nA,X,far,100\n",
    )
    .unwrap();
    let out = swapdp(&[
        "scenario",
        "build",
        "--hospitals",
        s(&bad_csv),
        "--config",
        s(&fixture("desk_config.json")),
        "--out",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("distance_km"));

    assert_eq!(swapdp(&["solve", "exact"]).status.code(), Some(2));
    let out = swapdp(&[
        "evaluate",
        "--scenario",
        "/nonexistent/sc.json",
        "--policy",
        "benchmark",
        "--out",
        "x.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_band_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("one.json");
    fs::write(&cfg, r#"{"fleet_size": 3, "bands": [100.0]}"#).unwrap();
    let sc = dir.path().join("sc.json");
    ok(&[
        "scenario",
        "build",
        "--hospitals",
        s(&fixture("desk_hospitals.csv")),
        "--config",
        s(&cfg),
        "--out",
        s(&sc),
    ]);
    let rates = fs::read_to_string(dir.path().join("sc.rates.csv")).unwrap();
    assert!(rates.lines().skip(1).all(|l| l.ends_with(",0")), "{rates}");
    ok(&[
        "solve",
        "bi",
        "--scenario",
        s(&sc),
        "--out",
        s(&dir.path().join("bi")),
    ]);
}

#[test]
fn metrics_and_sweep_layout() {
    let dir = tempfile::tempdir().unwrap();
    let sc = build(dir.path(), "desk_m3_config.json");
    let e = dir.path().join("e.csv");
    ok(&[
        "evaluate",
        "--scenario",
        s(&sc),
        "--policy",
        "benchmark",
        "--paths",
        "20",
        "--out",
        s(&e),
    ]);
    let text = fs::read_to_string(&e).unwrap();
    let header = "param,solver,n_paths,seed,avg_met_pct,avg_met_pct_c1,avg_met_pct_c2,met_c1_lvl1_pct,met_c1_lvl2_pct,avg_a01,avg_a02,avg_a12,mean_reward";
    assert_eq!(text.lines().next(), Some(header));
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("3,benchmark,20,0,"));

    let w = dir.path().join("w.csv");
    ok(&[
        "sweep",
        "--scenario",
        s(&sc),
        "--param",
        "rho21",
        "--from",
        "0.5",
        "--to",
        "1.0",
        "--step",
        "0.25",
        "--solver",
        "flat",
        "--paths",
        "10",
        "--out",
        s(&w),
    ]);
    let text = fs::read_to_string(&w).unwrap();
    let params: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(params, ["0.5", "0.75", "1"]);
    assert!(text.lines().nth(1).unwrap().contains(",flat,10,0,"));
}

#[test]
fn report_lists_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let sc = build(dir.path(), "desk_m3_config.json");
    let csv = dir.path().join("r.csv");
    let out = ok(&[
        "report",
        "--scenario",
        s(&sc),
        "--paths",
        "30",
        "--max-fleet",
        "8",
        "--flat-search-limit",
        "16",
        "--out",
        s(&csv),
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("bi_expected_reward") && text.contains("115.1"));
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        table.lines().next(),
        Some("quantity,reference,artifact,note")
    );
    assert_eq!(table.lines().count(), 11);
}
