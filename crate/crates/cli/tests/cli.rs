use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

fn hnls() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hnls"))
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(cfg: &Path, out: &Path) -> i32 {
    hnls()
        .arg("run")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn table_config() -> Value {
    json!({
        "seed": 1,
        "experiments": [{"kind": "admissibility-table", "dims": [2, 3, 4, 5, 6]}]
    })
}

fn strichartz_config() -> Value {
    json!({
        "seed": 7,
        "execution": "sequential",
        "experiments": [{
            "kind": "strichartz",
            "sig": {"d": 2, "j0": 0, "eps": [1, 1]},
            "p": 6.0,
            "data": {"family": "dirichlet"},
            "ns": [2, 4, 8],
            "tolerance": 0.5
        }],
        "checks": [{"metric": "slope", "min": 0.0, "max": 1.0}]
    })
}

#[test]
fn version_prints() {
    let out = hnls().arg("version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("hnls "));
}

#[test]
fn admissibility_table_row_three_one_reads_four() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "table.json", &table_config());
    let out = tmp.path().join("run");
    assert_eq!(run(&cfg, &out), 0);
    let mut reader = csv::Reader::from_path(out.join("e0_thresholds.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers, vec!["d", "j0", "delta", "p_star", "p_star_exact"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 + 4 + 5 + 6 + 7);
    let row = rows.iter().find(|r| &r[0] == "3" && &r[1] == "1").unwrap();
    assert_eq!(&row[4], "4");
    assert_eq!(row[3].parse::<f64>().unwrap(), 4.0);
    // elliptic rows: 2(d+2)/d
    let row = rows.iter().find(|r| &r[0] == "4" && &r[1] == "0").unwrap();
    assert_eq!(&row[4], "3");
}

#[test]
fn schema_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        json!({"seed": 1, "experiments": []}),
        json!({"seed": 1, "experiments": [{"kind": "admissibility-table", "dims": [3]}], "extra": 1}),
        json!({"seed": 1, "experiments": [{"kind": "admissibility-table", "dims": [3], "bogus": true}]}),
        json!({"seed": 1, "experiments": [{"kind": "unknown"}]}),
        json!({"seed": 1, "experiments": [
            {"kind": "admissibility-table", "dims": [3]},
            {"kind": "galilean", "sig": {"d": 1, "j0": 0, "eps": [1]}, "half": 2, "center": [0], "side": 2, "times": [0.1]}
        ]}),
        json!({"seed": 1, "experiments": [{"kind": "admissibility-table", "dims": [3]}],
               "checks": [{"metric": "slope", "max": 1.0}]}),
        json!({"seed": 1, "schema_version": 99, "experiments": [{"kind": "admissibility-table", "dims": [3]}]}),
    ];
    for (i, c) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{i}.json"), c);
        assert_eq!(run(&cfg, &tmp.path().join(format!("out{i}"))), 2, "case {i}");
    }
    let garbage = tmp.path().join("garbage.json");
    fs::write(&garbage, "{not json").unwrap();
    assert_eq!(run(&garbage, &tmp.path().join("g")), 2);
}

#[test]
fn resource_cap_exits_three() {
    let tmp = TempDir::new().unwrap();
    let mut c = strichartz_config();
    c["experiments"][0]["data"] = json!({"family": "gaussian"});
    c["caps"] = json!({"max_cost": 1000});
    let cfg = write_config(tmp.path(), "capped.json", &c);
    assert_eq!(run(&cfg, &tmp.path().join("out")), 3);
}

#[test]
fn failing_check_exits_one() {
    let tmp = TempDir::new().unwrap();
    let mut c = strichartz_config();
    c["checks"] = json!([{"metric": "slope", "max": -1.0}]);
    let cfg = write_config(tmp.path(), "fail.json", &c);
    let out = tmp.path().join("out");
    assert_eq!(run(&cfg, &out), 1);
    let summary: Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], json!(false));
}

#[test]
fn sequential_reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.json", &strichartz_config());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&cfg, &a), 0);
    assert_eq!(run(&cfg, &b), 0);
    for f in ["e0_norms.csv", "e0_fit.json", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // replaying the manifest reproduces the outputs without the config file
    let c = tmp.path().join("c");
    assert_eq!(run(&a.join("manifest.json"), &c), 0);
    assert_eq!(fs::read(a.join("e0_norms.csv")).unwrap(), fs::read(c.join("e0_norms.csv")).unwrap());
    let text = fs::read_to_string(a.join("e0_norms.csv")).unwrap();
    let norm = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    let mantissa = norm.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
}

#[test]
fn output_root_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.json", &table_config());
    let root = tmp.path().join("root");
    let out = hnls().arg("run").arg(&cfg).env("HNLS_OUTPUT_ROOT", &root).output().unwrap();
    assert!(out.status.success());
    let dir = PathBuf::from(String::from_utf8(out.stdout).unwrap().trim());
    assert!(dir.starts_with(&root));
    assert!(dir.join("manifest.json").is_file());
}

#[test]
fn report_summarizes_and_detects_tampering() {
    let tmp = TempDir::new().unwrap();
    let runs = tmp.path().join("runs");
    let s = write_config(tmp.path(), "s.json", &strichartz_config());
    let t = write_config(tmp.path(), "t.json", &table_config());
    assert_eq!(run(&s, &runs.join("b_strichartz")), 0);
    assert_eq!(run(&t, &runs.join("a_table")), 0);

    let out = hnls().arg("report").arg(runs.join("b_strichartz")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("== strichartz =="));
    let line = text.lines().find(|l| l.contains(" slope ")).unwrap();
    assert!(line.ends_with("pass"), "{line}");
    let json_report: Value =
        serde_json::from_slice(&fs::read(runs.join("b_strichartz/report.json")).unwrap()).unwrap();
    let row = &json_report["sections"]["strichartz"][0];
    assert_eq!(row["name"], json!("slope"));
    assert!((row["predicted"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);

    let out = hnls().arg("report").arg(&runs).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let a = text.find("== admissibility-table ==").unwrap();
    let b = text.find("== strichartz ==").unwrap();
    assert!(a < b);

    let csv_path = runs.join("b_strichartz/e0_norms.csv");
    let mut bytes = fs::read(&csv_path).unwrap();
    let pos = bytes.iter().position(|&c| c == b'1').unwrap();
    bytes[pos] = b'2';
    fs::write(&csv_path, bytes).unwrap();
    let code = hnls().arg("report").arg(runs.join("b_strichartz")).status().unwrap().code();
    assert_eq!(code, Some(1));
    assert_eq!(hnls().arg("report").arg(&runs).status().unwrap().code(), Some(1));
}

#[test]
fn report_refuses_newer_schema_and_missing_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.json", &table_config());
    let out = tmp.path().join("run");
    assert_eq!(run(&cfg, &out), 0);
    let path = out.join("manifest.json");
    let mut m: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    m["schema_version"] = json!(2);
    fs::write(&path, serde_json::to_vec(&m).unwrap()).unwrap();
    assert_eq!(hnls().arg("report").arg(&out).status().unwrap().code(), Some(2));
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(hnls().arg("report").arg(&empty).status().unwrap().code(), Some(1));
}

#[test]
fn solver_kinds_write_their_outputs() {
    let tmp = TempDir::new().unwrap();
    let sig = json!({"d": 2, "j0": 1, "eps": [1, 1]});
    let configs = [
        json!({"seed": 3, "experiments": [{"kind": "solve", "sig": sig, "m": 1, "nonlinearity": "defocusing",
            "data": {"profile": "gaussian", "half": 2}, "mass_norm": 1.0, "t_max": 0.2, "h": 0.01,
            "record_every": 5}],
            "checks": [{"metric": "mass_drift", "max": 1e-10}]}),
        json!({"seed": 3, "experiments": [{"kind": "picard", "sig": sig, "m": 1,
            "data": {"profile": "modes", "modes": [{"k": [1, 0], "re": 1.0, "im": 0.0}, {"k": [0, -1], "re": 0.0, "im": 0.5}]},
            "amplitude": 0.01, "t_max": 0.1, "n_iter": 4, "n_time": 11}],
            "checks": [{"metric": "split_step_error", "max": 1e-4}]}),
        json!({"seed": 3, "experiments": [{"kind": "inflation", "sig": sig, "m": 1, "s": 0.3, "amplitude": 0.1,
            "data": {"profile": "gaussian", "half": 1}, "t_max": 0.1, "h": 0.01}]}),
        json!({"seed": 3, "experiments": [{"kind": "galilean", "sig": sig, "half": 6, "center": [3, -2],
            "side": 4, "times": [0.1, 0.37], "grid": 16}],
            "checks": [{"metric": "max_deviation", "max": 1e-10}]}),
        json!({"seed": 3, "experiments": [{"kind": "kernel", "sig": sig, "cutoff": "smooth", "ns": [4, 8, 16],
            "samples": 10}]}),
    ];
    for (i, c) in configs.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), c);
        let out = tmp.path().join(format!("o{i}"));
        assert_eq!(run(&cfg, &out), 0, "config {i}");
        assert_eq!(hnls().arg("report").arg(&out).status().unwrap().code(), Some(0));
    }
    assert!(tmp.path().join("o0/e0_checkpoints/00004.bin").is_file());
    assert!(tmp.path().join("o1/e0_contraction.json").is_file());
}
