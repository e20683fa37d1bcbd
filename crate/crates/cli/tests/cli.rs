use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(self.stdout.trim()).expect("stdout is JSON")
    }

    fn error(&self) -> Value {
        serde_json::from_str(self.stderr.trim()).expect("stderr is JSON")
    }
}

fn manna(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_manna"));
    cmd.args(args).env_remove("MANNA_BUDGET");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("binary runs");
    Run {
        code: status.code().expect("exited normally"),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    manna(args, &[])
}

fn write(dir: &TempDir, name: &str, doc: &Value) -> String {
    let path: PathBuf = dir.path().join(name);
    fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn instance(dir: &TempDir, values: Value) -> String {
    let rows = values.as_array().unwrap();
    let m = rows[0].as_array().unwrap().len();
    let items: Vec<String> = (0..m)
        .map(|j| ((b'a' + j as u8) as char).to_string())
        .collect();
    write(
        dir,
        "inst.json",
        &json!({ "agents": rows.len(), "items": items, "values": values }),
    )
}

#[test]
fn solve_splits_a_pair() {
    let dir = TempDir::new().unwrap();
    let inst = instance(&dir, json!([[1, 1], [1, 1]]));
    let r = run(&["solve", &inst, "--alpha", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json(), json!({ "bundles": [["a"], ["b"]] }));
}

#[test]
fn solve_reports_nonexistence_with_code_two() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ne.json");
    let g = run(&["gen", "nonexistence", "--out", path.to_str().unwrap()]);
    assert_eq!(g.code, 0);
    let r = run(&["solve", path.to_str().unwrap(), "--alpha", "0.5"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.json()["result"]
        .as_str()
        .unwrap()
        .contains("no 1/2-MMS allocation exists"));
}

#[test]
fn ragged_instance_is_a_format_error() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "bad.json",
        &json!({ "agents": 2, "items": ["a", "b"], "values": [[1, 1], [1]] }),
    );
    let r = run(&["solve", &inst, "--alpha", "1"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error()["error"], "format");
}

#[test]
fn usage_errors_do_not_look_like_nonexistence() {
    let r = run(&["solve", "--alpha", "nope"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error()["error"], "usage");
}

#[test]
fn mms_estimates() {
    let dir = TempDir::new().unwrap();
    let inst = instance(&dir, json!([[1, 1], [1, 1]]));
    let r = run(&["mms", &inst, "--epsilon", "0.1"]);
    assert_eq!(r.json()["mms"], json!(["1", "1"]));

    let inst = instance(&dir, json!([[0, 0], [2, 1]]));
    let r = run(&["mms", &inst, "--agent", "0"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["mms"], json!(["0"]));
}

#[test]
fn tau_violation_lists_agents() {
    let dir = TempDir::new().unwrap();
    let inst = instance(&dir, json!([[5, -5], [3, 1]]));
    for cmd in ["mms", "solve"] {
        let args: &[&str] = if cmd == "mms" {
            &[cmd, &inst, "--tau", "1/2"]
        } else {
            &[cmd, &inst, "--tau", "1/2", "--alpha", "1/2"]
        };
        let r = run(args);
        assert_eq!(r.code, 1, "{cmd}");
        assert_eq!(r.error()["error"], "tau_violation");
        assert_eq!(r.error()["agents"], json!([0]));
    }
}

#[test]
fn opt_reaches_one_on_identical_pairs() {
    let dir = TempDir::new().unwrap();
    let inst = instance(&dir, json!([[1, 1], [1, 1]]));
    let r = run(&["opt", &inst]);
    assert_eq!(r.json()["alpha"], "1");
    let inst = instance(&dir, json!([[3, 1], [3, 1]]));
    let r = run(&["opt", &inst, "--delta", "1/64"]);
    let doc = r.json();
    assert_eq!(doc["alpha"], "1");
    let mut bundles: Vec<Value> = doc["bundles"].as_array().unwrap().clone();
    bundles.sort_by_key(|b| b.to_string());
    assert_eq!(bundles, vec![json!(["a"]), json!(["b"])]);
}

#[test]
fn opt_falls_back_on_the_nonexistence_instance() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ne.json");
    run(&["gen", "nonexistence", "--out", path.to_str().unwrap()]);
    let r = run(&["opt", path.to_str().unwrap(), "--delta", "1/4"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc = r.json();
    assert_eq!(doc["alpha"], "0");
    assert!(doc["probes"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["found"] == false));
}

#[test]
fn verify_reports_mms_and_dominance() {
    let dir = TempDir::new().unwrap();
    let inst = instance(&dir, json!([[1, 0], [0, 1]]));
    let good = write(&dir, "good.json", &json!({ "bundles": [["a"], ["b"]] }));
    let r = run(&["verify", &inst, &good, "--use-oracle"]);
    let doc = r.json();
    assert_eq!(doc["alpha_mms"], true);
    assert_eq!(doc["gamma_po"], true);

    let swapped = write(&dir, "swapped.json", &json!({ "bundles": [["b"], ["a"]] }));
    let r = run(&["verify", &inst, &swapped, "--use-oracle", "--gamma", "0"]);
    let doc = r.json();
    assert_eq!(doc["gamma_po"], false);
    assert!(doc["dominator"]["bundles"].is_array());

    let missing = write(&dir, "missing.json", &json!({ "bundles": [["a"], []] }));
    let r = run(&["verify", &inst, &missing]);
    assert_eq!(r.code, 1);
    assert!(r.error()["message"]
        .as_str()
        .unwrap()
        .contains("not a partition"));
}

#[test]
fn nonexistence_instance_has_quarter_mms() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ne.json");
    run(&["gen", "nonexistence", "--out", path.to_str().unwrap()]);
    let r = run(&["oracle", path.to_str().unwrap(), "mms"]);
    assert_eq!(r.json()["mms"], json!(["1/4", "1/4", "1/4"]));
}

#[test]
fn oracle_queries() {
    let dir = TempDir::new().unwrap();
    let inst = instance(&dir, json!([[3, 1], [3, 1]]));
    assert_eq!(
        run(&["oracle", &inst, "alpha-star"]).json()["alpha_star"],
        "1"
    );
    let r = run(&["oracle", &inst, "po"]);
    assert_eq!(r.code, 1);
    let r = manna(&["oracle", &inst, "mms"], &[("MANNA_BUDGET", "1")]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error()["error"], "budget");
}

#[test]
fn generators() {
    let r = run(&["gen", "partition", "--weights", "3,1,2"]);
    assert_eq!(
        r.json()["values"][0],
        json!(["3", "1", "2", "-11/4", "-11/4"])
    );
    let a = run(&["gen", "random", "--n", "3", "--m", "5", "--seed", "7"]);
    let b = run(&["gen", "random", "--n", "3", "--m", "5", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    let empty = run(&["gen", "random", "--n", "2", "--m", "0"]);
    assert_eq!(empty.json()["items"], json!([]));
    let r = run(&["gen", "partition", "--weights", "1,1", "--variant", "tau"]);
    assert_eq!(r.code, 1);
}

#[test]
fn output_does_not_depend_on_threads() {
    let dir = TempDir::new().unwrap();
    let inst = instance(
        &dir,
        json!([
            [6, 5, 4, -3, 2, 1],
            [1, 2, 6, -2, 5, 4],
            [4, 4, 4, -1, 3, 3]
        ]),
    );
    let one = run(&["solve", &inst, "--alpha", "3/4", "--threads", "1"]);
    let four = run(&["solve", &inst, "--alpha", "3/4", "--threads", "4"]);
    assert_eq!(one.code, four.code);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn out_flag_writes_the_file() {
    let dir = TempDir::new().unwrap();
    let inst = instance(&dir, json!([[1, 1], [1, 1]]));
    let out = dir.path().join("alloc.json");
    let r = run(&[
        "solve",
        &inst,
        "--alpha",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.starts_with("found an allocation"));
    let written: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(written, json!({ "bundles": [["a"], ["b"]] }));
}
