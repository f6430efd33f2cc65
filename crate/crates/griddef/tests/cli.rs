use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use griddef::report::{CONVERGENCE_SCHEMA, RESULT_SCHEMA, SWEEP_SCHEMA};
use serde_json::{Map, Value};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn griddef(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_griddef")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn validator(schema: &str) -> jsonschema::Validator {
    jsonschema::validator_for(&serde_json::from_str(schema).unwrap()).unwrap()
}

/// Checks header order against `x-columns` and every row against the schema.
fn check_csv(path: &Path, schema: &str) -> Vec<Map<String, Value>> {
    let schema_value: Value = serde_json::from_str(schema).unwrap();
    let columns: Vec<&str> = schema_value["x-columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_str().unwrap())
        .collect();
    let v = validator(schema);
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, columns);
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let obj: Map<String, Value> = header
                .iter()
                .zip(rec.iter())
                .map(|(k, v)| (k.clone(), Value::String(v.into())))
                .collect();
            let value = Value::Object(obj.clone());
            let errors: Vec<String> = v.iter_errors(&value).map(|e| e.to_string()).collect();
            assert!(errors.is_empty(), "{value}: {errors:?}");
            obj
        })
        .collect()
}

fn solve(out: &Path, extra: &[&str]) -> Output {
    let case = data("three_bus.json");
    let mut args = vec!["solve", "--case", case.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    griddef(&args)
}

#[test]
fn solve_writes_schema_valid_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for row in ["Load loss (MW)", "Defended lines", "Defended generators", "Attacked lines", "Attacked generators"] {
        assert!(text.contains(row), "{text}");
    }
    let result: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    let errors: Vec<String> = validator(RESULT_SCHEMA).iter_errors(&result).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(result["status"], "converged");
    let rows = check_csv(&dir.path().join("convergence.csv"), CONVERGENCE_SCHEMA);
    assert_eq!(rows.len(), result["iterations"].as_array().unwrap().len());
}

#[test]
fn identical_runs_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(solve(a.path(), &[]).status.code(), Some(0));
    assert_eq!(solve(b.path(), &[]).status.code(), Some(0));
    let read = |d: &Path| std::fs::read_to_string(d.join("convergence.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let loss = |d: &Path| {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(d.join("result.json")).unwrap()).unwrap();
        v["final_loss_mw"].as_f64().unwrap()
    };
    assert_eq!(loss(a.path()), loss(b.path()));
}

#[test]
fn dump_models_writes_every_milp() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve(dir.path(), &["--dump-models"]).status.code(), Some(0));
    let names: Vec<String> = std::fs::read_dir(dir.path().join("models"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with("_master.txt")));
    assert!(names.iter().any(|n| n.ends_with("_subproblem.txt")));
}

#[test]
fn no_attack_budget_means_no_loss() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), &["--attack-budget", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(v["final_loss_mw"].as_f64().unwrap(), 0.0);
    assert!(stdout(&o).contains("Attacked lines       N/A"));
}

#[test]
fn invalid_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve(dir.path(), &["--attack-budget=-1"]).status.code(), Some(1));
    assert_eq!(solve(dir.path(), &["--big-m-scale", "0.01"]).status.code(), Some(1));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format\": 1, \"case\": {\"buses\": []}}").unwrap();
    let o = griddef(&["validate", "--case", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
    let o = griddef(&["validate", "--case", data("three_bus.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn unknown_backend_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let case = data("three_bus.json");
    let o = Command::new(env!("CARGO_BIN_EXE_griddef"))
        .args(["solve", "--case", case.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .env(griddef::backend::BACKEND_ENV, "cplex")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn iteration_limit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), &["--max-iters", "1"]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    if v["status"] == "converged" {
        assert_eq!(o.status.code(), Some(0));
    } else {
        assert_eq!(v["status"], "iteration-limit");
        assert_eq!(o.status.code(), Some(3));
    }
}

#[test]
fn sweep_rows_follow_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let case = data("three_bus.json");
    let o = griddef(&[
        "sweep", "--case", case.to_str().unwrap(), "--parameter", "defense-budget", "--values", "2,0,1", "--jobs", "3",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = check_csv(&dir.path().join("sweep.csv"), SWEEP_SCHEMA);
    let values: Vec<&str> = rows.iter().map(|r| r["value"].as_str().unwrap()).collect();
    assert_eq!(values, ["2.0", "0.0", "1.0"]);
    let loss = |i: usize| rows[i]["load_loss_mw"].as_str().unwrap().parse::<f64>().unwrap();
    assert!(loss(1) >= loss(2) - 1e-6 && loss(2) >= loss(0) - 1e-6);
}

#[test]
fn single_point_sweep_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let case = data("three_bus.json");
    let o = griddef(&[
        "sweep", "--case", case.to_str().unwrap(), "--parameter", "load-deviation", "--values", "15",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = check_csv(&dir.path().join("sweep.csv"), SWEEP_SCHEMA);
    let solo = tempfile::tempdir().unwrap();
    assert_eq!(solve(solo.path(), &["--load-dev", "15"]).status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(solo.path().join("result.json")).unwrap()).unwrap();
    let swept: f64 = rows[0]["load_loss_mw"].as_str().unwrap().parse().unwrap();
    assert_eq!(swept, v["final_loss_mw"].as_f64().unwrap());
    assert_eq!(rows[0]["iterations"].as_str().unwrap(), v["iterations"].as_array().unwrap().len().to_string());
}

#[test]
fn oracle_check_three_bus_passes() {
    let o = griddef(&["oracle-check", "--case", data("three_bus.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
    assert!(stdout(&o).contains("1/1 passed"));
}

#[test]
fn oracle_check_random_instances() {
    let o = griddef(&["oracle-check", "--random", "3", "--seed", "7", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("3/3 passed"));
}

#[test]
fn oracle_check_refuses_rts79() {
    let o = griddef(&["oracle-check", "--case", data("modified_rts79.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("refused") && text.contains("exceeds the cap"), "{text}");
    assert!(text.contains("0/1 passed"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(griddef(&["solve"]).status.code(), Some(1));
    assert_eq!(griddef(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(griddef(&["--help"]).status.code(), Some(0));
}
