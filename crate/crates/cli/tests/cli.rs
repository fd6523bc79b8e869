// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name).to_str().unwrap().to_string()
}

fn sdk() -> String {
    corpus("sdk.decls")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minipta")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn records(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).expect("one JSON record per line")).collect()
}

#[test]
fn json_record_carries_stats_and_the_call_graph() {
    let o = run(&["analyze", &corpus("shared_function.mats"), "--format", "json", "--sdk-decls", &sdk()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = &records(&o)[0];
    for key in
        ["file", "algo", "diagnostics", "nodes", "edges", "cg_edges", "iterations", "time_ms", "peak_mem_estimate"]
    {
        assert!(r.get(key).is_some(), "missing {key} in {r}");
    }
    assert_eq!(r["algo"], "pta");
    assert_eq!(r["diagnostics"], 0);
    let edges = r["call_graph"]["edges"].as_array().unwrap();
    assert!(edges.iter().all(|e| e["ctx"].is_array()));
    assert!(r["cg_edges"].as_u64().unwrap() as usize <= edges.len());
}

#[test]
fn baselines_report_no_solver_statistics() {
    let o = run(&["analyze", &corpus("strategy.mats"), "--algo", "cha", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = &records(&o)[0];
    assert_eq!(r["algo"], "cha");
    assert!(r["nodes"].is_null() && r["iterations"].is_null());
    assert!(r["cg_edges"].as_u64().unwrap() > 0);
}

#[test]
fn missing_input_is_fatal() {
    let o = run(&["analyze", "does/not/exist.mats"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error"));
}

#[test]
fn syntax_error_is_fatal_and_located() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mats");
    std::fs::write(&bad, "class A {\n  m( {\n}\n").unwrap();
    let o = run(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.mats:2:"), "{}", stderr(&o));
}

#[test]
fn out_of_range_depth_is_a_usage_error() {
    let o = run(&["analyze", &corpus("strategy.mats"), "--k", "6"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn disabling_storage_loses_the_shared_function_edges() {
    let with = run(&["analyze", &corpus("shared_function.mats"), "--format", "json"]);
    let without = run(&["analyze", &corpus("shared_function.mats"), "--format", "json", "--disable-plugin", "storage"]);
    assert_eq!(with.status.code(), Some(0));
    assert_eq!(without.status.code(), Some(1), "unresolved calls are diagnostics");
    let count = |o: &Output| {
        records(o)[0]["call_graph"]["edges"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|e| e["caller"] == "Func.getMessage")
            .count()
    };
    assert_eq!(count(&with), 2);
    assert_eq!(count(&without), 0);
}

#[test]
fn several_inputs_write_one_artifact_each_regardless_of_jobs() {
    let inputs = ["strategy.mats", "recursion.mats", "visitor_pattern.mats"].map(corpus);
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("jobs{jobs}"));
        let mut args = vec!["analyze", "--format", "dot", "--jobs", jobs, "--output", out.to_str().unwrap()];
        args.extend(inputs.iter().map(String::as_str));
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let files: Vec<_> = records(&o).iter().map(|r| r["file"].as_str().unwrap().to_string()).collect();
        assert_eq!(files, inputs.to_vec(), "records follow input order");
        let mut names: Vec<PathBuf> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        let contents: Vec<(String, String)> = names
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(p).unwrap()))
            .collect();
        trees.push(contents);
    }
    let names: Vec<&str> = trees[0].iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["recursion.dot", "strategy.dot", "visitor_pattern.dot"]);
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn json_ir_input_gives_the_same_call_graph_as_source() {
    let dir = tempfile::tempdir().unwrap();
    let ir = dir.path().join("sdk_photos.json");
    let o = run(&[
        "ir",
        "dump",
        &corpus("sdk_photos.mats"),
        "--format",
        "json",
        "--sdk-decls",
        &sdk(),
        "--output",
        ir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let from_source = run(&["analyze", &corpus("sdk_photos.mats"), "--sdk-decls", &sdk(), "--format", "dot"]);
    let from_ir = run(&["analyze", ir.to_str().unwrap(), "--sdk-decls", &sdk(), "--format", "dot"]);
    assert_eq!(from_ir.status.code(), Some(0), "{}", stderr(&from_ir));
    let graph = |o: &Output| stdout(o).split_once('\n').unwrap().1.to_string();
    assert_eq!(graph(&from_source), graph(&from_ir));
    assert!(graph(&from_ir).contains("sdk:hilog.info"));
}

#[test]
fn compare_scores_labeled_programs() {
    let o = run(&[
        "compare",
        &corpus("shared_function.mats"),
        &corpus("strategy.mats"),
        "--format",
        "json",
        "--sdk-decls",
        &sdk(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for row in rows.iter().filter(|r| r["algo"] == "pta") {
        assert_eq!(row["precision"], 100.0);
        assert_eq!(row["recall"], 100.0);
    }
    assert!(v["pta_vs_cha_pct"].as_f64().unwrap() < 0.0);
}

#[test]
fn compare_without_ground_truth_warns() {
    let o = run(&["compare", &corpus("static_only.mats")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no ground truth"));
}

#[test]
fn compare_rejects_unmatched_labels() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus("strategy.mats"), dir.path().join("strategy.mats")).unwrap();
    std::fs::write(dir.path().join("strategy.truth.json"), r#"{"999:nothing": ["main"]}"#).unwrap();
    let o = run(&["compare", dir.path().join("strategy.mats").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("999:nothing"), "{}", stderr(&o));
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minipta")).current_dir(dir).args(args).output().expect("binary runs")
}

/// Every dump format is pinned byte for byte. Set `MINIPTA_BLESS=1` to
/// rewrite the expected files after an intended change.
#[test]
fn dumps_match_golden_files() {
    let corpus_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("MINIPTA_BLESS").is_some();
    let out = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    for program in ["shared_function", "storage_bindings", "sdk_photos"] {
        for ext in ["dot", "json", "txt"] {
            let cg = out.path().join(format!("{program}.cg.{ext}"));
            let pag = out.path().join(format!("{program}.pag.{ext}"));
            let input = format!("{program}.mats");
            let args = [
                "analyze",
                input.as_str(),
                "--sdk-decls",
                "sdk.decls",
                "--dump-cg",
                cg.to_str().unwrap(),
                "--dump-pag",
                pag.to_str().unwrap(),
            ];
            let o = run_in(&corpus_dir, &args);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            for produced in [cg, pag] {
                let name = produced.file_name().unwrap();
                let expected_path = golden.join(name);
                let actual = std::fs::read_to_string(&produced).unwrap();
                if bless {
                    std::fs::create_dir_all(&golden).unwrap();
                    std::fs::write(&expected_path, &actual).unwrap();
                    continue;
                }
                let expected = std::fs::read_to_string(&expected_path)
                    .unwrap_or_else(|_| panic!("missing {}; run with MINIPTA_BLESS=1", expected_path.display()));
                if expected != actual {
                    mismatches.push(name.to_string_lossy().into_owned());
                }
            }
        }
    }
    assert!(mismatches.is_empty(), "dumps differ from golden files: {mismatches:?}");
}

#[test]
fn trivial_program_scores_full_marks() {
    let dir = tempfile::tempdir().unwrap();
    let src = "class A {\n  m(): void {\n  }\n}\nfunction main() {\n  let a = new A()\n  a.m()\n}\nmain()\n";
    std::fs::write(dir.path().join("tiny.mats"), src).unwrap();
    std::fs::write(dir.path().join("tiny.truth.json"), r#"{"7:m": ["A.m"], "9:main": ["main"]}"#).unwrap();
    let o = run(&["compare", dir.path().join("tiny.mats").to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!((row["precision"].as_f64(), row["recall"].as_f64()), (Some(100.0), Some(100.0)), "{row}");
    }
}

#[test]
fn labeled_corpus_has_three_rows_per_program() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut labeled: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".truth.json"))
        .map(|p| p.to_string_lossy().replace(".truth.json", ".mats"))
        .collect();
    labeled.sort();
    let mut args = vec!["compare", "--format", "json", "--jobs", "4", "--sdk-decls"];
    let sdk = sdk();
    args.push(&sdk);
    args.extend(labeled.iter().map(String::as_str));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3 * labeled.len());
    let text = run(&["compare", "--sdk-decls", &sdk, &labeled[0]]);
    let table = stdout(&text);
    assert!(table.contains("pta vs cha:") && table.contains("pta vs rta:"), "{table}");
}
