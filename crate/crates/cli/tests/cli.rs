use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn chorex(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_chorex"))
        .args(args)
        .arg("--quiet")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn ex2() -> String {
    let out = chorex(&["gen", "example", "ex2"], None);
    assert_eq!(out.status.code(), Some(0));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn two_agent_pipeline_from_stdin() {
    let out = chorex(&["protocol", "two-agent", "-"], Some(&ex2()));
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["report"]["per_agent_values"], serde_json::json!(["1/2", "1/2"]));
    assert_eq!(doc["report"]["cuts"], 0);
    assert_eq!(doc["details"]["balance_point"]["exact"], "0");
}

#[test]
fn solve_reports_exact_objective_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "ex2.json", &ex2());
    let out = chorex(&["solve", inst.to_str().unwrap(), "--mode", "prop-swapef"], None);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["objective"], "3/4");
    let alloc = write(dir.path(), "a.json", &doc["allocation"].to_string());
    let check = chorex(&["check", inst.to_str().unwrap(), alloc.to_str().unwrap(), "--notions", "prop,swap-ef"], None);
    assert_eq!(check.status.code(), Some(0));
    assert_eq!(json(&check)["report"]["social_cost"], "3/4");
}

#[test]
fn emit_lp_lists_rows_and_bounds() {
    let out = chorex(&["solve", "-", "--emit-lp"], Some(&ex2()));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.iter().filter(|l| l.starts_with("= ")).count(), 2);
    assert_eq!(lines.iter().filter(|l| l.starts_with("<= ")).count(), 4);
    assert_eq!(lines.iter().filter(|l| l.starts_with("bound ")).count(), 4);
    assert!(lines[1].starts_with("min "));
}

#[test]
fn overlapping_allocation_is_rejected_in_either_order() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "inst.json", &ex2());
    let bad = write(
        dir.path(),
        "bad-overlap.alloc.json",
        r#"{"pieces":[[{"lo":"0","hi":"3/4"}],[{"lo":"1/2","hi":"1"}]]}"#,
    );
    for args in [[bad.to_str().unwrap(), inst.to_str().unwrap()], [inst.to_str().unwrap(), bad.to_str().unwrap()]] {
        let out = chorex(&["check", args[0], args[1]], None);
        assert_eq!(out.status.code(), Some(1));
        let overlap = &json(&out)["validity"]["overlaps"][0];
        assert_eq!(overlap["interval"]["lo"], "1/2");
        assert_eq!(overlap["interval"]["hi"], "3/4");
    }
}

#[test]
fn check_exit_code_follows_requested_notions() {
    let dir = tempfile::tempdir().unwrap();
    let out = chorex(&["gen", "thm3", "--n", "4"], None);
    let inst = write(dir.path(), "thm3.json", &String::from_utf8(out.stdout).unwrap());
    let alloc = write(
        dir.path(),
        "contig.json",
        r#"{"pieces":[[{"lo":"0","hi":"1/4"}],[{"lo":"1/4","hi":"1/2"}],[{"lo":"1/2","hi":"3/4"}],[{"lo":"3/4","hi":"1"}]]}"#,
    );
    let (i, a) = (inst.to_str().unwrap(), alloc.to_str().unwrap());
    assert_eq!(chorex(&["check", i, a, "--notions", "prop"], None).status.code(), Some(0));
    let out = chorex(&["check", i, a, "--notions", "prop,swap-ef"], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["holds"], false);
}

#[test]
fn normalization_errors_are_structured() {
    let out = chorex(&["gen", "example", "ex3"], None);
    let text = String::from_utf8(out.stdout).unwrap();
    let out = chorex(&["protocol", "sandwich", "-"], Some(&text));
    assert_eq!(out.status.code(), Some(1));
    let err = &json(&out)["error"];
    assert_eq!(err["kind"], "normalization");
    assert_eq!(err["details"]["agent"], 2);
    assert_eq!(err["details"]["sum"], "3");
    let out = chorex(&["protocol", "sandwich", "-", "--normalize"], Some(&text));
    let doc = json(&out);
    assert_eq!(doc["normalization"]["scale_factors"][2], "1/3");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(chorex(&["frobnicate"], None).status.code(), Some(2));
    let out = chorex(&["solve", "-", "--mode", "fastest"], Some(&ex2()));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "usage");
}

#[test]
fn rw_trace_replay() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "ex2.json", &ex2());
    let trace = write(dir.path(), "t.txt", "# agent 0 on its own piece\neval 0 0 0 1/2\ncut 0 0 0 3/8\n");
    let out = chorex(&["rw", inst.to_str().unwrap(), "--trace", trace.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["answers"][0]["value"], "3/8");
    assert_eq!(doc["answers"][1]["value"], "1/2");
    assert_eq!(doc["ledger"]["total"], 2);
    let bad = write(dir.path(), "bad.txt", "eval 0 0 0\n");
    let out = chorex(&["rw", inst.to_str().unwrap(), "--trace", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["details"]["line"], 1);
}

#[test]
fn search_is_deterministic_and_verified() {
    let args = ["search", "--require", "swap-ef", "--forbid", "prop", "--n", "3", "--m", "2", "--seed", "4"];
    let first = chorex(&args, None);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(json(&first)["verified"], true);
    assert_eq!(first.stdout, chorex(&args, None).stdout);
    let none = chorex(&["search", "--require", "swap-ef", "--forbid", "prop", "--n", "2", "--budget", "300"], None);
    assert_eq!(none.status.code(), Some(1));
    assert_eq!(json(&none)["error"]["kind"], "not_found");
}

#[test]
fn approx_on_generated_oracle_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = chorex(&["gen", "random", "--n", "2", "--m", "2", "--shape", "continuous", "--seed", "3"], None);
    let inst = write(dir.path(), "c.json", &String::from_utf8(out.stdout).unwrap());
    let out = chorex(&["gen", "oracle", inst.to_str().unwrap()], None);
    let spec = write(dir.path(), "o.json", &String::from_utf8(out.stdout).unwrap());
    let out = chorex(&["approx", spec.to_str().unwrap(), "--eps", "1/10", "--mode", "swapef"], None);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["audit"]["tolerance"], 1e-6);
    assert_eq!(doc["discretization"]["cells"], 140);
    assert!(doc["exact"]["optimum"].is_string());
}
