use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value as Json;

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
        .display()
        .to_string()
}

fn rarobj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rarobj")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Json {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn explore_relacq_prints_single_outcome() {
    let o = rarobj(&["explore", &corpus("mp-relacq.lit")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("r1 = 1, r2 = 5"), "{}", stdout(&o));
}

#[test]
fn explore_relaxed_json_has_both_values() {
    let o = rarobj(&["explore", &corpus("mp-relaxed.lit"), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["verdict"], "valid");
    assert_eq!(j["truncated"], false);
    assert!(j["states_explored"].as_u64().unwrap() > 0);
    assert_eq!(j["witness"], Json::Array(vec![]));
    let r2: Vec<i64> = j["outcomes"].as_array().unwrap().iter().map(|o| o["r2"].as_i64().unwrap()).collect();
    assert!(r2.contains(&0) && r2.contains(&5), "{r2:?}");
}

#[test]
fn json_is_stable_and_independent_of_jobs() {
    let f = corpus("lockmp.lit");
    let a = rarobj(&["explore", &f, "--json"]);
    let b = rarobj(&["explore", &f, "--json"]);
    let c = rarobj(&["explore", &f, "--json", "--jobs", "4"]);
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a), stdout(&c));
}

#[test]
fn outline_verdicts() {
    let o = rarobj(&["outline", &corpus("lockmp.lit")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: valid"));

    let o = rarobj(&["outline", &corpus("mutants/lockmp-weak-q1.lit"), "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let j = json(&o);
    assert_eq!(j["verdict"], "violated");
    let v = &j["violations"][0];
    assert_eq!(v["check"], "thread 2 label 1");
    assert!(!v["witness"].as_array().unwrap().is_empty());
    assert!(v["witness"][0]["thread"].is_number() && v["witness"][0]["label"].is_string());
}

#[test]
fn hoare_triple_holds() {
    let o = rarobj(&["hoare", &corpus("lockmp.lit")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn refine_ticketlock_finds_simulation() {
    let o = rarobj(&["refine", "--impl", "ticketlock", "--client", &corpus("lockmp.lit")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulation found"), "{}", stdout(&o));
}

#[test]
fn refine_uses_declared_implementation() {
    let o = rarobj(&["refine", "--client", &corpus("seqlock-refine.lit")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("seqlock "));
}

#[test]
fn refine_relaxed_mutant_reports_counterexample() {
    let o = rarobj(&["refine", "--impl", "ticketlock-relaxed", "--client", &corpus("lockmp.lit"), "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let j = json(&o);
    assert_eq!(j["simulation"]["verdict"], "violated");
    assert!(j["simulation"]["counterexample"]["steps"].as_array().is_some_and(|s| !s.is_empty()));
    assert_eq!(j["trace_inclusion"]["verdict"], "violated");
}

#[test]
fn fifo_oracle_agrees() {
    let o = rarobj(&["oracle", "fifo", "--enqs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("all agree"));
}

#[test]
fn small_bound_is_reported() {
    let o = rarobj(&["explore", &corpus("lockmp.lit"), "--max-steps", "3", "--json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["truncated"], true);
}

#[test]
fn input_errors_exit_with_three() {
    assert_eq!(rarobj(&["explore", &corpus("lockmp.lit"), "--bogus"]).status.code(), Some(3));
    assert_eq!(rarobj(&["explore", "/nonexistent.lit"]).status.code(), Some(3));
    assert_eq!(rarobj(&["frobnicate"]).status.code(), Some(3));
    let bad = rarobj(&["refine", "--impl", "spinlock", "--client", &corpus("lockmp.lit")]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn syntax_errors_report_position() {
    let dir = std::env::temp_dir().join(format!("rarobj-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("bad.lit");
    std::fs::write(&f, "litmus \"bad\"\ninit x := 0;\nthread 1\n  x := \nend\n").unwrap();
    let o = rarobj(&["explore", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("4:6:"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}
