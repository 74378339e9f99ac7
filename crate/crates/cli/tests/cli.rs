use std::fs;

use chaincalc::theory::{self, Theory};
use chaincalc_cli::{run, Output};
use serde_json::Value;
use tempfile::TempDir;

fn call(args: &[&str]) -> Output {
    run(std::iter::once("chaincalc").chain(args.iter().copied()))
}

fn ok_json(args: &[&str]) -> Value {
    let out = call(args);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    serde_json::from_str(&out.stdout).expect("json on stdout")
}

#[test]
fn compute_matches_library() {
    let v = ok_json(&["theory", "compute", "--n", "1", "--chain", "3", "--sets", "[[0,2]]"]);
    let t: Theory = serde_json::from_value(v).unwrap();
    let chain = chaincalc::chain::Chain::new(3).unwrap();
    let sets = chaincalc::chain::SetTuple::from_masks(vec![0b101]);
    assert_eq!(t, theory::th(1, &chain, &sets).unwrap());
}

#[test]
fn compose_and_decide_via_files() {
    let dir = TempDir::new().unwrap();
    let left = dir.path().join("l.json");
    let right = dir.path().join("r.json");
    fs::write(&left, call(&["theory", "compute", "--n", "1", "--chain", "2", "--sets", "[[1]]"]).stdout).unwrap();
    fs::write(&right, call(&["theory", "compute", "--n", "1", "--chain", "1", "--sets", "[[]]"]).stdout).unwrap();
    let sum = ok_json(&["theory", "compose", "--left", left.to_str().unwrap(), "--right", right.to_str().unwrap()]);
    let whole = ok_json(&["theory", "compute", "--n", "1", "--chain", "3", "--sets", "[[1]]"]);
    assert_eq!(sum, whole);

    let sum_path = dir.path().join("s.json");
    fs::write(&sum_path, sum.to_string()).unwrap();
    let p = sum_path.to_str().unwrap();
    assert_eq!(ok_json(&["theory", "decide", "--theory", p, "--formula", "SING(X0)"])["holds"], true);
    assert_eq!(ok_json(&["theory", "decide", "--theory", p, "--formula", "exists Y. Y < X0"])["holds"], true);
    assert_eq!(ok_json(&["theory", "decide", "--theory", p, "--formula", "EM(X0)"])["holds"], false);
}

#[test]
fn enumerate_counts() {
    assert_eq!(ok_json(&["theory", "enumerate", "--n", "0", "--arity", "1", "--count"])["count"], 3);
    assert_eq!(ok_json(&["theory", "enumerate", "--n", "1", "--arity", "1", "--count"])["count"], 13);
}

#[test]
fn graph_commands() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("g.json");
    fs::write(&g, r#"{"n":5,"edges":[[0,1],[1,2],[2,3],[3,4],[0,4]]}"#).unwrap();
    let g = g.to_str().unwrap();
    let r = ok_json(&["graph", "check-random", "--graph", g, "--k", "2"]);
    assert_eq!(r["random"], true);
    assert!(r["violation"].is_null());

    let bits = dir.path().join("b.json");
    fs::write(&bits, call(&["graph", "gen", "--n", "16", "--bits"]).stdout).unwrap();
    let r = ok_json(&["graph", "check-random", "--graph", bits.to_str().unwrap(), "--k", "2"]);
    assert_eq!(r["random"], false);

    let a = ok_json(&["graph", "gen", "--n", "10", "--seed", "7"]);
    let b = ok_json(&["graph", "gen", "--n", "10", "--seed", "7"]);
    assert_eq!(a, b);
    assert_eq!(a["n"], 10);
}

#[test]
fn homog_extract_is_checked_back() {
    let out = ok_json(&["homog", "extract", "--random", "40", "--colors", "2", "--seed", "3", "--k", "1", "--n", "3"]);
    let set = out.as_array().expect("index list");
    assert_eq!(set.len(), 3);
    let v = ok_json(&["homog", "check", "--random", "40", "--colors", "2", "--seed", "3", "--set", &out.to_string(), "--k", "1"]);
    assert_eq!(v["holds"], true);
    let short = call(&["homog", "extract", "--random", "20", "--colors", "2", "--seed", "3", "--k", "1", "--n", "3"]);
    assert_eq!(short.code, 1);
}

#[test]
fn interp_round_trip() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("f.json");
    fs::write(&f, call(&["interp", "fact26", "--prefix", "5"]).stdout).unwrap();
    let f = f.to_str().unwrap();
    let v = ok_json(&["interp", "verify", "--file", f, "--prefix", "6"]);
    assert_eq!(v["classes"], v["representatives"]);
    assert_eq!(v["quotient"]["graph"]["n"], v["classes"]);

    let whole = ok_json(&["interp", "bouquet", "--file", f, "--chain", "6", "--segment", "[0,6]"]);
    assert_eq!(whole["size"], v["classes"]);
    let cuts = ok_json(&["interp", "cuts", "--file", f, "--chain", "6", "--k1", "0", "--k2", "1", "--m1", "5"]);
    assert_eq!(cuts["cuts"].as_array().unwrap().len(), 7);
    assert_eq!(cuts["k3"], 6);
}

#[test]
fn small_interp_cuts_enumerate_m1() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("i.json");
    fs::write(&f, r#"{"universe":"SING(X0)","equality":"X0 = X1","relation":"X0 < X1 | X1 < X0","dim":1}"#).unwrap();
    let cuts = ok_json(&["interp", "cuts", "--file", f.to_str().unwrap(), "--chain", "4", "--k1", "0", "--k2", "1"]);
    // M1 = |T_{0,3}| enumerated, K3 = M1 + 1.
    let m1 = theory::enumerate_fin(0, 3, theory::DEFAULT_CAP).unwrap().len() as u64;
    assert_eq!(cuts["m1"], m1);
    assert_eq!(cuts["k3"], m1 + 1);
}

#[test]
fn ramsey_and_ladder() {
    let r = ok_json(&["constants", "ramsey", "--colors", "2", "--target", "3", "--max-n", "8"]);
    assert_eq!(r["exact"], 6);
    assert_eq!(r["upper"]["mode"], "exact");
    let l = ok_json(&["constants", "ladder", "--n", "1", "--d", "1"]);
    assert_eq!(l["ordering_proven"], true);
    assert_eq!(l["Kstar"]["mode"], "symbolic");
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["bogus"]).code, 2);
    assert_eq!(call(&["theory", "decide", "--theory", "/nonexistent/t.json", "--formula", "true"]).code, 2);
    assert_eq!(call(&["theory", "compute", "--n", "1", "--chain", "3", "--sets", "[[0,"]).code, 2);
    // Domain errors: a prefix too short for the built-in interpretation.
    let out = call(&["interp", "fact26", "--prefix", "2"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.starts_with("error:"));
    assert_eq!(call(&["--help"]).code, 0);
}

#[test]
fn pretty_output_parses_the_same() {
    let plain = call(&["constants", "ramsey", "--colors", "2", "--target", "3"]);
    let pretty = call(&["--pretty", "constants", "ramsey", "--colors", "2", "--target", "3"]);
    assert!(pretty.stdout.lines().count() > plain.stdout.lines().count());
    let a: Value = serde_json::from_str(&plain.stdout).unwrap();
    let b: Value = serde_json::from_str(&pretty.stdout).unwrap();
    assert_eq!(a, b);
}
