//! Black-box tests against the compiled `geosched` binary: determinism,
//! round trips, exit codes, and the file formats the subcommands exchange.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geosched() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geosched"));
    cmd.env_remove("GEOSCHED_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    geosched().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn desk_instance(dir: &Path) -> PathBuf {
    let path = dir.join("desk.json");
    fs::write(
        &path,
        concat!(
            r#"{"jobs":[{"id":"a","release":1,"size":2,"weight":{"kind":"constant","w":1}},"#,
            r#"{"id":"b","release":2,"size":1,"weight":{"kind":"constant","w":2}}]}"#,
        ),
    )
    .unwrap();
    path
}

#[test]
fn gen_is_byte_identical_per_seed() {
    let a = run(&["gen", "--family", "wflow", "--n", "3", "--seed", "7"]);
    let b = run(&["gen", "--family", "wflow", "--n", "3", "--seed", "7"]);
    let c = run(&["gen", "--family", "wflow", "--n", "3", "--seed", "8"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn gen_seed_falls_back_to_env() {
    let flagged = run(&["gen", "--family", "wflow", "--n", "3", "--seed", "7"]);
    let from_env = geosched()
        .env("GEOSCHED_SEED", "7")
        .args(["gen", "--family", "wflow", "--n", "3"])
        .output()
        .unwrap();
    let overridden = geosched()
        .env("GEOSCHED_SEED", "7")
        .args(["gen", "--family", "wflow", "--n", "3", "--seed", "8"])
        .output()
        .unwrap();
    assert_eq!(flagged.stdout, from_env.stdout);
    assert_ne!(flagged.stdout, overridden.stdout);

    let bad = geosched()
        .env("GEOSCHED_SEED", "pi")
        .args(["gen", "--n", "3"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn solve_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let sol = dir.path().join("sol.json");
    let gen = run(&["gen", "--n", "4", "--seed", "3", "-o", inst.to_str().unwrap()]);
    assert!(gen.status.success());

    let solve = run(&["solve", inst.to_str().unwrap(), "-o", sol.to_str().unwrap()]);
    assert!(solve.status.success(), "{}", stderr(&solve));

    let verify = run(&["verify", inst.to_str().unwrap(), sol.to_str().unwrap()]);
    assert!(verify.status.success(), "{}", stderr(&verify));
    assert!(stdout(&verify).starts_with("ok:"));
}

#[test]
fn baseline_prints_the_desk_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let inst = desk_instance(dir.path());
    let out = run(&["baseline", inst.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "OPT 5\n");
}

#[test]
fn reduce_emits_the_covering_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = desk_instance(dir.path());
    let out = run(&["reduce", inst.to_str().unwrap()]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["points"].as_array().unwrap().len(), 4);
    assert_eq!(parsed["rects"].as_array().unwrap().len(), 5);
    assert_eq!(parsed["rects"][0]["id"], "a:1");
}

#[test]
fn malformed_json_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"jobs\": [}\n").unwrap();
    let out = run(&["reduce", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 1"), "{msg}");
    assert!(msg.contains("column"), "{msg}");
}

#[test]
fn tampered_solution_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let inst = desk_instance(dir.path());
    let sol = dir.path().join("sol.json");
    let solve = run(&["solve", inst.to_str().unwrap(), "-o", sol.to_str().unwrap()]);
    assert!(solve.status.success());

    let text = fs::read_to_string(&sol).unwrap();
    let mut parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let dropped = parsed["cover"].as_array_mut().unwrap().pop().unwrap();
    fs::write(&sol, serde_json::to_string(&parsed).unwrap()).unwrap();

    let verify = run(&["verify", inst.to_str().unwrap(), sol.to_str().unwrap()]);
    assert_eq!(verify.status.code(), Some(1), "dropping {dropped} must fail");
}

#[test]
fn solve_rejects_an_oversize_beta() {
    let dir = tempfile::tempdir().unwrap();
    let inst = desk_instance(dir.path());
    let out = run(&["solve", inst.to_str().unwrap(), "--beta", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_aggregates_audit_files() {
    let dir = tempfile::tempdir().unwrap();
    let inst = desk_instance(dir.path());
    let mut audits = Vec::new();
    for seed in ["1", "2"] {
        let audit = dir.path().join(format!("audit{seed}.json"));
        let sol = dir.path().join(format!("sol{seed}.json"));
        let out = run(&[
            "solve",
            inst.to_str().unwrap(),
            "--seed",
            seed,
            "--emit-audit",
            audit.to_str().unwrap(),
            "-o",
            sol.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        audits.push(audit);
    }

    let csv = dir.path().join("runs.csv");
    let md = dir.path().join("runs.md");
    let out = run(&[
        "report",
        audits[0].to_str().unwrap(),
        audits[1].to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--markdown",
        md.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("2 reports; 2 with exact optima"));

    let csv = fs::read_to_string(&csv).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("jobs,horizon"));
    let md = fs::read_to_string(&md).unwrap();
    assert_eq!(md.lines().count(), 4);
    assert!(md.contains("| 5 | 7 |") || md.contains("| 7 | 5 |"), "{md}");
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve", "missing.json", "--heavy-solver", "annealing"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heavy_solver_flag_switches_the_cover_stage() {
    let dir = tempfile::tempdir().unwrap();
    let inst = desk_instance(dir.path());
    let sol = dir.path().join("sol.json");
    let out = run(&[
        "solve",
        inst.to_str().unwrap(),
        "--heavy-solver",
        "exact",
        "-o",
        sol.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let verify = run(&["verify", inst.to_str().unwrap(), sol.to_str().unwrap()]);
    assert!(verify.status.success());
}
