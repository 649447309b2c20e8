use std::path::Path;
use std::process::{Command, Output};

use infomech::fixtures;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infomech"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn fixture_suite_passes() {
    let out = run(&["fixtures"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v = json(&out);
    assert_eq!(v["failed"], 0);
    assert_eq!(
        v["results"].as_array().unwrap().len(),
        fixtures::MANIFEST.len()
    );
}

#[test]
fn fixture_filter_selects_by_glob() {
    let v = json(&run(&["fixtures", "--filter", "*lockbox"]));
    let names: std::collections::BTreeSet<&str> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["fixture"].as_str().unwrap())
        .collect();
    assert_eq!(
        names.into_iter().collect::<Vec<_>>(),
        ["lockbox", "perturbed-lockbox", "uniform-lockbox"]
    );
}

#[test]
fn lockbox_fixture_reports_full_surplus_payments() {
    let out = run(&["fixtures", "--filter", "lockbox", "--format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS lockbox/full-surplus-payment-0"));
    assert!(text.lines().last().unwrap().ends_with("0 failed"));
}

#[test]
fn unknown_fixture_is_an_input_error() {
    assert_eq!(
        run(&["fixtures", "--filter", "nothing-*"]).status.code(),
        Some(2)
    );
}

#[test]
fn report_headline() {
    let out = run(&[
        "report",
        "--context",
        "fixture:separation",
        "--format",
        "text",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("Re=0.4 Rc=0.4 Rp=0.5 R=0.5"));
}

#[test]
fn report_shows_both_payment_frames() {
    let v = json(&run(&["report", "--context", "fixture:lockbox"]));
    let t = &v["type_payments"]["outcomes"][0];
    let buyer = t["buyer_payment"].as_f64().unwrap();
    let observer = t["observer_payment"].as_f64().unwrap();
    assert!((observer - 0.5 * buyer).abs() < 1e-12);
}

#[test]
fn json_output_is_byte_identical_across_runs() {
    let a = run(&["report", "--context", "fixture:staircase", "--qstar-dump"]);
    let b = run(&["report", "--context", "fixture:staircase", "--qstar-dump"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn context_and_tree_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (ctx, tree) = fixtures::separation_protocol();
    let c = write(
        dir.path(),
        "ctx.json",
        &serde_json::to_string(ctx.data()).unwrap(),
    );
    let t = write(dir.path(), "tree.json", &tree.to_json_pretty());
    let out = run(&[
        "eval-protocol",
        "--context",
        &c,
        "--tree",
        &t,
        "--mode",
        "uncommitted",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["revenue"].as_f64().unwrap() - 0.4665).abs() < 1e-12);
    assert_eq!(v["types"][1]["decisions"]["t2"], "pay");

    let committed = json(&run(&[
        "eval-protocol",
        "--context",
        &c,
        "--tree",
        &t,
        "--mode",
        "committed",
    ]));
    assert!(committed["revenue"].as_f64().unwrap() >= 0.4665 - 1e-12);
}

#[test]
fn transform_to_outcomes_gives_a_valid_menu() {
    let out = run(&[
        "transform",
        "--to",
        "outcomes",
        "--context",
        "fixture:separation",
        "--tree",
        "fixture:separation",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verification"]["valid"], true);
}

#[test]
fn transform_to_mappings_requires_independence() {
    let out = run(&[
        "transform",
        "--to",
        "mappings",
        "--context",
        "fixture:separation",
        "--tree",
        "fixture:separation",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_lp_dump() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lp.txt");
    let out = run(&[
        "solve",
        "--mechanism",
        "mappings",
        "--context",
        "fixture:uniform-lockbox",
        "--lp-dump",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!((json(&out)["revenue"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    assert!(std::fs::read_to_string(path)
        .unwrap()
        .starts_with("maximize"));
}

#[test]
fn solve_with_grid_and_reduction() {
    let out = run(&[
        "solve",
        "--mechanism",
        "mappings",
        "--context",
        "fixture:staircase",
        "--grid",
        "8",
        "--reduce-support",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["revenue"].as_f64().unwrap() - 0.49995013811).abs() < 1e-8);
    let support: Vec<u64> = v["verification"]["types"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["support"].as_u64().unwrap())
        .collect();
    assert!(
        support
            .iter()
            .enumerate()
            .all(|(t, &s)| s as usize <= t + 2),
        "{support:?}"
    );

    let npt = json(&run(&[
        "solve",
        "--mechanism",
        "outcomes-npt",
        "--context",
        "fixture:separation",
        "--grid",
        "8",
    ]));
    assert!((npt["revenue"].as_f64().unwrap() - 0.5).abs() < 1e-8);
}

#[test]
fn strict_menu_verifies_with_its_margin() {
    let out = run(&[
        "solve",
        "--mechanism",
        "full-surplus",
        "--context",
        "fixture:lockbox",
        "--epsilon",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["verification"]["valid"].as_bool().unwrap());
}

#[test]
fn unmet_margin_is_a_check_failure() {
    let out = run(&[
        "solve",
        "--mechanism",
        "envelope",
        "--context",
        "fixture:lockbox",
        "--tolerance",
        "-0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rank_deficient_full_surplus_is_a_numeric_failure() {
    let out = run(&[
        "solve",
        "--mechanism",
        "full-surplus",
        "--context",
        "fixture:uniform-lockbox",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_context_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(
        dir.path(),
        "bad.json",
        r#"{"theta":["a"],"omega":["x"],"actions":["k"],"mu":[[0.7]],"u":[[[1.0]]]}"#,
    );
    let out = run(&["report", "--context", &c]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn gap_includes_baseline_and_rejects_leaving_the_simplex() {
    let v = json(&run(&[
        "gap",
        "--context",
        "fixture:iid-gap",
        "--direction",
        "fixture:iid-gap",
        "--t",
        "1e-5",
    ]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["t"], 0.0);

    let dir = tempfile::tempdir().unwrap();
    let eta = write(dir.path(), "eta.json", "[[1,-1],[-1,1]]");
    let out = run(&[
        "gap",
        "--context",
        "fixture:uniform-lockbox",
        "--direction",
        &eta,
        "--t",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
