//! End-to-end runs of the command-line front end.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eikonal-fem"))
}

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let out = bin()
        .args(args)
        .arg("--output")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    out.status.code().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

#[test]
fn medium_sweep_selects_k6() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(
            dir.path(),
            &["--domain", "lshape", "--level", "1", "--sweep", "3", "8"]
        ),
        0
    );
    let s = summary(dir.path());
    assert_eq!(s["schema"], 1);
    assert_eq!(s["selected_alpha"], 0.015625);
    assert_eq!(s["selected_k"], 6);
    let results = s["results"].as_array().unwrap();
    assert_eq!(results.len(), 6);
    for r in results {
        for key in [
            "alpha",
            "monotone",
            "v_min",
            "v_max",
            "iterations",
            "residual",
            "l_inf",
            "l2",
        ] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }
    assert!(results[0]["l_inf"].is_number());
    // Non-monotone results carry undefined u, so no oracle error.
    assert!(results[5]["l_inf"].is_null());
}

#[test]
fn lumped_sweep_is_monotone_throughout() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["--lumping", "--emit", "json"]), 0);
    let s = summary(dir.path());
    let results = s["results"].as_array().unwrap();
    assert!(results.iter().all(|r| r["monotone"] == true));
    assert_eq!(s["selected_k"], 8);
    assert!(!dir.path().join("run_k3.csv").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "--level",
        "0",
        "--degree",
        "2",
        "--sweep",
        "4",
        "6",
        "--emit",
        "csv,vtk,json",
    ];
    assert_eq!(run_in(a.path(), &args), 0);
    assert_eq!(run_in(b.path(), &args), 0);
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn csv_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(
            dir.path(),
            &["--level", "0", "--alpha", "0.03125", "--samples", "101"]
        ),
        0
    );
    let text = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,u"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, u) = l.split_once(',').unwrap();
            (t.parse().unwrap(), u.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 101);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    assert_eq!(rows[0], (0.0, 0.0));
    assert_eq!(rows[100].0, 1.0);
    assert!(rows[100].1.abs() < 1e-12);
    let s = summary(dir.path());
    assert_eq!(s["config"]["alpha"], 0.03125);
    assert_eq!(s["selected_alpha"], 0.03125);
    assert!(s["results"][0]["k"].is_null());
}

#[test]
fn no_monotone_alpha_exits_2_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(
        dir.path(),
        &[
            "--level",
            "0",
            "--sweep",
            "7",
            "8",
            "--emit",
            "json,csv,vtk",
        ],
    );
    assert_eq!(code, 2);
    let s = summary(dir.path());
    assert_eq!(s["status"], "no_monotone_alpha");
    assert!(s["selected_alpha"].is_null());
    let csv = fs::read_to_string(dir.path().join("run_k8.csv")).unwrap();
    assert!(csv.lines().any(|l| l.ends_with(",nan")));
    let vtk = fs::read_to_string(dir.path().join("run_k8.vtk")).unwrap();
    let mask = vtk
        .split("SCALARS u_defined double 1\nLOOKUP_TABLE default\n")
        .nth(1)
        .unwrap();
    assert!(mask.lines().any(|l| l == "0"));
    assert!(vtk.contains("SCALARS v double 1"));
}

#[test]
fn usage_errors_exit_1_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--emit", ""][..],
        &["--degree", "5"],
        &["--alpha", "0.1", "--sweep", "3", "4"],
    ] {
        let out = bin()
            .args(args)
            .arg("--output")
            .arg(dir.path().join("run"))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains(args[0]), "{err}");
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn neumann_strip_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--domain",
        "rect",
        "--rect-size",
        "1",
        "0.25",
        "--nx",
        "64",
        "--ny",
        "16",
        "--neumann",
        "top,bottom",
        "--alpha",
        "0.125",
        "--emit",
        "json,csv",
    ];
    assert_eq!(run_in(dir.path(), &args), 0);
    let s = summary(dir.path());
    assert_eq!(s["config"]["neumann"], serde_json::json!(["bottom", "top"]));
    assert!(s["results"][0]["l_inf"].is_null());
    let text = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("0.25,"));
}

#[test]
fn help_exits_0() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("--sweep"));
}
