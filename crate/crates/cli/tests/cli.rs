use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use affinelab::report::{CsvTable, Report};

const GOLDEN: &str = "format = \"affinelab-matrix/1\"\nlabel = \"golden\"\nd = 1\nm = 1\nentries = [\"0\", \"(1+sqrt(5))/2\"]\n";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_affinelab"));
    c.env_remove("AFFINELAB_PRECISION");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn report(out: &Output) -> Report {
    Report::parse(&String::from_utf8_lossy(&out.stdout)).unwrap()
}

fn result_int(r: &Report, key: &str) -> i64 {
    r.get("result").unwrap().get(key).unwrap().as_integer().unwrap()
}

#[test]
fn count_golden() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "golden.toml", GOLDEN);
    let out = run(&["count", "--matrix", m.to_str().unwrap(), "-Q", "40", "--delta", "1/8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(result_int(&r, "count_certain") > 0);
    assert_eq!(result_int(&r, "count_ambiguous"), 0);
    assert_eq!(r.get("config").unwrap().get("command").unwrap().as_str(), Some("count"));
}

#[test]
fn hits_go_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "golden.toml", GOLDEN);
    let csv = dir.path().join("hits.csv");
    let out = run(&[
        "count", "--matrix", m.to_str().unwrap(), "-Q", "10", "--delta", "1/4", "--hits", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let t = CsvTable::parse(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(t.rows.len() as i64, result_int(&r, "count_certain"));

    // --hits without --csv is a usage error
    let out = run(&["count", "--matrix", m.to_str().unwrap(), "-Q", "10", "--delta", "1/4", "--hits"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "golden.toml", GOLDEN);
    let csv = dir.path().join("bounds.csv");
    let out = run(&[
        "verify-bounds", "--matrix", m.to_str().unwrap(), "--kind", "phi-a", "--qgrid", "4..6", "--dgrid", "1..3",
        "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(result_int(&r, "violations"), 0);
    assert_eq!(result_int(&r, "cells"), 9);
    let t = CsvTable::parse(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 9);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["count"]).status.code(), Some(2));
    assert_eq!(run(&["verify-bounds", "--matrix", "/nonexistent.toml", "--kind", "phi-a"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn budget_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "golden.toml", GOLDEN);
    let out = run(&["--budget", "10", "count", "--matrix", m.to_str().unwrap(), "-Q", "100", "--delta", "1/10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "golden.toml", GOLDEN);
    let cfg = write(dir.path(), "run.toml", "precision = 256\nworkers = 2\nbudget = 10\n");
    let base = ["count", "--matrix", m.to_str().unwrap(), "-Q", "20", "--delta", "1/4"];

    // the file's budget applies
    let out = bin().args(base).args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    // a flag beats the file; the environment is below both
    let out = bin()
        .env("AFFINELAB_PRECISION", "320")
        .args(base)
        .args(["--config", cfg.to_str().unwrap(), "--budget", "1000000", "--workers", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let s = r.get("config").unwrap().get("settings").unwrap();
    assert_eq!(s.get("precision").unwrap().as_integer(), Some(256));
    assert_eq!(s.get("workers").unwrap().as_integer(), Some(3));
    assert_eq!(s.get("budget").unwrap().as_integer(), Some(1_000_000));

    let out = bin().env("AFFINELAB_PRECISION", "320").args(base).output().unwrap();
    let r = report(&out);
    let s = r.get("config").unwrap().get("settings").unwrap();
    assert_eq!(s.get("precision").unwrap().as_integer(), Some(320));

    let bad = write(dir.path(), "bad.toml", "precison = 1\n");
    let out = bin().args(base).args(["--config", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_profile() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.toml", "d = 1\nm = 1\nomega = \"3\"\nsigma = \"2\"\n");
    let out = run(&["classify", "--profile", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let c = r.get("classification").unwrap();
    let value = |k: &str| c.get(k).unwrap().get("value").unwrap().as_str().unwrap().to_string();
    assert_eq!(value("extremal"), "No");
    assert_eq!(value("khintchine"), "No");

    let p = write(dir.path(), "q.toml", "d = 1\nm = 1\nomega = \"2\"\nsigma = \"2\"\n");
    let r = report(&run(&["classify", "--profile", p.to_str().unwrap()]));
    let c = r.get("classification").unwrap();
    assert_eq!(c.get("extremal").unwrap().get("value").unwrap().as_str(), Some("Yes"));

    // below the Dirichlet floor
    let p = write(dir.path(), "r.toml", "d = 1\nm = 1\nomega = \"1/2\"\nsigma = \"1\"\n");
    assert_eq!(run(&["classify", "--profile", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn sieve_and_witness() {
    let out = run(&["sieve-check", "--mode", "fejer", "--grid", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["--seed", "3", "sieve-check", "--mode", "dual-ls", "--instances", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(result_int(&report(&out), "violations"), 0);

    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "golden.toml", GOLDEN);
    let out = run(&["covering", "--mode", "witness", "--matrix", m.to_str().unwrap(), "-Q", "50", "--delta", "1/50", "--x", "3/10"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r.get("result").unwrap().get("verified").unwrap().as_str(), Some("true"));
}

#[test]
fn stable_reports_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "golden.toml", GOLDEN);
    let go = |workers: &str, name: &str| {
        let csv = dir.path().join(name);
        let out = run(&[
            "--workers", workers, "--csv", csv.to_str().unwrap(), "exponent", "--matrix", m.to_str().unwrap(), "--qmax", "3000",
        ]);
        assert_eq!(out.status.code(), Some(0));
        // the echoed config differs by workers and paths
        let result = report(&out).stable().get("result").unwrap().to_string();
        (result, CsvTable::parse(&std::fs::read_to_string(csv).unwrap()).unwrap().body())
    };
    let a = go("1", "a.csv");
    let b = go("3", "b.csv");
    assert_eq!(a, b);
}
