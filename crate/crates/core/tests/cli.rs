use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn gls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gls")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fails_with(out: &Output, code: i32, category: &str) {
    assert_eq!(out.status.code(), Some(code), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with(&format!("error[{category}]")), "{err}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn error_categories_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    fails_with(&gls(&["sweep", "-c", "/nonexistent.json", "-o", s(&out)]), 4, "missing-data");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"id": "x", "model": {"kind": "linear", "nodes": 4, "rank": 2}, "extra": 1}"#).unwrap();
    fails_with(&gls(&["sweep", "-c", s(&bad), "-o", s(&out)]), 3, "config");
    assert!(!out.exists());

    let table = dir.path().join("table.csv");
    std::fs::write(&table, "scenario,sweep\nx,noise\n").unwrap();
    fails_with(&gls(&["plot-data", "-t", s(&table), "-f", "fig3a", "-o", s(dir.path())]), 4, "parse");
    fails_with(
        &gls(&["plot-data", "-t", s(&table), "-f", "fig9", "-o", s(dir.path())]),
        2,
        "invalid-input",
    );
}

#[test]
fn staged_pipeline_on_linear_model() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let cfg = config_path("linear6.json");
    let cfg = s(&cfg);

    ok(&gls(&["simulate", "-c", cfg, "-o", s(&p("trace.csv"))]));
    let fit = ok(&gls(&["train-gft", "-c", cfg, "-o", s(&p("gft.txt"))]));
    assert_eq!(fit.trim(), "rank 3 mode raw");
    let sel = ok(&gls(&[
        "select-relays", "-c", cfg, "-s", s(&p("gft.txt")), "--noise-variance", "0", "-o", s(&p("plans.csv")),
    ]));
    assert_eq!(sel.trim(), "plans 30 failed 0");

    let ber = ok(&gls(&[
        "run-ber", "-c", cfg, "-s", s(&p("gft.txt")), "--plans", s(&p("plans.csv")), "--trace", s(&p("trace.csv")),
        "--noise-variance", "0", "--audit", s(&p("audit")),
    ]));
    let lines: Vec<&str> = ber.lines().collect();
    assert_eq!(lines[0], "tx,rx,ber");
    assert_eq!(lines.len(), 31);
    assert!(lines[1..].iter().all(|l| l.ends_with(",0.0000000000000000e0")), "{ber}");
    assert_eq!(std::fs::read_dir(p("audit")).unwrap().count(), 30);

    let eve = ok(&gls(&[
        "attack-passive", "-c", cfg, "-s", s(&p("gft.txt")), "--plans", s(&p("plans.csv")), "--trace",
        s(&p("trace.csv")), "--noise-variance", "0", "--fraction", "0.5", "--recovery", s(&p("rec.csv")),
    ]));
    assert!(eve.lines().skip(1).all(|l| l.ends_with(",0.0000000000000000e0")), "{eve}");
    assert!(p("rec.csv").exists());

    let jam = ok(&gls(&[
        "attack-active", "-c", cfg, "--rate", "50", "-o", s(&p("jam.csv")), "--schedule", s(&p("sched.csv")),
    ]));
    assert!(jam.starts_with("injections "));
    assert!(p("sched.csv").exists());

    ok(&gls(&["sweep", "-c", cfg, "-o", s(&p("table.csv"))]));
    let files = ok(&gls(&["plot-data", "-t", s(&p("table.csv")), "-f", "all", "-o", s(&p("plots"))]));
    assert!(files.lines().count() > 5);
}
