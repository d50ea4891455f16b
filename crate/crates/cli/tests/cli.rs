use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = r#"
name = "tiny"
algorithms = ["bsa", "lsa", "rsa"]
horizon = 2000
seeds = [1, 2]
metrics = ["occupancy", "stationary", "acceptance_rate"]

[model]
kind = "conflict"
links = 4
edges = [[0, 2], [1, 2], [2, 3]]

[weights]
values = [5, 7, 10, 3]

[drop]
p = [0.5]

[schedule]
kind = "fixed"
beta = [BETA]
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lossy-anneal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(dir: &TempDir, name: &str, beta: &str, extra: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, format!("{}{extra}", BASE.replace("BETA", beta))).unwrap();
    path
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lists_bundled_scenarios() {
    let out = cli(&["list-scenarios"]);
    assert!(out.status.success());
    let listing = text(&out.stdout);
    for name in ["fig2", "fig3", "fig4", "fig6", "fig7", "anneal"] {
        assert!(listing.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn run_writes_tidy_csv() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "tiny.toml", "1.0", "");
    let csv = dir.path().join("out.csv");
    let out = cli(&["run", s(&path), "--out", s(&csv), "--threads", "2"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = std::fs::read_to_string(&csv).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("scenario,algorithm,point,seed,metric,value"));
    assert!(body.contains("tiny,rsa,p=0.5;beta=1,2,acceptance_rate,"));
    assert!(body.contains("tiny,bsa,p=0.5;beta=1,,stationary/1101,"));

    let again = cli(&["run", s(&path)]);
    assert_eq!(text(&again.stdout), body);
}

#[test]
fn sweep_and_trace() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "tiny.toml", "1.0", "");
    let out = cli(&["sweep", s(&path), "--axis", "p=0.1,0.3", "--axis", "beta=0.5"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = text(&out.stdout);
    assert!(body.contains("p=0.1;beta=0.5") && body.contains("p=0.3;beta=0.5"));
    assert!(!body.contains("beta=1,"));

    let out = cli(&["trace", s(&path), "--algorithm", "rsa", "--seed", "4"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = text(&out.stdout);
    assert!(body.starts_with("t,proposer,from,to,observed,estimate,accept_probability,accepted,objective"));
    assert_eq!(body.lines().count(), 2001);
}

#[test]
fn analyze_passes_on_well_posed_instance() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "tiny.toml", "0.5", "");
    let out = cli(&["analyze", s(&path)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = text(&out.stdout);
    assert!(body.starts_with("check,algorithm,beta,p,status,value,detail"));
    assert!(!body.contains(",FAIL,"));
    assert!(body.contains("exponent,rsa,,,PASS"));
}

#[test]
fn analyze_fails_on_overstated_bound() {
    let dir = TempDir::new().unwrap();
    let path = scenario(
        &dir,
        "bad.toml",
        "1.0",
        "\n[bounds]\nkind = \"conflict\"\noverrides = [{ i = 2, j = 3, from = 0, to = 1, bound = 0.0 }]\n",
    );
    let out = cli(&["analyze", s(&path)]);
    assert!(!out.status.success());
    let body = text(&out.stdout);
    let row = body.lines().find(|l| l.starts_with("exponent,")).unwrap();
    assert!(row.contains("FAIL") && row.contains("link 2 -> 1") && row.contains("exceeds -3"), "{row}");
}

#[test]
fn analyze_reports_frozen_chain() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "cold.toml", "1000.0", "");
    let out = cli(&["analyze", s(&path)]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("reducible"));
}

#[test]
fn rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let path = scenario(&dir, "tiny.toml", "1.0", "");
    let out = cli(&["sweep", s(&path), "--axis", "gamma=1,2"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("gamma"));

    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, BASE.replace("BETA", "1.0").replace(r#"["bsa", "lsa", "rsa"]"#, "[]")).unwrap();
    let out = cli(&["run", s(&empty)]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("algorithms"), "{}", text(&out.stderr));

    let out = cli(&["run", "no-such-scenario"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("bundled"));
}
