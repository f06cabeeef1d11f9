use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coulomb2d"))
        .args(args)
        .current_dir(dir)
        .env_remove("COULOMB2D_SEED")
        .output()
        .unwrap()
}

const SMALL: &str = "n = 8\nsweeps = 300\nburnin = 50\nchains = 2\n";

#[test]
fn same_seed_gives_identical_samples() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), SMALL).unwrap();
    for out in ["a", "b"] {
        let o = run(&["--config", "c.cfg", "--seed", "11", "--out", out, "sample"], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(dir.path().join("a/samples.txt")).unwrap();
    let b = fs::read(dir.path().join("b/samples.txt")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let line = String::from_utf8(a).unwrap().lines().next().unwrap().to_string();
    assert_eq!(line.split_whitespace().count(), 2 + 2 * 8);

    let o = run(&["--config", "c.cfg", "--seed", "12", "--out", "c", "sample"], dir.path());
    assert!(o.status.success());
    assert_ne!(fs::read(dir.path().join("c/samples.txt")).unwrap(), b);
}

#[test]
fn env_seed_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), SMALL).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_coulomb2d"))
        .args(["--config", "c.cfg", "--out", "e", "sample"])
        .current_dir(dir.path())
        .env("COULOMB2D_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success());
    run(&["--config", "c.cfg", "--seed", "11", "--out", "f", "sample"], dir.path());
    assert_eq!(fs::read(dir.path().join("e/samples.txt")).unwrap(), fs::read(dir.path().join("f/samples.txt")).unwrap());
}

#[test]
fn manifest_lists_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), SMALL).unwrap();
    let o = run(&["--config", "c.cfg", "--seed", "5", "--out", "o", "density"], dir.path());
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
    assert_eq!(m["subcommand"], "density");
    let files: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["density.csv", "density.json"]);
    let csv = fs::read_to_string(dir.path().join("o/density.csv")).unwrap();
    let value = csv.lines().nth(1).unwrap().split(',').last().unwrap();
    assert!(value.contains('e'), "{value}");
}

#[test]
fn unknown_subcommand_exits_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "# header\nn = 4\nbeta = -1\nwhatever = 3\n").unwrap();
    let o = run(&["--config", "bad.cfg", "droplet"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3: beta"), "{err}");
    assert!(err.contains("line 4: whatever: unknown key"), "{err}");
}

#[test]
fn acceptance_subset_writes_a_scorecard() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--out", "acc", "acceptance", "--only", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("acc/acceptance.json")).unwrap()).unwrap();
    assert_eq!(v["all_passed"], true);
}
