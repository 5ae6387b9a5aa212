use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const LOCALIZATION: &str = r#"
experiment = "localization_scan"
seed = 1
replicas = 12
beta = [0.3, 1.0, 2.5]
delta = [0.01, 0.1]

[model]
kind = "rem"
n = 9
"#;

const ATOMS: &str = r#"
experiment = "atom_decay"
seed = 4
replicas = 6
beta = [1.0]

[model]
kind = "polymer"
n = 6
d = 1

[params]
n_list = [4, 6, 8]
"#;

fn gaussloc(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaussloc"));
    cmd.args(args).env_remove("RUST_LOG");
    if let Some(w) = workers {
        cmd.env("GAUSSLOC_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn replay_is_byte_identical_across_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "loc.toml", LOCALIZATION);
    let mut outputs = Vec::new();
    for (k, w) in [Some("1"), Some("3"), None].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{k}"));
        let o = gaussloc(&["run", &cfg, "--out", out.to_str().unwrap()], w);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("results.csv")).unwrap());
        let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["experiment"], "localization_scan");
        assert!(summary["all_pass"].as_bool().unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    let mut lines = text.lines();
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&cols[..2], ["config_hash", "version"]);
    let hashes: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(hashes.len(), 3 * 2 * 12);
    assert!(hashes.iter().all(|h| *h == hashes[0] && h.len() == 16));
}

#[test]
fn seed_override_changes_hash_and_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "loc.toml", LOCALIZATION);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(gaussloc(&["run", &cfg, "--out", a.to_str().unwrap()], None).status.success());
    assert!(gaussloc(&["run", &cfg, "--seed", "2", "--out", b.to_str().unwrap()], None).status.success());
    let (ra, rb) = (fs::read_to_string(a.join("results.csv")).unwrap(), fs::read_to_string(b.join("results.csv")).unwrap());
    let first = |s: &str| s.lines().nth(1).unwrap().split(',').next().unwrap().to_owned();
    assert_ne!(first(&ra), first(&rb));
}

#[test]
fn malformed_delta_grid_is_rejected_with_field_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &LOCALIZATION.replace("[0.01, 0.1]", "[0.01, 2.0]"));
    let out = tmp.path().join("out");
    let o = gaussloc(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta[1]"));
    assert!(!out.exists());

    let cfg = write_config(tmp.path(), "typo.toml", &LOCALIZATION.replace("replicas", "replica"));
    let o = gaussloc(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replica"));
}

#[test]
fn summarize_writes_plot_schemas() {
    let tmp = TempDir::new().unwrap();
    for (name, text, cols) in [
        ("loc.toml", LOCALIZATION, "beta,delta,replica,a_delta_mass"),
        ("atoms.toml", ATOMS, "n,replica,max_atom,n_times_atom"),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        let out = tmp.path().join(name.trim_end_matches(".toml"));
        let o = gaussloc(&["run", &cfg, "--out", out.to_str().unwrap()], None);
        assert!(o.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(gaussloc(&["summarize", out.to_str().unwrap()], None).status.success());
        assert_eq!(header(&out.join("plot.csv")), cols);
    }
}

#[test]
fn summarize_empty_directory_fails_without_output() {
    let tmp = TempDir::new().unwrap();
    let o = gaussloc(&["summarize", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("plot.csv").exists());
}

#[test]
fn selftest_passes() {
    let o = gaussloc(&["selftest"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().count() >= 10);
    assert!(!stdout.contains("[FAIL]"));
}
