use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(file)
}

fn hopp(args: &[&str], env: Option<(&str, &str)>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hopp"));
    cmd.args(args).env_remove("HOPP_SEED");
    if let Some((k, v)) = env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const SMALL: &str = r#"{
  "name": "small",
  "topology": { "kind": "clique", "n": 4 },
  "workload": { "kind": "publish_random", "interval_ms": 1000, "count": 20 },
  "duration_ms": 32000
}"#;

fn small(dir: &Path, expect: &str) -> PathBuf {
    let text = SMALL.replacen("\"duration_ms\"", &format!("\"expect\": {expect},\n  \"duration_ms\""), 1);
    let p = dir.join("small.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn same_seed_writes_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("paris-mini.json");
    for out in ["a", "b"] {
        let o = hopp(&["run", s.to_str().unwrap(), "--seed", "7", "--out", dir.path().join(out).to_str().unwrap()], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trace.jsonl", "summary.csv", "success.csv", "cdf_publish.csv"] {
        assert_eq!(read(&dir.path().join("a").join(f)), read(&dir.path().join("b").join(f)), "{f}");
    }
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = small(dir.path(), "{}");
    let p = path.to_str().unwrap();
    let out = |name: &str| dir.path().join(name);
    assert!(hopp(&["run", p, "--seed", "3", "--out", out("flag").to_str().unwrap()], None).status.success());
    assert!(hopp(&["run", p, "--seed", "99", "--out", out("env").to_str().unwrap()], Some(("HOPP_SEED", "3"))).status.success());
    assert!(hopp(&["run", p, "--seed", "4", "--out", out("other").to_str().unwrap()], None).status.success());
    let trace = |n: &str| read(&out(n).join("trace.jsonl"));
    assert_eq!(trace("flag"), trace("env"));
    assert_ne!(trace("flag"), trace("other"));
}

#[test]
fn replay_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let path = small(dir.path(), "{}");
    let run_out = dir.path().join("run");
    let replay_out = dir.path().join("replay");
    assert!(hopp(&["run", path.to_str().unwrap(), "--out", run_out.to_str().unwrap()], None).status.success());
    let o = hopp(
        &["replay", run_out.join("trace.jsonl").to_str().unwrap(), "--out", replay_out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    for f in ["summary.csv", "success.csv", "cdf_convergence.csv", "cdf_publish.csv", "cdf_alert.csv", "cdf_partition.csv"] {
        assert_eq!(read(&run_out.join(f)), read(&replay_out.join(f)), "{f}");
    }
}

#[test]
fn compare_never_favours_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let o = hopp(
        &["compare", scenario("ring-mini.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let csv = String::from_utf8(read(&dir.path().join("compare.csv"))).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let hopp: f64 = cells[3].parse().unwrap();
        let base: f64 = cells[6].parse().unwrap();
        assert!(hopp >= base, "{line}");
        rows += 1;
    }
    assert!(rows >= 4);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "bad", "topology": {"kind": "clique", "n": 4}, "loss": 2.0, "duration_ms": 1000}"#).unwrap();
    assert_eq!(hopp(&["run", bad.to_str().unwrap()], None).status.code(), Some(2));
    assert_eq!(hopp(&["run", dir.path().join("missing.json").to_str().unwrap()], None).status.code(), Some(2));

    let fine = small(dir.path(), r#"{"min_success_per_hop": 1.0}"#);
    let o = hopp(&["report", fine.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));

    let strict = small(dir.path(), r#"{"mean_publish_ms": [0, 1]}"#);
    let o = hopp(&["report", strict.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
