use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn sphloc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphloc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SPHLOC_OUT")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn enumerate_shell_five_has_eight_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = sphloc(dir.path(), &["enumerate", "--dim", "2", "--shell", "5"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "8");
    let csv = std::fs::read_to_string(dir.path().join("enumerate.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows, ["-2,-1", "-2,1", "-1,-2", "-1,2", "1,-2", "1,2", "2,-1", "2,1"]);
    let j = read_json(&dir.path().join("enumerate.json"));
    assert_eq!(j["config"]["dim"], 2);
    assert!(j["version"].is_string());
}

#[test]
fn quick_selftest_is_clean_in_two_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let o = sphloc(dir.path(), &["selftest", "--dim", "2", "--quick"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&dir.path().join("selftest.json"));
    assert_eq!(j["result"]["total_violations"], 0);
    for c in j["result"]["checks"].as_array().unwrap() {
        assert_eq!(c["violations"], 0, "{}", c["name"]);
    }
}

#[test]
fn lemma2_report_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = sphloc(dir.path(), &["kernels", "--verify", "lemma2", "--kmax", "20", "--nmax", "20"]);
    assert!(o.status.success());
    let j = read_json(&dir.path().join("kernels_lemma2.json"));
    assert_eq!(j["result"]["violations"], 0);
    assert_eq!(j["config"]["k_max"], 20);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["localize", "--band", "64", "--grid", "256", "--lambdas", "100,1000,8193"];
    // The output directory is part of the embedded config, so compare after
    // running both from the same relative path.
    for dir in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_sphloc"))
            .args(args)
            .args(["--out", "run"])
            .current_dir(dir.path())
            .env_remove("SPHLOC_OUT")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["localize.json", "localize.csv"] {
        let x = std::fs::read(a.path().join("run").join(name)).unwrap();
        let y = std::fs::read(b.path().join("run").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let usage = sphloc(dir.path(), &["frobnicate"]);
    assert_eq!(usage.status.code(), Some(1));

    let config = sphloc(dir.path(), &["selftest", "--inner-radius", "2.0"]);
    assert_eq!(config.status.code(), Some(2));
    assert_eq!(stderr_error(&config)["error"]["kind"], "config");

    // In three dimensions the grouped shells can exceed the cardinality bound.
    let violation = sphloc(dir.path(), &["selftest", "--dim", "3", "--quick"]);
    assert_eq!(violation.status.code(), Some(3));
    assert_eq!(stderr_error(&violation)["error"]["exit_code"], 3);

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let io = sphloc(&blocker.join("sub"), &["enumerate", "--shell", "1"]);
    assert_eq!(io.status.code(), Some(4));
    assert_eq!(stderr_error(&io)["error"]["kind"], "io");
}

#[test]
fn flags_override_config_file_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# small run\ndim = 3\nseed = 7\n").unwrap();
    let env_out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_sphloc"))
        .args(["enumerate", "--shell", "3", "--dim", "2", "--config"])
        .arg(&conf)
        .env("SPHLOC_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success());
    // 3 = 1 + 1 + 1 has points in three dimensions but none in two.
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "0");
    let j = read_json(&env_out.join("enumerate.json"));
    assert_eq!(j["config"]["dim"], 2);
    assert_eq!(j["config"]["seed"], 7);

    std::fs::write(&conf, "no_such_key = 1\n").unwrap();
    let bad = sphloc(dir.path(), &["cutoff", "--config", conf.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}
