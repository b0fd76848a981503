use std::process::Command;

fn intentctl(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_intentctl"))
        .args(args)
        .env_remove("PRIVACY_INTENT_ENDPOINT")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn apply_networking_sentence_passes() {
    let (code, stdout, _) =
        intentctl(&["apply", "Ensure that all traffic from host 2 to host 4 must traverse the backup switch s8."]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS path-waypoint"));
}

#[test]
fn apply_unknown_workload_exits_one_with_reason() {
    let (code, stdout, _) = intentctl(&["apply", "Prohibit financial database service deployment in the cloud zone."]);
    assert_eq!(code, 1);
    assert!(stdout.contains("unenforceable"), "{stdout}");
}

#[test]
fn bench_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let (code, stdout, stderr) = intentctl(&["bench", "--parallel", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["success_rate"], 100.0);
    assert_eq!(report["avg_tokens"], serde_json::Value::Null);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(intentctl(&["frobnicate"]).0, 2);
    assert_eq!(intentctl(&["bench", "--frontend", "magic"]).0, 2);
    // There is deliberately no flag for the credential.
    assert_eq!(intentctl(&["apply", "x", "--api-key", "secret"]).0, 2);
}

#[test]
fn runtime_errors_exit_one() {
    let (code, _, stderr) = intentctl(&["topo", "--topology", "/nonexistent/topology.json"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("error"));
    let (code, _, stderr) = intentctl(&["apply", "x", "--frontend", "llm"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--llm-endpoint"));
}

#[test]
fn topo_and_trace_print_state() {
    let (code, stdout, _) = intentctl(&["topo"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("5 nodes, 9 switches, 5 hosts, 30 links"));
    let (code, stdout, _) = intentctl(&["trace", "traffic from host 1 to host 3 must pass through s7"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("realized: h1 -> s1 -> s7"), "{stdout}");
}

#[test]
fn score_reports_full_match() {
    let (code, stdout, _) = intentctl(&["score"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("matched 30/30"));
}
