use std::process::Command;

fn newtonreg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_newtonreg"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn strip_runtime(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn example1_csv_is_reproducible() {
    let args = ["example1", "--deltas", "1e-2,1e-3", "--seeds", "0,1"];
    let a = newtonreg(&args);
    let b = newtonreg(&args);
    assert!(a.status.success());
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "delta,tau,filter,schedule,seed,n_delta,error,ratio,runtime_ms");
    assert_eq!(text.lines().count(), 5);
    assert_eq!(strip_runtime(&text), strip_runtime(&String::from_utf8(b.stdout).unwrap()));
}

#[test]
fn files_and_solution_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let dump = dir.path().join("sol.csv");
    let o = newtonreg(&[
        "example2",
        "--delta",
        "1e-2",
        "--seed",
        "4",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
        "--dump-solution",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["example"], "example2");
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
    let sol = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(sol.lines().next().unwrap(), "node,c_true,c_init,c_final");
    assert_eq!(sol.lines().count(), 101);
}

#[test]
fn invalid_input_exits_with_json_error() {
    let o = newtonreg(&["example1", "--tau", "0.9", "--seed", "0"]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "invalid_config");

    let o = newtonreg(&["example1", "--filter", "landweber", "--alpha0", "2", "--seed", "0"]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].is_string());
}

#[test]
fn other_subcommands_emit_json() {
    for args in [
        vec!["audit-schedule", "--n-max", "20"],
        vec!["source-check", "--m", "40"],
        vec!["verify-filters", "--filter", "tikhonov", "--tikhonov-order", "2", "--trials", "1"],
    ] {
        let o = newtonreg(&args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap();
    }
}
