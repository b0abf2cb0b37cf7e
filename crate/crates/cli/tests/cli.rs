//! End-to-end behavior of the CLI: exit codes, the trajectory/eval
//! subcommands, and a few golden values.

use std::process::Command;

fn laxkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_laxkit"))
}

#[test]
fn unknown_suite_is_a_config_error() {
    let out = laxkit().args(["verify", "--suites", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_suite_list_is_a_config_error() {
    let out = laxkit().args(["verify"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_suite_runs_clean() {
    let out = laxkit()
        .args(["verify", "--suites", "special-functions", "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() >= 24);
}

#[test]
fn factorization_suite_with_flags() {
    let out = laxkit()
        .args([
            "verify",
            "--suites",
            "factorization",
            "--N",
            "2..3",
            "--classes",
            "rational,trig",
            "--points",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn root_system_preset_includes_negative_control() {
    let out = laxkit()
        .args(["verify", "--suites", "root-systems", "--preset", "Bn", "--N", "2..2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("isospectral-negative-control"));
    assert!(!stdout.contains("factorized-dn"));
}

#[test]
fn tolerance_override_can_fail_a_case() {
    let out = laxkit()
        .args([
            "verify",
            "--suites",
            "special-functions",
            "--tol",
            "fay-trisecant-tau0=1e-30",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evolve_free_model_is_linear() {
    let dir = std::env::temp_dir().join("laxkit-evolve-test");
    std::fs::create_dir_all(&dir).unwrap();
    let init = dir.join("init.json");
    std::fs::write(&init, r#"{"q": [[1.0, 0.0], [-1.0, 0.0]], "p": ["0.3", "-0.2"]}"#).unwrap();
    let traj = dir.join("traj.jsonl");
    let out = laxkit()
        .args([
            "evolve",
            "--model",
            "cm",
            "--class",
            "rational",
            "--spectral",
            "false",
            "--nu",
            "1e-13",
            "--initial",
            init.to_str().unwrap(),
            "--t-end",
            "1",
            "--output",
            traj.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&traj).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 3);
    // last trajectory record precedes the conservation table
    let last: serde_json::Value = serde_json::from_str(lines[lines.len() - 2]).unwrap();
    let t = last["t"].as_f64().unwrap();
    let q0 = last["q"][0][0].as_f64().unwrap();
    assert!((q0 - (1.0 + 0.3 * t)).abs() < 1e-8, "q0 = {q0} at t = {t}");
    let table: serde_json::Value = serde_json::from_str(lines[lines.len() - 1]).unwrap();
    assert!(table["conservation"]["eigenvalue_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn evolve_three_body_scattering_reports_small_drift() {
    let dir = std::env::temp_dir().join("laxkit-evolve-test4");
    std::fs::create_dir_all(&dir).unwrap();
    let init = dir.join("scatter.json");
    std::fs::write(
        &init,
        r#"{"q": [[1.2, 0.0], [-0.3, 0.25], [-1.4, 0.0]], "p": [[0.2, 0.0], [-0.1, 0.0], [0.3, -0.05]]}"#,
    )
    .unwrap();
    let traj = dir.join("traj.jsonl");
    let out = laxkit()
        .args([
            "evolve", "--model", "cm", "--class", "rational", "--spectral", "false",
            "--nu", "0.37", "--initial", init.to_str().unwrap(), "--t-end", "1",
            "--tol", "1e-10", "--output", traj.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&traj).unwrap();
    let table: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let drift = table["conservation"]["eigenvalue_drift"].as_f64().unwrap();
    assert!(drift < 1e-7, "eigenvalue drift {drift:e}");
    for pair in table["conservation"]["trace_drifts"].as_array().unwrap() {
        assert!(pair[1].as_f64().unwrap() < 1e-7);
    }
}

#[test]
fn evolve_malformed_initial_is_a_config_error() {
    let dir = std::env::temp_dir().join("laxkit-evolve-test2");
    std::fs::create_dir_all(&dir).unwrap();
    let init = dir.join("bad.json");
    std::fs::write(&init, "{notjson").unwrap();
    let out = laxkit()
        .args([
            "evolve", "--model", "cm", "--class", "rational", "--nu", "0.4",
            "--initial", init.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evolve_collision_exits_three() {
    let dir = std::env::temp_dir().join("laxkit-evolve-test3");
    std::fs::create_dir_all(&dir).unwrap();
    let init = dir.join("collide.json");
    // head-on approach into the attractive well
    std::fs::write(&init, r#"{"q": [[0.6, 0.0], [-0.6, 0.0]], "p": [[-1.4, 0.0], [1.4, 0.0]]}"#)
        .unwrap();
    let out = laxkit()
        .args([
            "evolve", "--model", "cm", "--class", "rational", "--spectral", "false",
            "--nu", "0.4", "--initial", init.to_str().unwrap(), "--t-end", "4",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("collision"));
}

#[test]
fn eval_golden_values() {
    // rational two-point kernel at (1, 1)
    let out = laxkit()
        .args(["eval", "phi", "--class", "rational", "--z", "1", "--eta", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("+2.0000000000000000"), "{text}");

    // odd theta at the frozen reference point
    let out = laxkit()
        .args(["eval", "theta", "--a", "0.5", "--b", "0.5", "--z", "0.3", "--tau", "i"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("-7.3719716371868"), "{text}");

    // the frozen rational CM Lax matrix
    let out = laxkit()
        .args([
            "eval", "lax", "--model", "cm", "--class", "rational", "--spectral", "false",
            "--q", "1,-1", "--p", "0,0", "--nu", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("-5.0000000000000000"), "{text}");
}

#[test]
fn thread_cap_is_honored() {
    let out = laxkit()
        .env("LAXKIT_THREADS", "1")
        .args(["verify", "--suites", "special-functions"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = laxkit()
        .env("LAXKIT_THREADS", "not-a-number")
        .args(["verify", "--suites", "special-functions"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
