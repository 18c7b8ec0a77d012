use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bpdmn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpdmn"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn validate_exit_codes() {
    let ok = bpdmn(&["validate", "fixtures/travel.bpdmn.json"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).is_empty());

    let bad = bpdmn(&["validate", "fixtures/validator/bad-v1.bpdmn.json"]);
    assert_eq!(code(&bad), 1);
    let text = stdout(&bad);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].contains(": V1 error form: "), "{}", lines[0]);
    assert!(lines[0].starts_with("fixtures/validator/bad-v1.bpdmn.json:"));

    let missing = bpdmn(&["validate", "missing.json"]);
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("missing.json"));
}

#[test]
fn extension_is_optional() {
    assert_eq!(code(&bpdmn(&["validate", "fixtures/travel"])), 0);
}

#[test]
fn warnings_fail_only_in_strict_mode() {
    let path = "fixtures/validator/bad-v9.bpdmn.json";
    let lax = bpdmn(&["validate", path]);
    assert_eq!(code(&lax), 0);
    assert!(stdout(&lax).contains("V9 warning"));
    assert_eq!(code(&bpdmn(&["validate", "--strict", path])), 1);
}

#[test]
fn diagnostics_as_json_lines() {
    let out = bpdmn(&["--json", "validate", "fixtures/validator/bad-v3.bpdmn.json"]);
    assert_eq!(code(&out), 1);
    let record: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(record["rule"], "V3");
    assert_eq!(record["severity"], "error");
    assert!(record["line"].as_u64().unwrap() >= 1);
}

#[test]
fn syntax_errors_are_located() {
    let path = scratch("broken.bpdmn.json");
    fs::write(&path, "{\n  \"bpdmn\": \"1.0\",\n  \"pools\": [\n}").unwrap();
    let out = bpdmn(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(":4:"), "{}", stderr(&out));
}

#[test]
fn translate_bpel_and_xpdl() {
    let bpel = bpdmn(&["translate", "fixtures/travel", "--to", "bpel"]);
    assert_eq!(code(&bpel), 0);
    assert!(stdout(&bpel).contains(r#"<assign name="dm1">"#));

    let target = scratch("eco.xpdl");
    let xpdl = bpdmn(&[
        "translate",
        "fixtures/eco",
        "--to",
        "xpdl",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(code(&xpdl), 0);
    assert!(stdout(&xpdl).is_empty());
    assert!(fs::read_to_string(&target)
        .unwrap()
        .contains(r#"Id="OracleDB.Device.deviceID""#));
}

#[test]
fn translate_is_repeatable() {
    let first = bpdmn(&["translate", "fixtures/travel", "--to", "xpdl"]);
    let second = bpdmn(&["translate", "fixtures/travel", "--to", "xpdl"]);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn translate_refuses_invalid_models_without_output() {
    let out = bpdmn(&[
        "translate",
        "fixtures/validator/bad-v5.bpdmn.json",
        "--to",
        "bpel",
    ]);
    assert_eq!(code(&out), 1);
    assert!(!stdout(&out).contains("<?xml"));
}

#[test]
fn simulate_exit_codes() {
    let ok = bpdmn(&["simulate", "fixtures/travel.bpdmn.json"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert!(stdout(&ok).contains("step 01: node_fired check_cc"));
    assert!(
        stdout(&ok).ends_with("status: completed after 9 steps\n"),
        "{}",
        stdout(&ok)
    );

    let stuck = bpdmn(&["simulate", "fixtures/deadlock.bpdmn.json"]);
    assert_eq!(code(&stuck), 3);
    assert!(stdout(&stuck).contains("deadlocked"));

    let limited = bpdmn(&["simulate", "fixtures/travel.bpdmn.json", "--max-steps", "1"]);
    assert_eq!(code(&limited), 4);
}

#[test]
fn simulate_scenarios_and_inputs() {
    let invalid = bpdmn(&["simulate", "fixtures/travel", "--scenario", "invalid-card"]);
    assert_eq!(code(&invalid), 0);
    assert!(stdout(&invalid).contains("node_fired reject"));
    assert!(!stdout(&invalid).contains("check_hotel"));

    let manual = bpdmn(&[
        "simulate",
        "fixtures/eco",
        "--input",
        "Request.deviceID=D1",
        "--input",
        "Request.componentID=C7",
    ]);
    assert_eq!(code(&manual), 0, "{}", stderr(&manual));
    assert!(stdout(&manual).contains("node_fired notify"));

    let unknown = bpdmn(&["simulate", "fixtures/travel", "--scenario", "nope"]);
    assert_eq!(code(&unknown), 1);
}

#[test]
fn simulate_json_trace() {
    let out = bpdmn(&["--json", "simulate", "fixtures/linear"]);
    assert_eq!(code(&out), 0);
    let records: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let last = records.last().unwrap();
    assert_eq!(last["status"], "completed");
    assert_eq!(last["steps"], 4);
    assert!(records
        .iter()
        .any(|r| r["event"] == "node_fired" && r["node"] == "pay"));
}

#[test]
fn random_policy_is_seeded() {
    let run = |seed: &str| {
        stdout(&bpdmn(&[
            "simulate",
            "fixtures/diamond",
            "--policy",
            "random",
            "--seed",
            seed,
        ]))
    };
    assert_eq!(run("9"), run("9"));
}

#[test]
fn pattern_matrix_row_seven() {
    let out = bpdmn(&["patterns", "--matrix"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("7. ")).unwrap();
    assert!(row.trim_end().ends_with("- +"), "{row}");
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('[') && !l.starts_with("pattern"))
        .count();
    assert_eq!(rows, 44);
}

#[test]
fn patterns_in_models() {
    let empty = scratch("empty.bpdmn.json");
    fs::write(
        &empty,
        r#"{"bpdmn":"1.0","pools":[],"stores":[],"objects":[],"mappings":[],"message_flows":[]}"#,
    )
    .unwrap();
    let out = bpdmn(&["patterns", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).trim().is_empty(), "{}", stdout(&out));

    let travel = stdout(&bpdmn(&["patterns", "fixtures/travel"]));
    assert!(travel.lines().any(|l| l.starts_with("32. ")));
    assert!(travel.lines().any(|l| l.starts_with("33. ")));

    let invalid = bpdmn(&["patterns", "fixtures/validator/bad-v1.bpdmn.json"]);
    assert_eq!(code(&invalid), 1);
}

#[test]
fn render_graphs() {
    let travel = stdout(&bpdmn(&["render", "fixtures/travel"]));
    let stores: Vec<&str> = travel
        .lines()
        .filter(|l| l.contains("shape=cylinder"))
        .collect();
    assert_eq!(stores.len(), 1);
    assert!(stores[0].contains("Archive (DB)"));

    let hidden = stdout(&bpdmn(&["render", "fixtures/travel", "--hide-data"]));
    assert!(!hidden.contains("shape=note"));

    let empty = scratch("empty-render.bpdmn.json");
    fs::write(
        &empty,
        r#"{"bpdmn":"1.0","pools":[],"stores":[],"objects":[],"mappings":[],"message_flows":[]}"#,
    )
    .unwrap();
    let dot = stdout(&bpdmn(&["render", empty.to_str().unwrap()]));
    assert!(!dot.contains("->") && !dot.contains("shape="), "{dot}");
}

#[test]
fn commands_leave_inputs_untouched() {
    let path = root().join("fixtures/travel.bpdmn.json");
    let before = fs::read(&path).unwrap();
    for args in [
        vec!["validate", "fixtures/travel"],
        vec!["translate", "fixtures/travel", "--to", "bpel"],
        vec!["simulate", "fixtures/travel"],
        vec!["patterns", "fixtures/travel"],
        vec!["render", "fixtures/travel"],
    ] {
        bpdmn(&args);
    }
    assert_eq!(fs::read(&path).unwrap(), before);
}

#[test]
fn lenient_mode_downgrades_unknown_keys() {
    let text = fs::read_to_string(root().join("fixtures/linear.bpdmn.json"))
        .unwrap()
        .replacen("{", "{\n  \"author\": \"someone\",", 1);
    let path = scratch("extra-key.bpdmn.json");
    fs::write(&path, text).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(code(&bpdmn(&["validate", p])), 2);
    let lenient = bpdmn(&["--lenient", "validate", p]);
    assert_eq!(code(&lenient), 0);
    assert!(stderr(&lenient).contains("author"));
}
