use std::path::Path;
use std::process::{Command, Output};

fn blicket(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blicket"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn blicket")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_replay_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&blicket(
        d,
        &[
            "run",
            "--objects",
            "4",
            "--agent",
            "oracle",
            "--rule",
            "disjunctive",
            "--seeds",
            "0..6",
            "--out",
            "oracle.jsonl",
        ],
    ));
    ok(&blicket(
        d,
        &[
            "run",
            "--objects",
            "4",
            "--agent",
            "random",
            "--rule",
            "disjunctive",
            "--seeds",
            "0,1,2,3",
            "--out",
            "random.jsonl",
        ],
    ));
    let replayed = ok(&blicket(
        d,
        &["replay", "--record", "oracle.jsonl", "--verify-bytes"],
    ));
    assert!(replayed.contains("6 record(s) reproduced"), "{replayed}");

    ok(&blicket(
        d,
        &[
            "analyze",
            "--records",
            "oracle.jsonl",
            "random.jsonl",
            "--out-csv",
            "summary.csv",
            "--progress-csv",
            "progress.csv",
            "--group-by",
            "agent,rule",
        ],
    ));
    let summary = std::fs::read_to_string(d.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("agent,rule,trials,"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().any(|r| r.starts_with("oracle,disjunctive,6,")));
    assert!(rows.iter().any(|r| r.starts_with("random,disjunctive,4,")));
    let progress = std::fs::read_to_string(d.join("progress.csv")).unwrap();
    assert_eq!(progress.lines().count(), 3);
}

#[test]
fn tampered_record_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&blicket(
        d,
        &[
            "run",
            "--objects",
            "3",
            "--agent",
            "oracle",
            "--rule",
            "conjunctive",
            "--seeds",
            "4",
            "--out",
            "r.jsonl",
        ],
    ));
    let text = std::fs::read_to_string(d.join("r.jsonl")).unwrap();
    std::fs::write(d.join("r.jsonl"), text.replacen("is now", "was", 1)).unwrap();
    assert!(!blicket(d, &["replay", "--record", "r.jsonl"])
        .status
        .success());
}

#[test]
fn scenarios_with_scripted_backend() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("script.json"),
        r#"[{"reply": "> True", "repeat": true}]"#,
    )
    .unwrap();
    std::fs::write(
        d.join("b.toml"),
        "kind = \"scripted\"\n[scripted]\nscript = \"script.json\"\n",
    )
    .unwrap();
    let out = ok(&blicket(
        d,
        &[
            "scenarios",
            "--variant",
            "conjunctive",
            "--reps",
            "3",
            "--backend-config",
            "b.toml",
            "--out",
            "s.json",
        ],
    ));
    assert!(
        out.contains("conjunctive_evidence: 1.000 answered True (3 of 3"),
        "{out}"
    );
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    assert_eq!(results[0]["answers"], serde_json::json!([true, true, true]));
}

#[test]
fn backend_file_rejects_inline_credentials() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("b.toml"),
        "kind = \"http\"\n[http]\nendpoint_url = \"http://127.0.0.1:9\"\nmodel_name = \"m\"\napi_key_env_var = \"K\"\napi_key = \"sk-secret\"\n",
    )
    .unwrap();
    let out = blicket(
        d,
        &[
            "run",
            "--objects",
            "3",
            "--agent",
            "chat",
            "--rule",
            "conjunctive",
            "--seeds",
            "0",
            "--backend-config",
            "b.toml",
            "--out",
            "r.jsonl",
        ],
    );
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).contains("sk-secret"));
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &[
            "run",
            "--objects",
            "3",
            "--agent",
            "oracle",
            "--rule",
            "xor",
            "--out",
            "r.jsonl",
        ][..],
        &[
            "run",
            "--objects",
            "3",
            "--agent",
            "chat",
            "--rule",
            "conjunctive",
            "--out",
            "r.jsonl",
        ],
        &[
            "run",
            "--objects",
            "3",
            "--agent",
            "oracle",
            "--rule",
            "conjunctive",
            "--seeds",
            "5..2",
            "--out",
            "r.jsonl",
        ],
    ] {
        assert!(!blicket(d, args).status.success(), "{args:?}");
    }
}

#[test]
fn trial_config_file_errors_do_not_echo_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("t.toml"),
        "num_objects = 3\nrule = \"conjunctive\"\nagent_kind = \"chat\"\n[backend]\nendpoint_url = \"http://127.0.0.1:9\"\nmodel_name = \"m\"\napi_key_env_var = \"K\"\nauthorization = \"Bearer sk-secret\"\n",
    )
    .unwrap();
    let out = blicket(
        d,
        &[
            "run", "--config", "t.toml", "--seeds", "0", "--out", "r.jsonl",
        ],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("t.toml:"), "{stderr}");
    assert!(!stderr.contains("sk-secret"), "{stderr}");
}
