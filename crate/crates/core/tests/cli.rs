mod common;

use common::{fixture, free_port, run_isol, ServeProcess};
use isol::scoring::AnswerSet;
use isol::taxonomy::builtin_iso27001;
use reqwest::blocking::Client;
use serde_json::{json, Value};

#[test]
fn validate_exit_codes() {
    let (code, out, _) = run_isol(["validate".as_ref(), fixture("iso27001.json").as_os_str()]);
    assert_eq!(code, 0);
    assert!(out.contains("6 domains, 21 controls"));

    let dir = tempfile::tempdir().unwrap();
    let dup = dir.path().join("dup.json");
    let src = std::fs::read_to_string(fixture("iso27001.json"))
        .unwrap()
        .replace("\"policy.5.1.1.q2\"", "\"policy.5.1.1.q1\"");
    std::fs::write(&dup, src).unwrap();
    let (code, out, _) = run_isol(["validate".as_ref(), dup.as_os_str()]);
    assert_eq!(code, 1);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("duplicate_id policy.5.1.1.q1"));

    let (code, _, err) = run_isol(["validate", "/no/such/file.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read"));

    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{ \"id\": ").unwrap();
    let (code, _, err) = run_isol(["validate".as_ref(), garbled.as_os_str()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 1"));
}

#[test]
fn score_all_fours() {
    let (code, out, _) = run_isol(["score".as_ref(), fixture("answers-all-4.json").as_os_str()]);
    assert_eq!(code, 0);
    assert!(out.contains("overall: 4.00 / 100% / excellent"), "{out}");
}

#[test]
fn score_worked_example() {
    let (code, out, _) = run_isol([
        "score".as_ref(),
        fixture("answers-example.json").as_os_str(),
        "--histogram".as_ref(),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("  policy 4.00 (priority 0.00)\n"), "{out}");
    assert!(out.contains("  knowledge 2.33 (priority 1.67)\n"));
    assert!(out.contains("strongest: policy, organization\n"));
    assert!(out.contains("weakest: stakeholder\n"));
    assert!(out.contains(&format!("policy           |{}| 4.00", "#".repeat(40))));
}

#[test]
fn score_formats() {
    let answers = fixture("answers-example.json");
    let (code, csv, _) = run_isol(["score".as_ref(), answers.as_os_str(), "--format".as_ref(), "csv".as_ref()]);
    assert_eq!(code, 0);
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(csv.lines().nth(6).unwrap(), "knowledge,Knowledge,2.33,1.67");

    let (code, csv, _) = run_isol([
        "score".as_ref(),
        answers.as_os_str(),
        "--format".as_ref(),
        "csv".as_ref(),
        "--level".as_ref(),
        "controls".as_ref(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(csv.lines().count(), 22);

    let (code, doc, _) = run_isol(["score".as_ref(), answers.as_os_str(), "--format".as_ref(), "json".as_ref()]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&doc).unwrap();
    assert_eq!(v["summary"]["weakest_domains"], json!(["stakeholder"]));
    assert!(v.get("histogram").is_none());
    let (_, again, _) = run_isol(["score".as_ref(), answers.as_os_str(), "--format".as_ref(), "json".as_ref()]);
    assert_eq!(doc, again);
}

#[test]
fn score_incomplete_and_invalid_answers() {
    let def = builtin_iso27001();
    let dir = tempfile::tempdir().unwrap();
    let mut answers = AnswerSet::uniform(&def, 3);
    for id in ["policy.5.1.1.q1", "culture.13.2.1.q2"] {
        answers.answers.remove(id);
    }
    let partial = dir.path().join("partial.json");
    std::fs::write(&partial, serde_json::to_string(&answers).unwrap()).unwrap();

    let (code, _, err) = run_isol(["score".as_ref(), partial.as_os_str()]);
    assert_eq!(code, 1);
    assert!(err.contains("policy.5.1.1.q1") && err.contains("culture.13.2.1.q2"));

    let (code, out, _) = run_isol([
        "score".as_ref(),
        partial.as_os_str(),
        "--mode".as_ref(),
        "provisional".as_ref(),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("mode: provisional"));
    assert!(out.contains("overall: 3.00 / 75% / above average"));

    answers.insert("policy.5.1.1.q1", 5);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&answers).unwrap()).unwrap();
    let (code, _, err) = run_isol(["score".as_ref(), bad.as_os_str()]);
    assert_eq!(code, 2);
    assert!(err.contains("outside the scale"));

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "[1, 2").unwrap();
    let (code, _, _) = run_isol(["score".as_ref(), junk.as_os_str()]);
    assert_eq!(code, 2);

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, r#"{"framework_id": "iso27001", "answers": {}}"#).unwrap();
    let (code, out, _) = run_isol(["score".as_ref(), empty.as_os_str(), "--mode".as_ref(), "provisional".as_ref()]);
    assert_eq!(code, 0);
    assert!(out.contains("overall: no result"));
}

#[test]
fn score_with_framework_file() {
    let (code, out, _) = run_isol([
        "score".as_ref(),
        fixture("answers-all-4.json").as_os_str(),
        "--framework".as_ref(),
        fixture("iso27001.json").as_os_str(),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("4.00 / 100% / excellent"));
}

#[test]
fn serve_on_occupied_port_fails() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run_isol(["serve".as_ref(), "--port".as_ref(), port.as_ref(), "--data-dir".as_ref(), dir.path().as_os_str()]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot bind"));
}

#[test]
fn serve_reports_corrupt_log() {
    let dir = tempfile::tempdir().unwrap();
    let good = r#"{"event_type":"user_created","timestamp":"2026-10-15T09:00:00Z","payload":{"user_id":"a","display_name":"A"}}"#;
    std::fs::write(dir.path().join("events.jsonl"), format!("{good}\n{{oops\n{good}\n")).unwrap();
    let port = free_port().to_string();
    let (code, _, err) = run_isol(["serve".as_ref(), "--port".as_ref(), port.as_ref(), "--data-dir".as_ref(), dir.path().as_os_str()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains(&format!("last good offset {}", good.len() + 1)), "{err}");
}

#[test]
fn serve_empty_data_dir_has_builtin_only_and_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let http = Client::new();
    let server = ServeProcess::start(dir.path(), &[]);
    let list: Value = http.get(format!("{}/api/frameworks", server.base)).send().unwrap().json().unwrap();
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["id"], "iso27001");

    http.post(format!("{}/api/users", server.base))
        .json(&json!({"user_id": "alice"}))
        .send()
        .unwrap();
    let session: Value = http
        .post(format!("{}/api/sessions", server.base))
        .json(&json!({"user_id": "alice", "framework_id": "iso27001"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let id = session["session_id"].as_str().unwrap();
    for (i, leaf) in builtin_iso27001().leaves().enumerate() {
        let r = http
            .put(format!("{}/api/sessions/{id}/answers/{}", server.base, leaf.id))
            .json(&json!({"grade": (i % 5) as i64}))
            .send()
            .unwrap();
        assert!(r.status().is_success());
    }
    let r = http.post(format!("{}/api/sessions/{id}/finalize", server.base)).send().unwrap();
    assert!(r.status().is_success());
    let before = http.get(format!("{}/api/sessions/{id}/result", server.base)).send().unwrap().bytes().unwrap();
    server.stop();

    let server = ServeProcess::start(dir.path(), &[]);
    let after = http.get(format!("{}/api/sessions/{id}/result", server.base)).send().unwrap().bytes().unwrap();
    assert_eq!(before, after);
}

#[test]
fn serve_loads_extra_frameworks() {
    let dir = tempfile::tempdir().unwrap();
    let extra = dir.path().join("mini.json");
    let src = std::fs::read_to_string(fixture("iso27001.json"))
        .unwrap()
        .replacen("\"id\": \"iso27001\"", "\"id\": \"iso27001-copy\"", 1);
    std::fs::write(&extra, src).unwrap();
    let server = ServeProcess::start(&dir.path().join("data"), &["--framework", extra.to_str().unwrap()]);
    let list: Value = Client::new()
        .get(format!("{}/api/frameworks", server.base))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let ids: Vec<_> = list.as_array().unwrap().iter().map(|f| f["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["iso27001", "iso27001-copy"]);
}

#[test]
fn demo_writes_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run_isol(["demo".as_ref(), "--out".as_ref(), dir.path().as_os_str()]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);
    for name in ["iso27001.json", "answers-example.json", "answers-all-4.json"] {
        let written = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(written, std::fs::read_to_string(fixture(name)).unwrap(), "{name}");
    }
}
