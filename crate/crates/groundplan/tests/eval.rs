mod common;

use std::fs;

use common::{embeddings, root};
use groundplan::eval::{evaluate_manifest, Manifest};
use groundplan::run::RunOptions;

#[test]
fn manifest_runs_are_deterministic_across_job_counts() {
    let m = Manifest::load(&root().join("eval_manifest.json")).unwrap();
    let o = RunOptions::new(embeddings());
    let a = evaluate_manifest(&m, &o, None, 1).unwrap();
    let b = evaluate_manifest(&m, &o, None, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.runs.len(), 60);
    assert_eq!(a.report.average_success_rate, 1.0);
}

#[test]
fn failing_entries_count_as_unsuccessful() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = serde_json::json!({
        "entries": [
            {"task_id": "recycle", "fixture": root().join("scenes/recycle.json"), "transcripts": [root().join("transcripts/recycle.json")], "runs": 2},
            {"task_id": "broken", "fixture": root().join("scenes/recycle.json"), "transcripts": [root().join("transcripts/jacket.json")], "runs": 3},
            {"task_id": "missing", "fixture": root().join("scenes/none.json"), "transcripts": [root().join("transcripts/jacket.json")], "runs": 1}
        ]
    });
    let path = tmp.path().join("m.json");
    fs::write(&path, manifest.to_string()).unwrap();
    let m = Manifest::load(&path).unwrap();
    let out = tmp.path().join("out");
    let r = evaluate_manifest(&m, &RunOptions::new(embeddings()), Some(&out), 2).unwrap();
    assert_eq!(r.report.task("recycle").unwrap().success_rate, 1.0);
    assert_eq!(r.report.task("broken").unwrap().success_rate, 0.0);
    assert_eq!(r.report.task("missing").unwrap().runs, 1);
    assert!((r.report.average_success_rate - 1.0 / 3.0).abs() < 1e-12);
    assert!(r
        .runs
        .iter()
        .filter(|x| x.task_id == "missing")
        .all(|x| x.exit_code == 2));
    assert!(out.join("broken/run_2/status.json").exists());
    assert!(fs::read_to_string(out.join("sr_table.txt"))
        .unwrap()
        .contains("broken"));
}

#[test]
fn manifest_goal_overrides_the_fixture_goal() {
    let tmp = tempfile::tempdir().unwrap();
    // the recycle plan leaves the paper in bin_1, never in bin_2
    let manifest = serde_json::json!({
        "entries": [{
            "task_id": "recycle",
            "fixture": root().join("scenes/recycle.json"),
            "transcripts": [root().join("transcripts/recycle.json")],
            "goal": [{"in": ["paper", "bin_2"]}]
        }]
    });
    let path = tmp.path().join("m.json");
    fs::write(&path, manifest.to_string()).unwrap();
    let m = Manifest::load(&path).unwrap();
    let r = evaluate_manifest(&m, &RunOptions::new(embeddings()), None, 1).unwrap();
    assert_eq!(r.report.task("recycle").unwrap().success_rate, 0.0);
    assert_eq!(r.runs[0].exit_code, 0);
}

#[test]
fn manifest_transcript_count_must_match_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.json");
    fs::write(
        &path,
        r#"{"entries": [{"task_id": "a", "fixture": "x.json", "transcripts": ["1.json", "2.json"], "runs": 3}]}"#,
    )
    .unwrap();
    assert_eq!(Manifest::load(&path).unwrap_err().exit_code(), 2);
}
