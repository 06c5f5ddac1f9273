mod common;

use std::fs;

use common::{root, scene, TASKS};
use groundplan::fixture::{
    decode_pgm16, encode_pgm16, fixture_to_json, load_fixture, parse_fixture, FixtureError,
};
use groundplan_core::exec::WorldState;

#[test]
fn shipped_fixtures_load_and_round_trip() {
    for id in TASKS {
        let loaded = load_fixture(&scene(id)).unwrap();
        assert_eq!(loaded.task_id.as_deref(), Some(id));
        assert!(loaded.provenance.is_some(), "{id}: provenance");
        let again = parse_fixture(&fixture_to_json(&loaded)).unwrap();
        assert_eq!(again, loaded, "{id}");
    }
}

#[test]
fn goals_do_not_hold_initially() {
    for id in TASKS {
        let loaded = load_fixture(&scene(id)).unwrap();
        let world = WorldState::from_fixture(&loaded.scene);
        world.check_invariants().unwrap();
        let goal = groundplan_core::exec::GoalPredicate::new(loaded.scene.goal.clone());
        assert!(!goal.atoms.is_empty(), "{id}");
        assert!(!goal.holds(&world), "{id}");
    }
}

#[test]
fn pgm_round_trip_and_rejects() {
    let depth: Vec<u16> = (0..12).map(|i| i * 5000).collect();
    let bytes = encode_pgm16(4, 3, &depth);
    assert_eq!(decode_pgm16(&bytes).unwrap(), (4, 3, depth));
    assert!(decode_pgm16(b"P2\n1 1\n65535\n\x00\x00").is_err());
    assert!(decode_pgm16(b"P5\n2 2\n65535\n\x00\x00").is_err());
    assert!(decode_pgm16(b"P5\n1 1\n255\n\x00").is_err());
}

fn mutate(f: impl FnOnce(&mut serde_json::Value)) -> Result<(), FixtureError> {
    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(scene("recycle")).unwrap()).unwrap();
    f(&mut doc);
    parse_fixture(&doc.to_string()).map(|_| ())
}

#[test]
fn invalid_fixtures_are_rejected() {
    assert!(mutate(|_| {}).is_ok());
    assert!(mutate(|d| d["objects"][0]["bbox"] = serde_json::json!([150, 0, 170, 10])).is_err());
    assert!(mutate(|d| d["objects"][0]["mask"] = serde_json::json!([5, 5])).is_err());
    assert!(mutate(|d| d["goal"] = serde_json::json!([{"in": ["paper", "nowhere"]}])).is_err());
    assert!(mutate(|d| d["camera"]["fx"] = serde_json::json!(0.0)).is_err());
    assert!(mutate(|d| d["surprise"] = serde_json::json!(1)).is_err());
    assert!(mutate(|d| d["objects"][1]["name"] = serde_json::json!("paper")).is_err());
    assert!(
        mutate(|d| d["depth"] = serde_json::json!({"encoding": "inline", "values": [1, 2, 3]}))
            .is_err()
    );
}

#[test]
fn missing_file_is_an_io_error() {
    let e = load_fixture(&root().join("scenes/none.json")).unwrap_err();
    assert!(e.is_io());
}

#[test]
fn outcome_fixtures_flag_synthetic_steps() {
    for name in ["single_role", "multi_role"] {
        let f =
            groundplan::eval::load_outcome_fixture(&root().join(format!("outcomes/{name}.json")))
                .unwrap();
        assert_eq!(f.runs.len(), 60);
        assert!(f.runs.iter().all(|r| r.synthetic && r.steps > 0));
    }
}

#[test]
fn truncated_outcome_fixture_names_the_task() {
    let tmp = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root().join("outcomes/multi_role.json")).unwrap())
            .unwrap();
    doc["runs"].as_array_mut().unwrap().remove(0);
    let path = tmp.path().join("cut.json");
    fs::write(&path, doc.to_string()).unwrap();
    let e = groundplan::eval::load_outcome_fixture(&path)
        .unwrap_err()
        .to_string();
    assert!(e.contains("recycle"), "{e}");
}
