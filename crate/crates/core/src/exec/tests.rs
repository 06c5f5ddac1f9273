use super::*;
use crate::plan::{parse_plan, validate_plan, Placement, Primitive, Vocabulary};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use proptest::prelude::*;

use Primitive::{Drop, Grab, Navigate, Pull, Push};

fn obj(position: [f64; 3]) -> ObjectState {
    ObjectState {
        position,
        container: None,
        held: false,
        fixed: false,
        attributes: BTreeMap::new(),
    }
}

fn recycle_world() -> WorldState {
    let mut objects = BTreeMap::new();
    objects.insert("paper".into(), obj([-200.0, 80.0, 900.0]));
    objects.insert("can".into(), obj([0.0, 70.0, 950.0]));
    objects.insert("bin_1".into(), obj([-350.0, 120.0, 1000.0]));
    objects.insert("bin_2".into(), obj([350.0, 120.0, 1000.0]));
    WorldState {
        objects,
        robot: RobotState {
            position: [0.0; 3],
            holding: None,
        },
        regions: BTreeMap::new(),
        push_mm: 300.0,
        pull_mm: 300.0,
    }
}

fn act(p: Primitive, object: Option<&str>, target: Option<&str>) -> Action {
    Action::new(p, object, target, Placement::Inside)
}

fn recycle_actions() -> Vec<Action> {
    vec![
        act(Grab, Some("paper"), None),
        act(Drop, Some("paper"), Some("bin_1")),
        act(Grab, Some("can"), None),
        act(Drop, Some("can"), Some("bin_2")),
    ]
}

fn recycle_goal() -> GoalPredicate {
    GoalPredicate::new(vec![
        GoalAtom::In("paper".into(), "bin_1".into()),
        GoalAtom::In("can".into(), "bin_2".into()),
    ])
}

#[test]
fn grab_from_free_state() {
    let s = apply_step(&recycle_world(), &act(Grab, Some("can"), None)).unwrap();
    assert_eq!(s.robot.holding.as_deref(), Some("can"));
    assert!(s.objects["can"].held);
    s.check_invariants().unwrap();
}

#[test]
fn drop_into_container() {
    let s = apply_step(&recycle_world(), &act(Grab, Some("can"), None)).unwrap();
    let s = apply_step(&s, &act(Drop, Some("can"), Some("bin_2"))).unwrap();
    assert_eq!(s.objects["can"].container.as_deref(), Some("bin_2"));
    assert_eq!(s.objects["can"].position, [350.0, 120.0, 1000.0]);
    assert_eq!(s.robot.holding, None);
}

#[test]
fn gripper_occupied() {
    let s = apply_step(&recycle_world(), &act(Grab, Some("can"), None)).unwrap();
    assert_eq!(
        apply_step(&s, &act(Grab, Some("paper"), None)),
        Err(ExecFault::GripperOccupied("can".into()))
    );
}

#[test]
fn faults_on_bad_steps() {
    let w = recycle_world();
    assert_eq!(
        apply_step(&w, &act(Drop, Some("can"), Some("bin_2"))),
        Err(ExecFault::NotHolding("can".into()))
    );
    assert_eq!(
        apply_step(&w, &act(Grab, Some("cup"), None)),
        Err(ExecFault::UnknownObject("cup".into()))
    );
    assert!(matches!(
        apply_step(&w, &act(Grab, None, None)),
        Err(ExecFault::MissingArgument(Grab, _))
    ));
    let held = apply_step(&w, &act(Grab, Some("can"), None)).unwrap();
    assert_eq!(
        apply_step(&held, &act(Drop, Some("can"), Some("shelf"))),
        Err(ExecFault::UnknownTarget("shelf".into()))
    );
    assert_eq!(
        apply_step(&held, &act(Drop, Some("can"), Some("can"))),
        Err(ExecFault::SelfContainment("can".into()))
    );
    assert_eq!(
        apply_step(&held, &act(Push, Some("can"), None)),
        Err(ExecFault::ObjectHeld("can".into()))
    );
    let mut fixed = recycle_world();
    fixed.objects.get_mut("bin_1").unwrap().fixed = true;
    assert_eq!(
        apply_step(&fixed, &act(Grab, Some("bin_1"), None)),
        Err(ExecFault::NotGraspable("bin_1".into()))
    );
}

#[test]
fn push_and_pull_displace_along_depth() {
    let mut w = recycle_world();
    w.push_mm = 250.0;
    let s = apply_step(&w, &act(Push, Some("bin_1"), None)).unwrap();
    assert_eq!(s.objects["bin_1"].position, [-350.0, 120.0, 1250.0]);
    let s = apply_step(&s, &act(Pull, Some("bin_1"), None)).unwrap();
    assert_eq!(s.objects["bin_1"].position, [-350.0, 120.0, 950.0]);
}

#[test]
fn navigate_carries_held_object() {
    let s = apply_step(&recycle_world(), &act(Grab, Some("can"), None)).unwrap();
    let s = apply_step(&s, &act(Navigate, None, Some("bin_1"))).unwrap();
    assert_eq!(s.robot.position, [-350.0, 120.0, 1000.0]);
    assert_eq!(s.objects["can"].position, s.robot.position);
}

#[test]
fn drop_beside_robot() {
    let s = apply_step(&recycle_world(), &act(Grab, Some("can"), None)).unwrap();
    let s = apply_step(
        &s,
        &Action::new(Drop, Some("can"), Some(ROBOT), Placement::Right),
    )
    .unwrap();
    assert_eq!(s.objects["can"].position, [SIDE_OFFSET_MM, 0.0, 0.0]);
    assert_eq!(s.objects["can"].container, None);
}

#[test]
fn recycle_plan_succeeds_in_four_steps() {
    let out = evaluate(
        "recycle",
        &recycle_actions(),
        &recycle_world(),
        &recycle_goal(),
        FaultPolicy::Abort,
    );
    assert!(out.success);
    assert_eq!(out.steps_executed, 4);
    // Hand trace: goal becomes true only after the last drop.
    assert_eq!(out.goal_history(), [false, false, false, false, true]);
    assert!(trace_success(&out));
}

#[test]
fn undoing_the_goal_fails() {
    let mut actions = recycle_actions();
    actions.push(act(Grab, Some("can"), None));
    let out = evaluate(
        "recycle",
        &actions,
        &recycle_world(),
        &recycle_goal(),
        FaultPolicy::Abort,
    );
    assert!(!out.success);
    assert_eq!(out.steps_executed, 5);
    assert!(!trace_success(&out));
}

#[test]
fn empty_goal_always_succeeds() {
    let out = evaluate(
        "any",
        &[act(Push, Some("can"), None)],
        &recycle_world(),
        &GoalPredicate::default(),
        FaultPolicy::Abort,
    );
    assert!(out.success);
    let out = evaluate(
        "any",
        &[],
        &recycle_world(),
        &GoalPredicate::default(),
        FaultPolicy::Abort,
    );
    assert!(out.success && out.trace.is_empty());
}

#[test]
fn abort_and_continue_policies() {
    let actions = vec![
        act(Grab, Some("paper"), None),
        act(Grab, Some("can"), None),
        act(Drop, Some("paper"), Some("bin_1")),
    ];
    let goal = GoalPredicate::new(vec![GoalAtom::In("paper".into(), "bin_1".into())]);
    let out = evaluate("t", &actions, &recycle_world(), &goal, FaultPolicy::Abort);
    assert!(out.aborted && !out.success);
    assert_eq!(out.steps_executed, 1);
    assert_eq!(out.trace.len(), 2);
    assert_eq!(
        out.trace[1].fault,
        Some(ExecFault::GripperOccupied("paper".into()))
    );
    let out = evaluate(
        "t",
        &actions,
        &recycle_world(),
        &goal,
        FaultPolicy::Continue,
    );
    assert!(out.success && !out.aborted);
    assert_eq!(out.steps_executed, 2);
    assert!(out.steps_executed <= actions.len());
}

#[test]
fn parsed_plan_runs_end_to_end() {
    let mut labels = crate::grounding::GroundedLabelSet {
        classes: vec!["paper".into(), "can".into(), "bin".into()],
        ..Default::default()
    };
    for (n, c) in [
        ("paper", "paper"),
        ("can", "can"),
        ("bin_1", "bin"),
        ("bin_2", "bin"),
    ] {
        labels.instance_names.insert(n.into(), c.into());
    }
    labels
        .aliases
        .insert("crumpled paper".into(), "paper".into());
    labels
        .aliases
        .insert("recycling bin for paper".into(), "bin_1".into());
    labels
        .aliases
        .insert("recycling bin for plastic and metal".into(), "bin_2".into());
    let plan = parse_plan(
        "GRAB crumpled paper, DROP crumpled paper into recycling bin for paper, GRAB can, DROP can into recycling bin for plastic and metal",
    )
    .unwrap();
    let grasp = ["paper", "can"]
        .iter()
        .map(|n| {
            let g = crate::geometry::GraspPoint {
                instance_name: (*n).into(),
                position: [0.0; 3],
                support: 20,
            };
            ((*n).into(), g)
        })
        .collect();
    let v = validate_plan(&plan, &labels, &grasp, &Vocabulary::default());
    assert!(v.is_valid());
    let out = evaluate(
        "recycle",
        &v.actions(),
        &recycle_world(),
        &recycle_goal(),
        FaultPolicy::Abort,
    );
    assert!(out.success);
}

#[test]
fn goal_atoms() {
    let mut w = recycle_world();
    assert!(GoalAtom::LeftOf("bin_1".into(), "bin_2".into()).holds(&w));
    assert!(!GoalAtom::LeftOf("bin_2".into(), "bin_1".into()).holds(&w));
    assert!(!GoalAtom::LeftOf("bin_2".into(), "ghost".into()).holds(&w));
    w.regions.insert(
        "open".into(),
        Region {
            center: [0.0, 70.0, 650.0],
            radius: 100.0,
        },
    );
    let at = GoalAtom::At("can".into(), "open".into());
    assert!(!at.holds(&w));
    let pulled = apply_step(&w, &act(Pull, Some("can"), None)).unwrap();
    assert!(at.holds(&pulled));
    assert!(GoalAtom::Count("bin_1".into(), 0).holds(&w));

    w.objects
        .get_mut("can")
        .unwrap()
        .attributes
        .insert("height".into(), 120.0);
    w.objects
        .get_mut("paper")
        .unwrap()
        .attributes
        .insert("height".into(), 60.0);
    // Taller first along u: can (x=0) is right of paper (x=-200).
    let ordered = GoalAtom::OrderedBy("height".into(), Axis::U);
    assert!(!ordered.holds(&w));
    w.objects.get_mut("can").unwrap().position[0] = -400.0;
    assert!(ordered.holds(&w));
}

#[test]
fn evaluation_is_deterministic() {
    let a = evaluate(
        "recycle",
        &recycle_actions(),
        &recycle_world(),
        &recycle_goal(),
        FaultPolicy::Abort,
    );
    let b = evaluate(
        "recycle",
        &recycle_actions(),
        &recycle_world(),
        &recycle_goal(),
        FaultPolicy::Abort,
    );
    assert_eq!(a, b);
}

#[test]
fn achieved_and_kept_reading() {
    assert!(achieved_and_kept(&[false, true, true]));
    assert!(!achieved_and_kept(&[true, true, false]));
    assert!(achieved_and_kept(&[true, false, true]));
    assert!(!achieved_and_kept(&[]));
}

fn outcomes(task: &str, successes: usize, runs: usize, steps: &[usize]) -> Vec<RunOutcome> {
    (0..runs)
        .map(|i| RunOutcome::record(task, i < successes, steps[i % steps.len()]))
        .collect()
}

const TASKS: [&str; 6] = [
    "recycle",
    "order_by_height",
    "shelf_number",
    "shelf_material",
    "jacket",
    "exit",
];

fn table(successes: [usize; 6]) -> Vec<RunOutcome> {
    TASKS
        .iter()
        .zip(successes)
        .flat_map(|(t, s)| outcomes(t, s, 10, &[4]))
        .collect()
}

#[test]
fn multi_role_rates() {
    let report = success_rate(&table([8, 7, 8, 8, 9, 4]));
    let rates: Vec<f64> = report.tasks.iter().map(|t| t.success_rate).collect();
    assert_eq!(rates, [0.8, 0.7, 0.8, 0.8, 0.9, 0.4]);
    assert!((report.average_success_rate - 4.4 / 6.0).abs() < 1e-12);
    assert_eq!(format!("{:.2}", report.average_success_rate), "0.73");
    assert!(report.render_table().contains("Average SR"));
}

#[test]
fn single_role_rates() {
    let report = success_rate(&table([7, 2, 0, 0, 10, 0]));
    let rates: Vec<f64> = report.tasks.iter().map(|t| t.success_rate).collect();
    assert_eq!(rates, [0.7, 0.2, 0.0, 0.0, 1.0, 0.0]);
    assert_eq!(format!("{:.2}", report.average_success_rate), "0.32");
}

#[test]
fn all_success_group() {
    let report = success_rate(&outcomes("t", 10, 10, &[3]));
    assert_eq!(report.tasks[0].success_rate, 1.0);
    assert_eq!(report.tasks[0].steps_sd, 0.0);
}

#[test]
fn step_statistics_use_sample_deviation() {
    let runs = outcomes("t", 0, 4, &[2, 4, 4, 6]);
    let t = &success_rate(&runs).tasks[0];
    assert_eq!(t.steps_mean, 4.0);
    // Squared deviations 4 + 0 + 0 + 4 over n - 1 = 3.
    assert!((t.steps_sd - libm::sqrt(8.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn empty_group_warns() {
    let full = outcomes("a", 1, 2, &[1]);
    let refs: Vec<&RunOutcome> = full.iter().collect();
    let report = SrReport::from_groups([("a", refs.as_slice()), ("b", &[][..])]);
    assert_eq!(report.tasks.len(), 1);
    assert_eq!(
        report.warnings,
        [SrWarning::EmptyGroup {
            task_id: "b".into()
        }]
    );
}

#[test]
fn comparison_table_layout() {
    let single = success_rate(&table([7, 2, 0, 0, 10, 0]));
    let multi = success_rate(&table([8, 7, 8, 8, 9, 4]));
    let text = render_comparison(&[("Single-role", &single), ("Multi-role", &multi)]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[2].starts_with("recycle"));
    assert!(lines[9].starts_with("Average SR"));
    assert!(lines[9].ends_with("0.73"));
    assert!(lines[9].contains("0.32"));
    let widths: Vec<usize> = lines.iter().map(|l| l.len()).collect();
    assert!(widths.iter().all(|w| *w == widths[0]));
}

fn name() -> impl Strategy<Value = &'static str> {
    proptest::sample::select(vec!["paper", "can", "bin_1", "bin_2", "robot", "ghost"])
}

fn action() -> impl Strategy<Value = Action> {
    let placement = proptest::sample::select(vec![
        Placement::Inside,
        Placement::Right,
        Placement::Away,
        Placement::Above,
    ]);
    (0usize..5, name(), name(), placement)
        .prop_map(|(k, o, t, pl)| Action::new(Primitive::ALL[k], Some(o), Some(t), pl))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn legal_sequences_preserve_invariants(actions in proptest::collection::vec(action(), 0..12)) {
        let mut state = recycle_world();
        for a in &actions {
            match apply_step(&state, a) {
                Ok(next) => {
                    prop_assert!(next.check_invariants().is_ok(), "{:?}", next.check_invariants());
                    state = next;
                }
                Err(_) => prop_assert!(state.check_invariants().is_ok()),
            }
        }
    }
}

proptest! {
    #[test]
    fn final_state_matches_trace_reading(
        actions in proptest::collection::vec(action(), 0..10),
        continue_on_fault in any::<bool>(),
    ) {
        let policy = if continue_on_fault { FaultPolicy::Continue } else { FaultPolicy::Abort };
        let out = evaluate("t", &actions, &recycle_world(), &recycle_goal(), policy);
        prop_assert_eq!(out.success, trace_success(&out));
        prop_assert!(out.steps_executed <= actions.len());
    }

    #[test]
    fn concatenated_groups_are_weighted(a in 1usize..20, sa in 0usize..20, b in 1usize..20, sb in 0usize..20) {
        let (sa, sb) = (sa.min(a), sb.min(b));
        let mut runs = outcomes("t", sa, a, &[1]);
        runs.extend(outcomes("t", sb, b, &[1]));
        let whole = success_rate(&runs).tasks[0].success_rate;
        let ra = sa as f64 / a as f64;
        let rb = sb as f64 / b as f64;
        let weighted = (ra * a as f64 + rb * b as f64) / (a + b) as f64;
        prop_assert!((whole - weighted).abs() < 1e-12);
    }
}
