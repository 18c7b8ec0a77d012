mod common;

use std::collections::BTreeMap;

use bpdmn::expr::Value;
use bpdmn::model::{Diagram, DiagramParts, Node, NodeKind, ObjectAttachment, Pool, SequenceFlow};
use bpdmn::simulator::{
    self, Behaviors, Event, Policy, SimError, Simulator, Status, DEFAULT_MAX_STEPS,
};
use bpdmn::testkit::{check_data_gating, explore};

const CHECKS: [&str; 3] = ["check_hotel", "check_car", "check_flight"];

fn run_scenario(fixture: &str, scenario: &str) -> simulator::Run {
    let doc = common::document(fixture);
    let b = common::behaviors(&doc);
    let inputs = common::scenario(&doc, scenario);
    simulator::run(
        &doc.diagram,
        &b,
        &inputs,
        DEFAULT_MAX_STEPS,
        Policy::SmallestId,
    )
    .unwrap()
}

fn run_plain(fixture: &str) -> simulator::Run {
    let doc = common::document(fixture);
    let b = common::behaviors(&doc);
    simulator::run(
        &doc.diagram,
        &b,
        &BTreeMap::new(),
        DEFAULT_MAX_STEPS,
        Policy::SmallestId,
    )
    .unwrap()
}

fn bound_at(run: &simulator::Run, object: &str, var: &str) -> Vec<(u64, Value)> {
    run.trace
        .entries
        .iter()
        .filter_map(|e| match &e.event {
            Event::ObjectBound {
                object: o,
                variable: Some(v),
                value,
            } if o == object && v == var => Some((e.step, value.clone())),
            _ => None,
        })
        .collect()
}

fn step_of(run: &simulator::Run, node: &str) -> Option<u64> {
    run.trace.entries.iter().find_map(|e| match &e.event {
        Event::NodeFired { node: n } if n == node => Some(e.step),
        _ => None,
    })
}

#[test]
fn init_binds_the_booking_request() {
    let doc = common::document("travel.bpdmn.json");
    let b = common::behaviors(&doc);
    let sim = Simulator::new(&doc.diagram, &b).unwrap();
    let (state, _) = sim.init(&common::scenario(&doc, "valid-card")).unwrap();
    let input = &state.bindings["input"];
    for var in [
        "cardNumber",
        "cardType",
        "hotelCompany",
        "carCompany",
        "flightCompany",
    ] {
        assert!(matches!(input.get(var), Some(Value::Str(_))), "{var}");
    }
    assert_eq!(input.get("loyaltyNumber"), Some(&Value::Null));
}

#[test]
fn init_rejects_missing_and_unknown_inputs() {
    let doc = common::document("travel.bpdmn.json");
    let b = common::behaviors(&doc);
    let sim = Simulator::new(&doc.diagram, &b).unwrap();
    let mut inputs = common::scenario(&doc, "valid-card");
    inputs.remove("input.cardType");
    assert_eq!(
        sim.init(&inputs).unwrap_err(),
        SimError::MissingInput("input.cardType".into())
    );
    let mut inputs = common::scenario(&doc, "valid-card");
    inputs.insert("input.pin".into(), Value::Num(1.0));
    assert!(matches!(sim.init(&inputs), Err(SimError::UnknownInput(_))));
}

#[test]
fn empty_diagram_has_no_start() {
    let d = Diagram::empty();
    let b = Behaviors::default();
    let sim = Simulator::new(&d, &b).unwrap();
    assert_eq!(
        sim.init(&BTreeMap::new()).unwrap_err(),
        SimError::NoStartEvent
    );
}

#[test]
fn unbound_required_input_blocks_a_task() {
    let doc = common::document("deadlock.bpdmn.json");
    let b = common::behaviors(&doc);
    let sim = Simulator::new(&doc.diagram, &b).unwrap();
    let (mut state, _) = sim.init(&BTreeMap::new()).unwrap();
    sim.fire(&mut state, "triage").unwrap();
    assert!(state.tokens.contains_key("f2"));
    assert!(!sim.is_enabled(&state, "answer"));
    assert!(sim.enabled(&state).is_empty());
}

#[test]
fn optional_input_does_not_block() {
    let mut parts = common::diagram("deadlock.bpdmn.json").into_parts();
    let f2 = parts.pools[0]
        .sequence_flows
        .iter_mut()
        .find(|f| f.id == "f2")
        .unwrap();
    f2.attachments = vec![ObjectAttachment::optional_input("diagnosis")];
    let d = Diagram::from_parts(parts).unwrap();
    let b = Behaviors::default();
    let sim = Simulator::new(&d, &b).unwrap();
    let (mut state, _) = sim.init(&BTreeMap::new()).unwrap();
    sim.fire(&mut state, "triage").unwrap();
    assert!(sim.is_enabled(&state, "answer"));
    let trace = sim.fire(&mut state, "answer").unwrap();
    assert!(trace.entries.iter().any(|e| matches!(
        &e.event,
        Event::ObjectBound { object, value: Value::Null, .. } if object == "diagnosis"
    )));
}

#[test]
fn parallel_join_waits_for_both_branches() {
    let doc = common::document("diamond.bpdmn.json");
    let b = common::behaviors(&doc);
    let sim = Simulator::new(&doc.diagram, &b).unwrap();
    let (mut state, _) = sim.init(&BTreeMap::new()).unwrap();
    sim.fire(&mut state, "split").unwrap();
    sim.fire(&mut state, "quote_a").unwrap();
    assert!(!sim.is_enabled(&state, "join"));
    sim.fire(&mut state, "quote_b").unwrap();
    assert!(sim.is_enabled(&state, "join"));
}

#[test]
fn firing_a_disabled_node_is_an_error() {
    let doc = common::document("diamond.bpdmn.json");
    let b = common::behaviors(&doc);
    let sim = Simulator::new(&doc.diagram, &b).unwrap();
    let (mut state, _) = sim.init(&BTreeMap::new()).unwrap();
    assert_eq!(
        sim.fire(&mut state, "join").unwrap_err(),
        SimError::NotEnabled("join".into())
    );
}

#[test]
fn hotel_request_is_mapped_from_the_booking() {
    let run = run_scenario("travel.bpdmn.json", "valid-card");
    let hotel = step_of(&run, "check_hotel").unwrap();
    assert!(step_of(&run, "check_cc").unwrap() < hotel);
    assert_eq!(
        bound_at(&run, "hotel_request", "name"),
        [(hotel, Value::Str("Hilton".into()))]
    );
}

#[test]
fn valid_card_books_the_trip() {
    let run = run_scenario("travel.bpdmn.json", "valid-card");
    assert_eq!(run.status, Status::Completed);
    for c in CHECKS.iter().chain(&["check_cc"]) {
        assert_eq!(run.trace.fire_count(c), 1, "{c}");
    }
    assert_eq!(run.trace.inserts("archive"), 1);
    assert_eq!(run.state.stores["archive"].len(), 1);
    assert_eq!(run.trace.fire_count("reject"), 0);
}

#[test]
fn invalid_card_never_reaches_the_checks() {
    let run = run_scenario("travel.bpdmn.json", "invalid-card");
    assert_eq!(run.status, Status::Completed);
    for c in CHECKS {
        assert_eq!(run.trace.fire_count(c), 0, "{c}");
    }
    assert_eq!(run.trace.fire_count("reject"), 1);
    assert_eq!(run.trace.inserts("archive"), 0);

    let doc = common::document("travel.bpdmn.json");
    let b = common::behaviors(&doc);
    let inputs = common::scenario(&doc, "invalid-card");
    let outcomes = explore(&doc.diagram, &b, &inputs, 64).unwrap();
    assert!(!outcomes.is_empty());
    for fired in outcomes {
        assert!(CHECKS.iter().all(|c| !fired.contains(*c)), "{fired:?}");
    }
}

#[test]
fn failed_eco_check_notifies_and_stops() {
    let run = run_scenario("eco.bpdmn.json", "failure");
    assert_eq!(run.status, Status::Completed);
    assert_eq!(run.trace.fire_count("notify"), 1);
    assert_eq!(run.trace.fire_count("process_eco"), 0);
    assert_eq!(
        bound_at(&run, "Checked_Data", "ok").last().unwrap().1,
        Value::Bool(false)
    );

    let ok = run_scenario("eco.bpdmn.json", "success");
    assert_eq!(ok.trace.fire_count("process_eco"), 1);
    assert_eq!(ok.trace.fire_count("notify"), 0);
}

#[test]
fn plain_control_flow_keeps_order() {
    let run = run_plain("handover_direct.bpdmn.json");
    assert!(step_of(&run, "prepare").unwrap() < step_of(&run, "approve").unwrap());
}

#[test]
fn cycle_without_a_start_token_deadlocks_at_once() {
    let mut pool = Pool::new("p", "Loop");
    pool.nodes
        .push(Node::new("s", "Start", NodeKind::StartEventNone));
    pool.nodes.push(Node::new("a", "A", NodeKind::Task));
    pool.nodes.push(Node::new("b", "B", NodeKind::Task));
    pool.nodes.push(Node::new("e", "End", NodeKind::EndEvent));
    for (id, s, t) in [
        ("f1", "s", "a"),
        ("f2", "a", "b"),
        ("f3", "b", "a"),
        ("f4", "b", "e"),
    ] {
        pool.sequence_flows.push(SequenceFlow::new(id, s, t));
    }
    let d = Diagram::from_parts(DiagramParts {
        pools: vec![pool],
        ..DiagramParts::default()
    })
    .unwrap();
    let run = simulator::run(
        &d,
        &Behaviors::default(),
        &BTreeMap::new(),
        100,
        Policy::SmallestId,
    )
    .unwrap();
    assert_eq!(run.status, Status::Deadlocked);
    assert!(run.trace.entries.is_empty());
    assert_eq!(run.state.step_count, 0);
}

#[test]
fn implementation_models_run_to_completion() {
    for name in [
        "handover_direct",
        "handover_shared_store",
        "handover_global",
    ] {
        let run = run_plain(&format!("{name}.bpdmn.json"));
        assert_eq!(run.status, Status::Completed, "{name}");
    }
    let global = run_plain("handover_global.bpdmn.json");
    assert_eq!(
        bound_at(&global, "invoice_doc", "total").last().unwrap().1,
        Value::Num(42.0)
    );
}

#[test]
fn terminal_statuses() {
    assert_eq!(run_plain("deadlock.bpdmn.json").status, Status::Deadlocked);
    let doc = common::document("travel.bpdmn.json");
    let b = common::behaviors(&doc);
    let inputs = common::scenario(&doc, "valid-card");
    let run = simulator::run(&doc.diagram, &b, &inputs, 1, Policy::SmallestId).unwrap();
    assert_eq!(run.status, Status::StepLimit);
    assert_eq!(run.state.step_count, 1);
}

#[test]
fn runs_are_deterministic() {
    let doc = common::document("travel.bpdmn.json");
    let b = common::behaviors(&doc);
    let inputs = common::scenario(&doc, "valid-card");
    for policy in [Policy::SmallestId, Policy::Random { seed: 5 }] {
        let a = simulator::run(&doc.diagram, &b, &inputs, 100, policy).unwrap();
        let c = simulator::run(&doc.diagram, &b, &inputs, 100, policy).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.trace.to_text(), c.trace.to_text());
    }
}

#[test]
fn traces_respect_data_and_store_counts() {
    for name in common::all_fixtures() {
        let doc = common::document(&name);
        let Some(b) = &doc.behaviors else { continue };
        let inputs = b
            .scenarios
            .first()
            .map(|s| s.inputs.iter().cloned().collect())
            .unwrap_or_default();
        for seed in 0..5 {
            let run =
                simulator::run(&doc.diagram, b, &inputs, 500, Policy::Random { seed }).unwrap();
            check_data_gating(&doc.diagram, &run.trace).unwrap_or_else(|e| panic!("{name}: {e}"));
            let steps: Vec<u64> = run
                .trace
                .entries
                .iter()
                .filter(|e| matches!(e.event, Event::NodeFired { .. }))
                .map(|e| e.step)
                .collect();
            assert!(steps.windows(2).all(|w| w[0] < w[1]), "{name}");
            for s in doc.diagram.stores() {
                let size = run.state.stores.get(&s.id).map_or(0, Vec::len);
                assert_eq!(run.trace.inserts(&s.id), size, "{name}: {}", s.id);
            }
        }
    }
}
