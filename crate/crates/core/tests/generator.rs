use bpdmn::format::{parse_diagram, serialize_diagram};
use bpdmn::simulator::{self, Behaviors, Policy, Status};
use bpdmn::testkit::{check_data_gating, default_inputs, explore, random_diagram, GenConfig};
use bpdmn::validator::validate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn generated_diagrams_validate() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..300 {
        let d = random_diagram(&mut rng, GenConfig::default());
        let diags = validate(&d);
        assert!(
            diags
                .iter()
                .all(|x| x.severity != bpdmn::validator::Severity::Error),
            "diagram {i}: {diags:?}\n{}",
            serialize_diagram(&d)
        );
    }
}

#[test]
fn generated_diagrams_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let d = random_diagram(&mut rng, GenConfig::default());
        let text = serialize_diagram(&d);
        let back = parse_diagram(&text).expect("serialized output parses");
        assert_eq!(serialize_diagram(&back), text);
    }
}

#[test]
fn generated_diagrams_run_and_respect_data_gating() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = Behaviors::default();
    for i in 0..200 {
        let d = random_diagram(&mut rng, GenConfig::default());
        let inputs = default_inputs(&d);
        for seed in 0..3 {
            let run = simulator::run(&d, &b, &inputs, 500, Policy::Random { seed })
                .unwrap_or_else(|e| panic!("diagram {i}: {e}\n{}", serialize_diagram(&d)));
            check_data_gating(&d, &run.trace)
                .unwrap_or_else(|e| panic!("diagram {i}: {e}\n{}", serialize_diagram(&d)));
            assert_ne!(run.status, Status::StepLimit, "diagram {i}");
        }
    }
}

#[test]
fn small_diagrams_are_confluent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = Behaviors::default();
    let mut checked = 0;
    while checked < 60 {
        let d = random_diagram(&mut rng, GenConfig::small());
        if d.nodes().count() > 8 {
            continue;
        }
        checked += 1;
        let inputs = default_inputs(&d);
        let run = simulator::run(&d, &b, &inputs, 100, Policy::SmallestId).unwrap();
        let fired: std::collections::BTreeSet<String> =
            run.trace.fired().into_iter().map(str::to_string).collect();
        let all = explore(&d, &b, &inputs, 100).unwrap();
        assert_eq!(all.len(), 1, "{}", serialize_diagram(&d));
        assert!(all.contains(&fired));
    }
}
