mod common;

use bpdmn::format::{
    parse_diagram, parse_document, serialize_diagram, serialize_document, ErrorKind, ParseOptions,
};
use bpdmn::model::Diagram;
use proptest::prelude::*;

const MINIMAL: &str =
    r#"{"bpdmn":"1.0","pools":[],"stores":[],"objects":[],"mappings":[],"message_flows":[]}"#;

#[test]
fn minimal_document_round_trips_through_the_empty_diagram() {
    let d = parse_diagram(MINIMAL).unwrap();
    assert!(d.is_empty());
    let text = serialize_diagram(&Diagram::empty());
    let compact: String = text.split_whitespace().collect();
    assert_eq!(compact, MINIMAL);
    assert!(text.ends_with("}\n"));
}

#[test]
fn travel_objects_carry_booking_variables() {
    let d = common::diagram("travel.bpdmn.json");
    let input = d.object("input").unwrap();
    for v in ["cardNumber", "carCompany", "hotelCompany"] {
        assert!(input.variable(v).is_some(), "{v}");
    }
}

#[test]
fn unknown_store_reference_is_dangling() {
    let text = common::read("handover_direct.bpdmn.json")
        .replace(r#""target": "ledger""#, r#""target": "vault""#);
    let err = parse_diagram(&text).unwrap_err();
    assert_eq!(err.kind, ErrorKind::DanglingReference);
    assert!(err.message.contains("vault"), "{err}");
    assert!(err.span.line > 1);
}

#[test]
fn every_fixture_reaches_a_canonical_fixed_point() {
    for name in common::all_fixtures() {
        let parsed = parse_document(&common::read(&name), ParseOptions::default()).unwrap();
        let once = serialize_document(&parsed.document);
        let again = parse_document(&once, ParseOptions::default()).unwrap();
        assert_eq!(serialize_document(&again.document), once, "{name}");
        assert_eq!(
            again.document.diagram.element_ids().len(),
            parsed.document.diagram.element_ids().len(),
            "{name}"
        );
    }
}

#[test]
fn canonical_form_orders_elements_by_id() {
    let text = serialize_diagram(&common::diagram("eco.bpdmn.json"));
    let eco = text.find(r#""id": "ECO_Data""#).unwrap();
    let form = text.find(r#""id": "Form_Data""#).unwrap();
    assert!(eco < form);

    let d = common::diagram("eco.bpdmn.json");
    let mut by_position: Vec<(usize, &str)> = d
        .objects()
        .iter()
        .map(|o| {
            (
                text.find(&format!(r#""id": "{}""#, o.id)).unwrap(),
                o.id.as_str(),
            )
        })
        .collect();
    by_position.sort();
    let in_text: Vec<&str> = by_position.iter().map(|(_, id)| *id).collect();
    let mut sorted = in_text.clone();
    sorted.sort();
    assert_eq!(in_text, sorted);
}

#[test]
fn behaviors_survive_the_round_trip() {
    let doc = common::document("travel.bpdmn.json");
    let b = doc.behaviors.as_ref().unwrap();
    let text = bpdmn::format::serialize_behaviors(b);
    let back = bpdmn::format::parse_behaviors(&text).unwrap();
    assert_eq!(bpdmn::format::serialize_behaviors(&back), text);
    assert_eq!(back.tasks.len(), b.tasks.len());
    assert_eq!(back.scenarios.len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,200}") {
        let _ = parse_diagram(&s);
    }

    #[test]
    fn mangled_fixtures_never_panic(cut in 0usize..4000, byte in any::<u8>()) {
        let mut bytes = common::read("travel.bpdmn.json").into_bytes();
        let at = cut % bytes.len();
        bytes[at] = byte;
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_document(&text, ParseOptions { lenient: true });
    }
}
