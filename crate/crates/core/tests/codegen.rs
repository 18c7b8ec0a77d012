mod common;

use std::collections::{BTreeSet, HashSet};

use bpdmn::codegen::{to_bpel, to_xpdl, CodegenError};
use bpdmn::model::{Diagram, VarType};
use bpdmn::validator::{has_errors, validate};
use roxmltree::{Document, Node};

fn valid_fixtures() -> Vec<(String, Diagram)> {
    common::all_fixtures()
        .into_iter()
        .map(|n| {
            let d = common::diagram(&n);
            (n, d)
        })
        .filter(|(_, d)| !has_errors(&validate(d)))
        .collect()
}

fn elements<'a>(doc: &'a Document<'a>, name: &str) -> Vec<Node<'a, 'a>> {
    doc.descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == name)
        .collect()
}

fn travel_bpel() -> String {
    to_bpel(&common::diagram("travel.bpdmn.json")).unwrap().text
}

#[test]
fn bpel_declares_message_variables() {
    let text = travel_bpel();
    let doc = Document::parse(&text).unwrap();
    let vars = elements(&doc, "variable");
    let find = |name: &str| {
        vars.iter()
            .find(|v| v.attribute("name") == Some(name))
            .unwrap()
    };
    assert_eq!(find("input").attribute("messageType"), Some("input"));
    assert_eq!(
        find("request").attribute("messageType"),
        Some("doCreditCardCheckingRequest")
    );
    assert_eq!(elements(&doc, "variables").len(), 1);
}

#[test]
fn bpel_assign_copies_card_parts() {
    let text = travel_bpel();
    let doc = Document::parse(&text).unwrap();
    let dm1 = elements(&doc, "assign")
        .into_iter()
        .find(|a| a.attribute("name") == Some("dm1"))
        .unwrap();
    let copies: Vec<Node> = dm1.children().filter(|c| c.has_tag_name("copy")).collect();
    assert_eq!(copies.len(), 2);
    for (copy, part) in copies.iter().zip(["cardNumber", "cardType"]) {
        let from = copy.children().find(|c| c.has_tag_name("from")).unwrap();
        let to = copy.children().find(|c| c.has_tag_name("to")).unwrap();
        assert_eq!(from.attribute("variable"), Some("input"));
        assert_eq!(from.attribute("part"), Some(part));
        assert_eq!(to.attribute("variable"), Some("request"));
        assert_eq!(to.attribute("part"), Some(part));
    }
}

#[test]
fn bpel_invokes_the_card_check() {
    let text = travel_bpel();
    let doc = Document::parse(&text).unwrap();
    let invoke = elements(&doc, "invoke")
        .into_iter()
        .find(|i| i.attribute("name") == Some("Check Credit Card"))
        .unwrap();
    assert_eq!(invoke.attribute("inputVariable"), Some("request"));
    assert_eq!(invoke.attribute("outputVariable"), Some("response"));
}

#[test]
fn bpel_control_skeleton() {
    let text = travel_bpel();
    let doc = Document::parse(&text).unwrap();
    assert_eq!(elements(&doc, "receive").len(), 1);
    assert_eq!(elements(&doc, "reply").len(), 1);
    assert_eq!(elements(&doc, "if").len(), 1);
    let flow = &elements(&doc, "flow")[0];
    assert_eq!(flow.children().filter(|c| c.is_element()).count(), 3);
}

#[test]
fn bpel_warns_about_sub_process_stores() {
    let out = to_bpel(&common::diagram("patterns/p2.bpdmn.json")).unwrap();
    assert!(
        out.warnings.iter().any(|w| w.contains("scratch")),
        "{:?}",
        out.warnings
    );
}

#[test]
fn bpel_skips_objects_that_only_ride_messages() {
    let out = to_bpel(&common::diagram("patterns/p15.bpdmn.json")).unwrap();
    assert!(!out.text.contains(r#"name="return_form""#));
    assert!(
        out.warnings.iter().any(|w| w.contains("return_form")),
        "{:?}",
        out.warnings
    );
}

#[test]
fn generators_refuse_invalid_models() {
    let d = common::diagram("validator/bad-v3.bpdmn.json");
    assert!(matches!(to_bpel(&d), Err(CodegenError::Invalid(_))));
    assert!(matches!(to_xpdl(&d), Err(CodegenError::Invalid(_))));
}

#[test]
fn output_is_well_formed_and_deterministic() {
    for (name, d) in valid_fixtures() {
        for gen in [to_bpel, to_xpdl] {
            let a = gen(&d).unwrap();
            let b = gen(&d).unwrap();
            assert_eq!(a, b, "{name}");
            if let Err(e) = Document::parse(&a.text) {
                panic!("{name}: {e}\n{}", a.text);
            }
        }
    }
}

#[test]
fn one_copy_per_rule_and_unique_variable_names() {
    for (name, d) in valid_fixtures() {
        let text = to_bpel(&d).unwrap().text;
        let doc = Document::parse(&text).unwrap();
        let rules: usize = d.mappings().iter().map(|m| m.rules.len()).sum();
        assert_eq!(elements(&doc, "copy").len(), rules, "{name}");
        let mut seen = HashSet::new();
        for v in elements(&doc, "variable") {
            assert!(seen.insert(v.attribute("name").unwrap()), "{name}");
        }
    }
}

#[test]
fn xpdl_store_field() {
    let text = to_xpdl(&common::diagram("eco.bpdmn.json")).unwrap().text;
    let doc = Document::parse(&text).unwrap();
    let field = elements(&doc, "DataField")
        .into_iter()
        .find(|f| f.attribute("Id") == Some("OracleDB.Device.deviceID"))
        .unwrap();
    assert_eq!(field.attribute("Name"), Some("deviceID"));
    let basic = field
        .descendants()
        .find(|n| n.has_tag_name("BasicType"))
        .unwrap();
    assert_eq!(basic.attribute("Type"), Some("STRING"));
}

#[test]
fn xpdl_check_activity() {
    let text = to_xpdl(&common::diagram("eco.bpdmn.json")).unwrap().text;
    let doc = Document::parse(&text).unwrap();
    let activity = elements(&doc, "Activity")
        .into_iter()
        .find(|a| a.attribute("name") == Some("Check ECO Data"))
        .unwrap();
    let artifact = |tag: &str| -> Vec<&str> {
        activity
            .descendants()
            .filter(|n| n.has_tag_name(tag))
            .filter_map(|n| n.attribute("ArtifactId"))
            .collect()
    };
    assert!(artifact("Input").contains(&"ECO_Data"));
    assert_eq!(artifact("Output"), ["Checked_Data"]);
    let params: Vec<&str> = activity
        .descendants()
        .filter(|n| n.has_tag_name("ActualParameter"))
        .filter_map(|n| n.text())
        .collect();
    assert!(params.contains(&"ECO_Data.Device.deviceID"));
    let assignment = activity
        .descendants()
        .find(|n| n.has_tag_name("Assignment"))
        .unwrap();
    let child = |tag: &str| {
        assignment
            .children()
            .find(|c| c.has_tag_name(tag))
            .and_then(|c| c.text())
    };
    assert_eq!(child("Target"), Some("Input.device"));
    assert_eq!(child("Expression"), Some("ECO_Data.Device.deviceID"));
}

#[test]
fn xpdl_keeps_every_data_construct() {
    for (name, d) in valid_fixtures() {
        let text = to_xpdl(&d).unwrap().text;
        let doc = Document::parse(&text).unwrap();
        let count = |tag: &str| elements(&doc, tag).len();

        let artifacts = elements(&doc, "Artifact");
        assert_eq!(artifacts.len(), d.objects().len(), "{name}");
        assert_eq!(count("DataObject"), d.objects().len(), "{name}");
        assert_eq!(count("DataStore"), d.stores().len(), "{name}");

        let rules: usize = d.mappings().iter().map(|m| m.rules.len()).sum();
        assert_eq!(count("Assignment"), rules, "{name}");

        let carried: BTreeSet<(&str, &str)> = d
            .message_flows()
            .iter()
            .flat_map(|m| {
                m.attachments
                    .iter()
                    .map(move |a| (m.id.as_str(), a.object.as_str()))
            })
            .collect();
        assert_eq!(count("Message"), carried.len(), "{name}");
        assert_eq!(count("Transition"), d.sequence_flows().count(), "{name}");

        let store_fields: usize = d
            .stores()
            .iter()
            .flat_map(|s| &s.entities)
            .flat_map(|e| &e.fields)
            .inspect(|f| assert_ne!(f.vtype, VarType::Record, "{name}"))
            .count();
        let ids: Vec<&str> = elements(&doc, "DataField")
            .iter()
            .filter_map(|f| f.attribute("Id"))
            .collect();
        assert_eq!(ids.len(), store_fields, "{name}");
        let unique: HashSet<&&str> = ids.iter().collect();
        assert_eq!(unique.len(), ids.len(), "{name}");
    }
}
