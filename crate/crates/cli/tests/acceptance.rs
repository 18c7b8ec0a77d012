//! Acceptance checks, one PASS/FAIL line per criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bpdmn::codegen::PLACEHOLDER_ATTRIBUTES;
use bpdmn::expr::Value;
use bpdmn::format::{parse_document, serialize_diagram, Document, ParseOptions};
use bpdmn::model::Diagram;
use bpdmn::patterns::{analyze, support, PatternId, Support};
use bpdmn::simulator::{self, Behaviors, Policy, Status, DEFAULT_MAX_STEPS};
use bpdmn::testkit::{check_data_gating, default_inputs, explore, random_diagram, GenConfig};
use bpdmn::validator::{has_errors, validate, Rule, Severity};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixtures() -> PathBuf {
    root().join("fixtures")
}

fn bpdmn(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_bpdmn"))
        .args(args)
        .current_dir(root())
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "bpdmn {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn document(rel: &str) -> Result<Document, String> {
    let text = fs::read_to_string(fixtures().join(rel)).map_err(|e| format!("{rel}: {e}"))?;
    parse_document(&text, ParseOptions::default())
        .map(|p| p.document)
        .map_err(|e| format!("{rel}: {e}"))
}

fn scenario(doc: &Document, name: &str) -> Result<BTreeMap<String, Value>, String> {
    let b = doc.behaviors.as_ref().ok_or("no behaviors")?;
    let s = b
        .scenarios
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| format!("no scenario {name}"))?;
    Ok(s.inputs.iter().cloned().collect())
}

fn json_files(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = fs::read_dir(dir) else {
        return;
    };
    let mut entries: Vec<PathBuf> = entries.flatten().map(|e| e.path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            json_files(&p, out);
        } else if p.to_string_lossy().ends_with(".bpdmn.json") {
            out.push(p);
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    check(spent < limit, || format!("took {spent:?}, limit {limit:?}"))
}

// XML fragments. An `<etc/>` child stands for elided attributes and
// children; without it attributes and element children must match exactly.

#[derive(Debug)]
struct Tree {
    name: String,
    attrs: BTreeMap<String, String>,
    text: String,
    children: Vec<Tree>,
    open: bool,
}

fn tree(node: roxmltree::Node) -> Tree {
    let mut children = Vec::new();
    let mut open = false;
    for c in node.children().filter(|c| c.is_element()) {
        if c.tag_name().name() == "etc" {
            open = true;
        } else {
            children.push(tree(c));
        }
    }
    let text = node
        .children()
        .filter(|c| c.is_text())
        .filter_map(|c| c.text())
        .collect::<String>()
        .trim()
        .to_string();
    Tree {
        name: node.tag_name().name().to_string(),
        attrs: node
            .attributes()
            .filter(|a| !PLACEHOLDER_ATTRIBUTES.contains(&a.name()))
            .map(|a| (a.name().to_string(), a.value().to_string()))
            .collect(),
        text,
        children,
        open,
    }
}

fn matches(golden: &Tree, actual: &Tree) -> bool {
    if golden.name != actual.name || golden.text != actual.text {
        return false;
    }
    if golden.open {
        let attrs_ok = golden
            .attrs
            .iter()
            .all(|(k, v)| actual.attrs.get(k) == Some(v));
        let mut rest = actual.children.iter();
        attrs_ok
            && golden
                .children
                .iter()
                .all(|g| rest.by_ref().any(|a| matches(g, a)))
    } else {
        golden.attrs == actual.attrs
            && golden.children.len() == actual.children.len()
            && golden
                .children
                .iter()
                .zip(&actual.children)
                .all(|(g, a)| matches(g, a))
    }
}

fn contains_fragment(actual: &Tree, golden: &Tree) -> bool {
    matches(golden, actual) || actual.children.iter().any(|c| contains_fragment(c, golden))
}

fn fragments_present(xml: &str, goldens: &[&str]) -> Result<(), String> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| format!("output is not XML: {e}"))?;
    let actual = tree(doc.root_element());
    for g in goldens {
        let gdoc = roxmltree::Document::parse(g).map_err(|e| format!("bad golden: {e}"))?;
        let golden = tree(gdoc.root_element());
        check(contains_fragment(&actual, &golden), || {
            format!("missing <{}> fragment", golden.name)
        })?;
    }
    Ok(())
}

const BPEL_FRAGMENTS: [&str; 3] = [
    r#"<variables>
         <variable name="input" messageType="input"/>
         <variable name="request" messageType="doCreditCardCheckingRequest"/>
         <etc/>
       </variables>"#,
    r#"<assign name="dm1">
         <copy>
           <from variable="input" part="cardNumber"/>
           <to variable="request" part="cardNumber"/>
         </copy>
         <copy>
           <from variable="input" part="cardType"/>
           <to variable="request" part="cardType"/>
         </copy>
       </assign>"#,
    r#"<invoke name="Check Credit Card" inputVariable="request" outputVariable="response">
         <etc/>
       </invoke>"#,
];

const XPDL_FRAGMENTS: [&str; 4] = [
    r#"<DataField Id="OracleDB.Device.deviceID" Name="deviceID">
         <DataType><BasicType Type="STRING"/></DataType>
       </DataField>"#,
    r#"<DataObject id="ECO_Data" Name="Eco Data">
         <DataFields>
           <DataField id="Device.deviceID"><etc/></DataField>
           <DataField id="Device.description"><etc/></DataField>
           <etc/>
         </DataFields>
         <etc/>
       </DataObject>"#,
    r#"<Activity name="Check ECO Data">
         <InputSets><InputSet><Input ArtifactId="ECO_Data"/><etc/></InputSet></InputSets>
         <OutputSets><OutputSet><Output ArtifactId="Checked_Data"/></OutputSet></OutputSets>
         <Implementation><Task><TaskApplication>
           <ActualParameters>
             <ActualParameter>ECO_Data.Device.deviceID</ActualParameter>
             <etc/>
           </ActualParameters>
           <etc/>
         </TaskApplication></Task></Implementation>
         <etc/>
       </Activity>"#,
    r#"<Assignments>
         <Assignment>
           <Target>Input.device</Target>
           <Expression>ECO_Data.Device.deviceID</Expression>
         </Assignment>
         <etc/>
       </Assignments>"#,
];

fn golden_bpel() -> Outcome {
    let start = Instant::now();
    let xml = bpdmn(&["translate", "fixtures/travel", "--to", "bpel"])?;
    fragments_present(&xml, &BPEL_FRAGMENTS)?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("3 fragments matched in {:?}", start.elapsed()))
}

fn golden_xpdl() -> Outcome {
    let start = Instant::now();
    let xml = bpdmn(&["translate", "fixtures/eco", "--to", "xpdl"])?;
    fragments_present(&xml, &XPDL_FRAGMENTS)?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("4 fragments matched in {:?}", start.elapsed()))
}

/// The comparison table, row by row: label, BPMN, BPDMN.
const TABLE: [(&str, &str, &str); 44] = [
    ("1. Task data", "+", "+"),
    ("2. Block data", "+", "+"),
    ("3. Scope data", "-", "-"),
    ("4. Multiple Instance data", "+/-", "+"),
    ("5. Case data", "+", "+"),
    ("6. Folder data", "-", "-"),
    ("7. Workflow data", "-", "+"),
    ("8. Environment data", "-", "+"),
    ("9. between tasks", "+", "+"),
    ("10. Block Task to Sub-wf Decomp.", "+", "+"),
    ("11. Sub-wf Decomp. to Block Task", "+", "+"),
    ("12. to Multiple Instance Task", "-", "+"),
    ("13. from Multiple Instance Task", "-", "+"),
    ("14. Case to Case", "-", "+"),
    ("15. Task to Env. - Push", "+", "+"),
    ("16. Env. to Task - Pull", "+", "+"),
    ("17. Env. to Task - Push", "+", "+"),
    ("18. Task to Env. - Pull", "+", "+"),
    ("19. Case to Env. - Push", "-", "+"),
    ("20. Env. to Case - Pull", "-", "+"),
    ("21. Env. to Case - Push", "-", "+"),
    ("22. Case to Env. - Pull", "-", "+"),
    ("23. Workflow to Env. - Push", "-", "+"),
    ("24. Env. to Workflow - Pull", "-", "+"),
    ("25. Env. to Workflow - Push", "-", "+"),
    ("26. Workflow to Env. - Pull", "-", "+"),
    ("27. by Value - Incoming", "+", "+"),
    ("28. by Value - Outcoming", "+", "+"),
    ("29. Copy in/Copy out", "+/-", "+"),
    ("30. by Reference - Unlocked", "-", "+"),
    ("31. by Reference - Locked", "+", "+"),
    ("32. Data Transformation - input", "+/-", "+"),
    ("33. Data Transformation - output", "+/-", "+"),
    ("34. Task Precondition - Data exist.", "+", "+"),
    ("35. Task Precondition - Data val.", "-", "-"),
    ("36. Task Postcondition - Data exist.", "+", "+"),
    ("37. Task Postcondition - Data val.", "-", "-"),
    ("38. Event Based Task Trigger", "+", "+"),
    ("39. Data Based Task Trigger", "+", "+"),
    ("40. Data-based Routing", "+", "+"),
    ("Structure", "-", "+"),
    ("Data / Control Flow", "+/-", "+"),
    ("Explicit Data Flow", "+/-", "+"),
    ("Process Data Store", "-", "+"),
];

fn matrix() -> Outcome {
    let text = bpdmn(&["patterns", "--matrix"])?;
    let rows: Vec<(String, String, String)> = text
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('['))
        .map(|l| {
            let mut cells: Vec<&str> = l.split_whitespace().collect();
            let bpdmn = cells.pop().unwrap_or_default().to_string();
            let bpmn = cells.pop().unwrap_or_default().to_string();
            (cells.join(" "), bpmn, bpdmn)
        })
        .collect();
    check(rows.len() == TABLE.len(), || format!("{} rows", rows.len()))?;
    for (got, want) in rows.iter().zip(TABLE) {
        check(
            (got.0.as_str(), got.1.as_str(), got.2.as_str()) == want,
            || format!("row {got:?} differs from {want:?}"),
        )?;
    }
    let count = |col: fn(&(String, String, String)) -> &str, mark: &str| {
        rows.iter().filter(|r| col(r) == mark).count()
    };
    let bpdmn = (
        count(|r| &r.2, "+"),
        count(|r| &r.2, "+/-"),
        count(|r| &r.2, "-"),
    );
    check(bpdmn == (40, 0, 4), || format!("BPDMN column {bpdmn:?}"))?;
    let unsupported: Vec<&str> = rows
        .iter()
        .filter(|r| r.2 == "-")
        .map(|r| r.0.split('.').next().unwrap_or_default())
        .collect();
    check(unsupported == ["3", "6", "35", "37"], || {
        format!("unsupported rows {unsupported:?}")
    })?;
    let partial = count(|r| &r.1, "+/-");
    check(partial == 6, || format!("{partial} partial BPMN entries"))?;
    Ok("44 rows equal; BPDMN 40/0/4, BPMN 6 partial".into())
}

fn node_named(d: &Diagram, name: &str) -> Result<String, String> {
    d.nodes()
        .find(|n| n.name == name)
        .map(|n| n.id.clone())
        .ok_or_else(|| format!("no node named {name}"))
}

fn semantics() -> Outcome {
    let start = Instant::now();
    let travel = document("travel.bpdmn.json")?;
    let tb = travel.behaviors.clone().unwrap_or_default();
    let d = &travel.diagram;
    let checks: Vec<String> = [
        "Check Hotel Reservation",
        "Check Car Reservation",
        "Check Flight Reservation",
    ]
    .iter()
    .map(|n| node_named(d, n))
    .collect::<Result<_, _>>()?;
    let card = node_named(d, "Check Credit Card")?;
    let archive = d
        .stores()
        .iter()
        .find(|s| s.name == "Archive (DB)")
        .ok_or("no Archive (DB) store")?
        .id
        .clone();

    let run = |doc: &Document, b: &Behaviors, name: &str, policy| {
        let inputs = scenario(doc, name)?;
        simulator::run(&doc.diagram, b, &inputs, DEFAULT_MAX_STEPS, policy)
            .map_err(|e| e.to_string())
    };

    let valid = run(&travel, &tb, "valid-card", Policy::SmallestId)?;
    check(valid.status == Status::Completed, || {
        format!("valid run {:?}", valid.status)
    })?;
    check(valid.trace.fire_count(&card) == 1, || {
        "card check not fired".into()
    })?;
    for c in &checks {
        check(valid.trace.fire_count(c) == 1, || format!("{c} not fired"))?;
    }
    let records = valid.state.stores.get(&archive).map_or(0, Vec::len);
    check(records == 1, || format!("{records} archive records"))?;

    let invalid = run(&travel, &tb, "invalid-card", Policy::SmallestId)?;
    let fired: usize = checks.iter().map(|c| invalid.trace.fire_count(c)).sum();
    check(fired == 0, || {
        format!("{fired} checks fired on an invalid card")
    })?;

    let eco = document("eco.bpdmn.json")?;
    let eb = eco.behaviors.clone().unwrap_or_default();
    let failed = run(&eco, &eb, "failure", Policy::SmallestId)?;
    let process = node_named(&eco.diagram, "Process ECO")?;
    check(failed.status == Status::Completed, || {
        format!("eco run {:?}", failed.status)
    })?;
    check(failed.trace.fire_count(&process) == 0, || {
        "Process ECO fired".into()
    })?;

    let cases = [
        (&travel, &tb, "valid-card"),
        (&travel, &tb, "invalid-card"),
        (&eco, &eb, "success"),
        (&eco, &eb, "failure"),
    ];
    for seed in 0..100u64 {
        let (doc, b, name) = cases[seed as usize % cases.len()];
        let r = run(doc, b, name, Policy::Random { seed })?;
        check_data_gating(&doc.diagram, &r.trace).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!(
        "3 scenarios and 100 gated runs in {:?}",
        start.elapsed()
    ))
}

fn oracle() -> Outcome {
    let start = Instant::now();
    let mut files = Vec::new();
    json_files(&fixtures(), &mut files);
    let mut compared = 0;
    for path in files {
        let name = path
            .strip_prefix(fixtures())
            .unwrap_or(&path)
            .display()
            .to_string();
        let doc = document(&name)?;
        let d = &doc.diagram;
        if d.nodes().count() > 8 || d.nodes().any(|n| n.kind.is_gateway()) {
            continue;
        }
        if has_errors(&validate(d)) {
            continue;
        }
        let b = doc.behaviors.clone().unwrap_or_default();
        let inputs = match b.scenarios.first() {
            Some(s) => s.inputs.iter().cloned().collect(),
            None => default_inputs(d),
        };
        let run = simulator::run(d, &b, &inputs, DEFAULT_MAX_STEPS, Policy::SmallestId)
            .map_err(|e| format!("{name}: {e}"))?;
        let fired: BTreeSet<String> = run.trace.fired().into_iter().map(str::to_string).collect();
        let outcomes =
            explore(d, &b, &inputs, DEFAULT_MAX_STEPS).map_err(|e| format!("{name}: {e}"))?;
        check(outcomes.iter().all(|o| *o == fired), || {
            format!("{name}: default {fired:?}, explorer {outcomes:?}")
        })?;
        compared += 1;
    }
    check(compared > 0, || "no gateway-free fixture".into())?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "{compared} fixtures agree in {:?}",
        start.elapsed()
    ))
}

fn validator_coverage() -> Outcome {
    let mut cases = 0;
    for (i, code) in Rule::ALL.into_iter().enumerate() {
        let rule = i + 1;
        for (prefix, expect) in [("ok", 0), ("bad", 1)] {
            let doc = document(&format!("validator/{prefix}-v{rule}.bpdmn.json"))?;
            let diags = validate(&doc.diagram);
            check(diags.len() == expect, || {
                format!("{prefix}-v{rule}: {} diagnostics", diags.len())
            })?;
            check(diags.iter().all(|d| d.rule == code), || {
                format!("{prefix}-v{rule}: wrong rule")
            })?;
            cases += 1;
        }
    }
    for name in ["travel.bpdmn.json", "eco.bpdmn.json"] {
        let diags = validate(&document(name)?.diagram);
        let errors = diags
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .count();
        check(errors == 0, || format!("{name}: {errors} errors"))?;
    }
    Ok(format!("{cases} rule cases, both example models clean"))
}

const PUNCT: &[u8] = b"{}[]\":,\\0e-.nt";

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    let mut bytes = seed.to_vec();
    for _ in 0..rng.random_range(1..8) {
        let at = rng.random_range(0..=bytes.len());
        match rng.random_range(0..5) {
            0 if at < bytes.len() => {
                bytes.remove(at);
            }
            1 if at < bytes.len() => bytes[at] = rng.random(),
            2 => bytes.insert(at, *PUNCT.choose(rng).unwrap_or(&b' ')),
            3 if at < bytes.len() => {
                let end = (at + rng.random_range(1..64)).min(bytes.len());
                let chunk = bytes[at..end].to_vec();
                bytes.splice(at..at, chunk);
            }
            _ => bytes.truncate(at),
        }
    }
    bytes
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let d = random_diagram(&mut rng, GenConfig::default());
        let text = serialize_diagram(&d);
        let back = parse_document(&text, ParseOptions::default())
            .map_err(|e| format!("diagram {i}: {e}"))?;
        check(serialize_diagram(&back.document.diagram) == text, || {
            format!("diagram {i} changed on round trip")
        })?;
    }

    let mut files = Vec::new();
    json_files(&fixtures(), &mut files);
    let seeds: Vec<Vec<u8>> = files.iter().filter_map(|p| fs::read(p).ok()).collect();
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    for i in 0..10_000 {
        let input = if i % 10 == 0 {
            (0..rng.random_range(0..256))
                .map(|_| rng.random())
                .collect()
        } else {
            let seed = &seeds[rng.random_range(0..seeds.len())];
            mutate(&mut rng, seed)
        };
        let text = String::from_utf8_lossy(&input).into_owned();
        let lenient = i % 2 == 0;
        if panic::catch_unwind(|| parse_document(&text, ParseOptions { lenient })).is_err() {
            crashes += 1;
        }
    }
    panic::set_hook(hook);
    check(crashes == 0, || {
        format!("{crashes} inputs crashed the parser")
    })?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "1000 round trips and 10000 mutated inputs in {:?}",
        start.elapsed()
    ))
}

fn exemplars() -> Outcome {
    let mut files = 0;
    for p in PatternId::all() {
        if support(p).1 == Support::Unsupported {
            continue;
        }
        let name = match p {
            PatternId::Wdp(n) => format!("patterns/p{n}.bpdmn.json"),
            other => format!("patterns/{}.bpdmn.json", other.key()),
        };
        let report = analyze(&document(&name)?.diagram).map_err(|e| format!("{name}: {e:?}"))?;
        check(!report.get(p).is_empty(), || format!("{name}: no instance"))?;
        files += 1;
    }
    check(files == 40, || format!("{files} exemplars"))?;
    let empty = analyze(&Diagram::empty()).map_err(|e| format!("{e:?}"))?;
    check(empty.detected().is_empty(), || {
        "empty diagram reports patterns".into()
    })?;
    Ok("40 exemplars detected, empty diagram reports none".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("golden BPEL", golden_bpel),
        ("golden XPDL", golden_xpdl),
        ("capability matrix", matrix),
        ("semantics", semantics),
        ("oracle equivalence", oracle),
        ("validator coverage", validator_coverage),
        ("round trip", round_trip),
        ("pattern exemplars", exemplars),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
