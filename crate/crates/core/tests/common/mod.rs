#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bpdmn::expr::Value;
use bpdmn::format::{parse_document, Document, ParseOptions};
use bpdmn::model::Diagram;
use bpdmn::simulator::Behaviors;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read(name: &str) -> String {
    let path = fixtures_dir().join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn document(name: &str) -> Document {
    parse_document(&read(name), ParseOptions::default())
        .unwrap_or_else(|e| panic!("{name}: {e}"))
        .document
}

pub fn diagram(name: &str) -> Diagram {
    document(name).diagram
}

pub fn behaviors(doc: &Document) -> Behaviors {
    doc.behaviors.clone().unwrap_or_default()
}

pub fn scenario(doc: &Document, name: &str) -> BTreeMap<String, Value> {
    let b = doc.behaviors.as_ref().expect("fixture has behaviors");
    b.scenario(name)
        .unwrap_or_else(|| panic!("no scenario {name}"))
        .inputs
        .iter()
        .cloned()
        .collect()
}

/// Every `.bpdmn.json` file under `fixtures/`, relative paths, sorted.
pub fn all_fixtures() -> Vec<String> {
    let mut out = Vec::new();
    collect(&fixtures_dir(), "", &mut out);
    out.sort();
    out
}

fn collect(dir: &Path, prefix: &str, out: &mut Vec<String>) {
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().to_string_lossy().into_owned();
        let rel = format!("{prefix}{name}");
        if entry.file_type().unwrap().is_dir() {
            collect(&entry.path(), &format!("{rel}/"), out);
        } else if name.ends_with(".bpdmn.json") {
            out.push(rel);
        }
    }
}
