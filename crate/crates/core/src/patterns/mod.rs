//! Workflow Data Pattern coverage.
//!
//! [`capability_matrix`] is a fixed transcription of how plain BPMN and
//! the data-extended notation support each pattern. [`analyze`] looks for
//! concrete pattern instances in a model using the structural predicates
//! in the `detect` submodule.

mod detect;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::model::Diagram;
use crate::validator::{has_errors, validate, Diagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternId {
    /// Workflow Data Pattern 1 to 40.
    Wdp(u8),
    Structure,
    DataControlFlow,
    ExplicitDataFlow,
    ProcessDataStore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    Supported,
    Partial,
    Unsupported,
}

impl Support {
    pub fn symbol(self) -> &'static str {
        match self {
            Support::Supported => "+",
            Support::Partial => "+/-",
            Support::Unsupported => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    DataVisibility,
    InternalInteraction,
    ExternalInteraction,
    DataTransfer,
    DataBasedRouting,
    AdditionalRequirements,
}

impl Group {
    pub fn title(self) -> &'static str {
        match self {
            Group::DataVisibility => "data visibility",
            Group::InternalInteraction => "data interaction (internal)",
            Group::ExternalInteraction => "data interaction (external)",
            Group::DataTransfer => "data transfer",
            Group::DataBasedRouting => "data based routing",
            Group::AdditionalRequirements => "additional requirements",
        }
    }
}

const NAMES: [&str; 40] = [
    "Task data",
    "Block data",
    "Scope data",
    "Multiple Instance data",
    "Case data",
    "Folder data",
    "Workflow data",
    "Environment data",
    "between tasks",
    "Block Task to Sub-wf Decomp.",
    "Sub-wf Decomp. to Block Task",
    "to Multiple Instance Task",
    "from Multiple Instance Task",
    "Case to Case",
    "Task to Env. - Push",
    "Env. to Task - Pull",
    "Env. to Task - Push",
    "Task to Env. - Pull",
    "Case to Env. - Push",
    "Env. to Case - Pull",
    "Env. to Case - Push",
    "Case to Env. - Pull",
    "Workflow to Env. - Push",
    "Env. to Workflow - Pull",
    "Env. to Workflow - Push",
    "Workflow to Env. - Pull",
    "by Value - Incoming",
    "by Value - Outcoming",
    "Copy in/Copy out",
    "by Reference - Unlocked",
    "by Reference - Locked",
    "Data Transformation - input",
    "Data Transformation - output",
    "Task Precondition - Data exist.",
    "Task Precondition - Data val.",
    "Task Postcondition - Data exist.",
    "Task Postcondition - Data val.",
    "Event Based Task Trigger",
    "Data Based Task Trigger",
    "Data-based Routing",
];

impl PatternId {
    /// The 40 numbered patterns followed by the four additional rows.
    pub fn all() -> Vec<PatternId> {
        (1..=40)
            .map(PatternId::Wdp)
            .chain([
                PatternId::Structure,
                PatternId::DataControlFlow,
                PatternId::ExplicitDataFlow,
                PatternId::ProcessDataStore,
            ])
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternId::Wdp(n) => NAMES[usize::from(n) - 1],
            PatternId::Structure => "Structure",
            PatternId::DataControlFlow => "Data / Control Flow",
            PatternId::ExplicitDataFlow => "Explicit Data Flow",
            PatternId::ProcessDataStore => "Process Data Store",
        }
    }

    /// Short key used on the command line and in fixture names.
    pub fn key(self) -> String {
        match self {
            PatternId::Wdp(n) => n.to_string(),
            PatternId::Structure => "structure".into(),
            PatternId::DataControlFlow => "data_control_flow".into(),
            PatternId::ExplicitDataFlow => "explicit_data_flow".into(),
            PatternId::ProcessDataStore => "process_data_store".into(),
        }
    }

    pub fn parse(s: &str) -> Option<PatternId> {
        PatternId::all().into_iter().find(|p| p.key() == s)
    }

    pub fn group(self) -> Group {
        match self {
            PatternId::Wdp(1..=8) => Group::DataVisibility,
            PatternId::Wdp(9..=14) => Group::InternalInteraction,
            PatternId::Wdp(15..=26) => Group::ExternalInteraction,
            PatternId::Wdp(27..=33) => Group::DataTransfer,
            PatternId::Wdp(_) => Group::DataBasedRouting,
            _ => Group::AdditionalRequirements,
        }
    }

    /// Row label: `7. Workflow data`, or the bare name for extra rows.
    pub fn label(self) -> String {
        match self {
            PatternId::Wdp(n) => format!("{n}. {}", self.name()),
            _ => self.name().to_string(),
        }
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl Serialize for PatternId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Support in (plain BPMN, extended notation).
pub fn support(p: PatternId) -> (Support, Support) {
    use Support::*;
    let bpmn = match p {
        PatternId::Wdp(4 | 29 | 32 | 33)
        | PatternId::ExplicitDataFlow
        | PatternId::DataControlFlow => Partial,
        PatternId::Wdp(3 | 6 | 7 | 8 | 12 | 13 | 14 | 19..=26 | 30 | 35 | 37)
        | PatternId::Structure
        | PatternId::ProcessDataStore => Unsupported,
        _ => Supported,
    };
    let extended = match p {
        PatternId::Wdp(3 | 6 | 35 | 37) => Unsupported,
        _ => Supported,
    };
    (bpmn, extended)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MatrixRow {
    pub pattern: PatternId,
    pub bpmn: Support,
    pub bpdmn: Support,
}

pub fn capability_matrix() -> Vec<MatrixRow> {
    PatternId::all()
        .into_iter()
        .map(|pattern| {
            let (bpmn, bpdmn) = support(pattern);
            MatrixRow {
                pattern,
                bpmn,
                bpdmn,
            }
        })
        .collect()
}

/// Fixed-width rendering grouped like the published comparison table.
pub fn render_matrix() -> String {
    let mut out = format!("{:<40} {:>4} {:<5}\n", "pattern", "BPMN", "BPDMN");
    let mut group = None;
    for row in capability_matrix() {
        let g = row.pattern.group();
        if group != Some(g) {
            out.push_str(&format!("[{}]\n", g.title()));
            group = Some(g);
        }
        out.push_str(&format!(
            "{:<40} {:>4} {:<5}\n",
            row.pattern.label(),
            row.bpmn.symbol(),
            row.bpdmn.symbol()
        ));
    }
    out
}

/// Witness element ids for one detected pattern instance.
pub type Instance = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternReport {
    pub instances: BTreeMap<PatternId, Vec<Instance>>,
}

impl PatternReport {
    pub fn get(&self, p: PatternId) -> &[Instance] {
        self.instances.get(&p).map_or(&[], Vec::as_slice)
    }

    /// Patterns with at least one instance.
    pub fn detected(&self) -> Vec<PatternId> {
        self.instances
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in self.detected() {
            for inst in self.get(p) {
                let ids: Vec<&str> = inst.iter().map(String::as_str).collect();
                out.push_str(&format!("{:<40} {{{}}}\n", p.label(), ids.join(", ")));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("model has {} validation error(s)", .0.len())]
pub struct InvalidModel(pub Vec<Diagnostic>);

pub fn analyze(d: &Diagram) -> Result<PatternReport, InvalidModel> {
    let diags = validate(d);
    if has_errors(&diags) {
        return Err(InvalidModel(diags));
    }
    Ok(analyze_unchecked(d))
}

/// Runs every detector without validating first.
pub fn analyze_unchecked(d: &Diagram) -> PatternReport {
    let mut instances = BTreeMap::new();
    for p in PatternId::all() {
        let found = if support(p).1 == Support::Unsupported {
            Vec::new()
        } else {
            let mut v: Vec<Instance> = detect::detect(d, p);
            v.sort();
            v.dedup();
            v
        };
        instances.insert(p, found);
    }
    PatternReport { instances }
}
