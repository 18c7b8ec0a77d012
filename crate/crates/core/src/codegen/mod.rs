//! Translation of valid diagrams into BPEL and XPDL fragments.
//!
//! Both generators are deterministic. Parts of the target formats that
//! carry no data semantics (WSDL port types, partner links, application
//! declarations) are emitted as fixed placeholders.

mod bpel;
pub mod skeleton;
pub mod xml;
mod xpdl;

use crate::model::{Diagram, ObjectSource, ObjectTarget};
use crate::validator::{has_errors, validate, Diagnostic, Severity};

pub use bpel::{to_bpel, PLACEHOLDER_ATTRIBUTES};
pub use xpdl::to_xpdl;

/// Generated document text plus translation warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodegenError {
    #[error("model has {} validation error(s)", .0.len())]
    Invalid(Vec<Diagnostic>),
}

fn check(d: &Diagram) -> Result<(), CodegenError> {
    let diags = validate(d);
    if has_errors(&diags) {
        return Err(CodegenError::Invalid(
            diags
                .into_iter()
                .filter(|x| x.severity == Severity::Error)
                .collect(),
        ));
    }
    Ok(())
}

/// Objects that only ever travel on message flows and are not read or
/// written by any mapping.
fn message_only(d: &Diagram, object: &str) -> bool {
    let sources = d.object_sources(object).unwrap_or_default();
    let targets = d.object_targets(object).unwrap_or_default();
    let on_message_src = |s: &ObjectSource| {
        matches!(
            s,
            ObjectSource::MessageReceipt { .. } | ObjectSource::MessageStart { .. }
        )
    };
    let on_message_tgt = |t: &ObjectTarget| matches!(t, ObjectTarget::MessageSend { .. });
    !(sources.is_empty() && targets.is_empty())
        && sources.iter().all(on_message_src)
        && targets.iter().all(on_message_tgt)
}

/// Splits `obj.var.path` at the first dot.
fn split_path(path: &str) -> (&str, Option<&str>) {
    match path.split_once('.') {
        Some((o, v)) => (o, Some(v)),
        None => (path, None),
    }
}
