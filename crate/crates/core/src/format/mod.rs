//! The `.bpdmn.json` document format.
//!
//! Documents mirror the metamodel one to one. The canonical form produced
//! by [`serialize_diagram`] orders keys as in the schema, sorts every
//! id-bearing list by id, omits keys that hold their default value and
//! uses two-space indentation with a trailing newline.

mod decode;
mod encode;
pub mod json;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::model::{Diagram, ModelError};
use crate::simulator::behavior::Behaviors;

pub const FILE_EXTENSION: &str = ".bpdmn.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Not well-formed JSON.
    Syntax,
    /// Valid JSON that does not follow the document schema.
    Schema,
    DanglingReference,
    /// Rejected by model construction (duplicate ids, shape errors).
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct FormatError {
    pub span: SourceSpan,
    pub kind: ErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatWarning {
    pub span: SourceSpan,
    pub message: String,
}

impl fmt::Display for FormatWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: warning: {}", self.span, self.message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Report unknown keys as warnings instead of errors.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub diagram: Diagram,
    pub behaviors: Option<Behaviors>,
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub document: Document,
    pub warnings: Vec<FormatWarning>,
    /// Where each element was declared.
    pub spans: BTreeMap<String, SourceSpan>,
}

pub fn parse_document(text: &str, opts: ParseOptions) -> Result<Parsed, FormatError> {
    let mut ctx = decode::Ctx::new(text, opts);
    let root = ctx.read()?;
    let (parts, behaviors) = decode::document(&mut ctx, &root)?;
    let diagram = Diagram::from_parts(parts).map_err(|e| {
        let span = ctx
            .spans
            .get(e.element())
            .copied()
            .unwrap_or(SourceSpan { line: 1, column: 1 });
        let kind = match e {
            ModelError::DanglingReference { .. } => ErrorKind::DanglingReference,
            _ => ErrorKind::Model,
        };
        FormatError {
            span,
            kind,
            message: e.to_string(),
        }
    })?;
    Ok(Parsed {
        document: Document { diagram, behaviors },
        warnings: ctx.warnings,
        spans: ctx.spans,
    })
}

/// Strict parse of a document, discarding any behaviors section.
pub fn parse_diagram(text: &str) -> Result<Diagram, FormatError> {
    parse_document(text, ParseOptions::default()).map(|p| p.document.diagram)
}

/// Parses a standalone behaviors file (the `behaviors` object on its own).
pub fn parse_behaviors(text: &str) -> Result<Behaviors, FormatError> {
    let mut ctx = decode::Ctx::new(text, ParseOptions::default());
    let root = ctx.read()?;
    decode::behaviors(&mut ctx, &root)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("document DTOs always serialize");
    out.push('\n');
    out
}

pub fn serialize_diagram(d: &Diagram) -> String {
    pretty(&encode::diagram(d, None))
}

pub fn serialize_document(doc: &Document) -> String {
    pretty(&encode::diagram(&doc.diagram, doc.behaviors.as_ref()))
}

pub fn serialize_behaviors(b: &Behaviors) -> String {
    pretty(&encode::behaviors_dto(b))
}
