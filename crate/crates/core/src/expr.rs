//! Guard and copy-rule expressions.
//!
//! Grammar:
//!
//! ```text
//! expr := or
//! or   := and ('or' and)*
//! and  := cmp ('and' cmp)*
//! cmp  := term (relop term)?
//! term := path | literal | 'not' term | '(' expr ')'
//! ```
//!
//! Paths are dot-qualified identifiers (`input.cardNumber`), string literals
//! are single-quoted with `''` as the escaped quote, numbers are decimal.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Path(String),
    Literal(Literal),
    Compare {
        op: CmpOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Num(f64),
    Bool(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Runtime value of a path or expression.
///
/// `Null` only arises from optional inputs that were absent when a node fired.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Bool(bool),
    Null,
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Num(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Null => "null",
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }
}

impl From<&Literal> for Value {
    fn from(lit: &Literal) -> Self {
        match lit {
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::Num(n) => Value::Num(*n),
            Literal::Bool(b) => Value::Bool(*b),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write_quoted(f, s),
            Value::Num(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => f.write_str("null"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Str(s) => serializer.serialize_str(s),
            Value::Num(n) => serializer.serialize_f64(*n),
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::Null => serializer.serialize_unit(),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    for part in s.split('\'').enumerate() {
        if part.0 > 0 {
            f.write_str("''")?;
        }
        f.write_str(part.1)?;
    }
    f.write_str("'")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at column {}: {message}", .offset + 1)]
pub struct ParseError {
    /// Zero-based character offset into the source text.
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound path `{0}`")]
    Unbound(String),
    #[error("type error in `{context}`: expected {expected}, found {found}")]
    Type {
        context: String,
        expected: &'static str,
        found: &'static str,
    },
}

/// Lookup of path values during evaluation.
///
/// `None` means the path is not bound at all, which is an error. Optional
/// inputs that were absent are bound to [`Value::Null`].
pub trait Env {
    fn lookup(&self, path: &str) -> Option<Value>;
}

impl Env for BTreeMap<String, Value> {
    fn lookup(&self, path: &str) -> Option<Value> {
        self.get(path).cloned()
    }
}

impl Env for HashMap<String, Value> {
    fn lookup(&self, path: &str) -> Option<Value> {
        self.get(path).cloned()
    }
}

/// Adapts a closure into an [`Env`].
pub struct FnEnv<F>(pub F);

impl<F: Fn(&str) -> Option<Value>> Env for FnEnv<F> {
    fn lookup(&self, path: &str) -> Option<Value> {
        (self.0)(path)
    }
}

impl Expr {
    pub fn path(p: impl Into<String>) -> Self {
        Expr::Path(p.into())
    }

    pub fn str(s: impl Into<String>) -> Self {
        Expr::Literal(Literal::Str(s.into()))
    }

    pub fn num(n: f64) -> Self {
        Expr::Literal(Literal::Num(n))
    }

    pub fn bool(b: bool) -> Self {
        Expr::Literal(Literal::Bool(b))
    }

    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Compare {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Self {
        Expr::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Self {
        Expr::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn negate(inner: Expr) -> Self {
        Expr::Not(Box::new(inner))
    }

    pub fn as_path(&self) -> Option<&str> {
        match self {
            Expr::Path(p) => Some(p),
            _ => None,
        }
    }

    /// All paths referenced by the expression, in source order.
    pub fn paths(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_paths(&mut out);
        out
    }

    fn collect_paths<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Path(p) => out.push(p),
            Expr::Literal(_) => {}
            Expr::Compare { lhs, rhs, .. } | Expr::And(lhs, rhs) | Expr::Or(lhs, rhs) => {
                lhs.collect_paths(out);
                rhs.collect_paths(out);
            }
            Expr::Not(inner) => inner.collect_paths(out),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Compare { .. } => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Path(p) => f.write_str(p),
            Expr::Literal(Literal::Str(s)) => write_quoted(f, s),
            Expr::Literal(Literal::Num(n)) => write!(f, "{n}"),
            Expr::Literal(Literal::Bool(b)) => write!(f, "{b}"),
            Expr::Compare { op, lhs, rhs } => {
                write_operand(f, lhs, 4)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, rhs, 4)
            }
            // Chains are left-associative: the right operand needs parens
            // when it is the same connective.
            Expr::And(lhs, rhs) => {
                write_operand(f, lhs, 2)?;
                f.write_str(" and ")?;
                write_operand(f, rhs, 3)
            }
            Expr::Or(lhs, rhs) => {
                write_operand(f, lhs, 1)?;
                f.write_str(" or ")?;
                write_operand(f, rhs, 2)
            }
            Expr::Not(inner) => {
                f.write_str("not ")?;
                write_operand(f, inner, 4)
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Path(String),
    Str(String),
    Num(f64),
    True,
    False,
    And,
    Or,
    Not,
    Op(CmpOp),
    LParen,
    RParen,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: String| ParseError { offset, message };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            '=' => {
                i += 1;
                Tok::Op(CmpOp::Eq)
            }
            '≠' => {
                i += 1;
                Tok::Op(CmpOp::Ne)
            }
            '≤' => {
                i += 1;
                Tok::Op(CmpOp::Le)
            }
            '≥' => {
                i += 1;
                Tok::Op(CmpOp::Ge)
            }
            '!' => {
                if chars.get(i + 1) == Some(&'=') {
                    i += 2;
                    Tok::Op(CmpOp::Ne)
                } else {
                    return Err(err(i, "expected `!=`".into()));
                }
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    i += 2;
                    Tok::Op(CmpOp::Le)
                } else {
                    i += 1;
                    Tok::Op(CmpOp::Lt)
                }
            }
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    i += 2;
                    Tok::Op(CmpOp::Ge)
                } else {
                    i += 1;
                    Tok::Op(CmpOp::Gt)
                }
            }
            '\'' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(err(start, "unterminated string literal".into())),
                        Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                i += 1;
                while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
                if chars.get(i) == Some(&'.') {
                    if !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                        return Err(err(i, "expected digits after decimal point".into()));
                    }
                    i += 1;
                    while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                    }
                }
                let lexeme: String = chars[start..i].iter().collect();
                let n = lexeme
                    .parse::<f64>()
                    .map_err(|_| err(start, format!("invalid number `{lexeme}`")))?;
                if !n.is_finite() {
                    return Err(err(start, "number out of range".into()));
                }
                Tok::Num(n)
            }
            c if is_ident_start(c) => {
                let mut path = String::new();
                loop {
                    if !chars.get(i).is_some_and(|&ch| is_ident_start(ch)) {
                        return Err(err(i, "expected identifier".into()));
                    }
                    while chars.get(i).is_some_and(|&ch| is_ident_char(ch)) {
                        path.push(chars[i]);
                        i += 1;
                    }
                    if chars.get(i) == Some(&'.') {
                        path.push('.');
                        i += 1;
                    } else {
                        break;
                    }
                }
                match path.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Path(path),
                }
            }
            other => return Err(err(i, format!("unexpected character `{other}`"))),
        };
        toks.push((start, tok));
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    depth: usize,
}

const MAX_DEPTH: usize = 256;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        Ok(())
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Expr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let rhs = self.cmp()?;
            lhs = Expr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.term()?;
        if let Some(Tok::Op(op)) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.term()?;
            return Ok(Expr::cmp(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.error("unexpected end of expression")),
        };
        let e = match tok {
            Tok::Path(p) => {
                self.pos += 1;
                Expr::Path(p)
            }
            Tok::Str(s) => {
                self.pos += 1;
                Expr::Literal(Literal::Str(s))
            }
            Tok::Num(n) => {
                self.pos += 1;
                Expr::Literal(Literal::Num(n))
            }
            Tok::True => {
                self.pos += 1;
                Expr::Literal(Literal::Bool(true))
            }
            Tok::False => {
                self.pos += 1;
                Expr::Literal(Literal::Bool(false))
            }
            Tok::Not => {
                self.pos += 1;
                Expr::negate(self.term()?)
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                inner
            }
            Tok::RParen => return Err(self.error("unexpected `)`")),
            Tok::And | Tok::Or => return Err(self.error("expected operand before connective")),
            Tok::Op(op) => {
                return Err(self.error(format!("expected operand before `{}`", op.symbol())))
            }
        };
        self.depth -= 1;
        Ok(e)
    }
}

/// Parses expression text.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.chars().count(),
        depth: 0,
    };
    let e = p.or()?;
    if p.pos != p.toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

fn truthy(v: Value, context: &Expr) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        Value::Null => Ok(false),
        other => Err(EvalError::Type {
            context: context.to_string(),
            expected: "boolean",
            found: other.type_name(),
        }),
    }
}

/// Evaluates an expression.
///
/// Any comparison with a `null` operand is `false`; `null` in a boolean
/// position counts as `false`. `and`/`or` short-circuit.
pub fn eval_expr(e: &Expr, env: &dyn Env) -> Result<Value, EvalError> {
    match e {
        Expr::Path(p) => env.lookup(p).ok_or_else(|| EvalError::Unbound(p.clone())),
        Expr::Literal(lit) => Ok(Value::from(lit)),
        Expr::Compare { op, lhs, rhs } => {
            let l = eval_expr(lhs, env)?;
            let r = eval_expr(rhs, env)?;
            compare(*op, &l, &r, e).map(Value::Bool)
        }
        Expr::And(lhs, rhs) => {
            if !truthy(eval_expr(lhs, env)?, lhs)? {
                return Ok(Value::Bool(false));
            }
            truthy(eval_expr(rhs, env)?, rhs).map(Value::Bool)
        }
        Expr::Or(lhs, rhs) => {
            if truthy(eval_expr(lhs, env)?, lhs)? {
                return Ok(Value::Bool(true));
            }
            truthy(eval_expr(rhs, env)?, rhs).map(Value::Bool)
        }
        Expr::Not(inner) => truthy(eval_expr(inner, env)?, inner).map(|b| Value::Bool(!b)),
    }
}

fn compare(op: CmpOp, l: &Value, r: &Value, context: &Expr) -> Result<bool, EvalError> {
    use std::cmp::Ordering;
    let ordering: Option<Ordering> = match (l, r) {
        (Value::Null, _) | (_, Value::Null) => return Ok(false),
        (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
        (Value::Num(a), Value::Num(b)) => a.partial_cmp(b),
        (Value::Bool(a), Value::Bool(b)) => match op {
            CmpOp::Eq => return Ok(a == b),
            CmpOp::Ne => return Ok(a != b),
            _ => {
                return Err(EvalError::Type {
                    context: context.to_string(),
                    expected: "string or number",
                    found: "boolean",
                })
            }
        },
        (a, b) => {
            return Err(EvalError::Type {
                context: context.to_string(),
                expected: a.type_name(),
                found: b.type_name(),
            })
        }
    };
    let Some(ord) = ordering else {
        return Ok(op == CmpOp::Ne);
    };
    Ok(match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    })
}
