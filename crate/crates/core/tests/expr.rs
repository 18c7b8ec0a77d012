mod common;

use std::collections::BTreeMap;

use bpdmn::expr::{eval_expr, parse_expr, CmpOp, EvalError, Expr, Value};
use bpdmn::simulator::behavior::StoreAction;

fn env(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

#[test]
fn card_number_comparison() {
    assert_eq!(
        parse_expr("input.cardNumber = '1234'").unwrap(),
        Expr::cmp(CmpOp::Eq, Expr::path("input.cardNumber"), Expr::str("1234"))
    );
}

#[test]
fn conjunction_with_negation() {
    assert_eq!(
        parse_expr("valid and not expired").unwrap(),
        Expr::and(Expr::path("valid"), Expr::negate(Expr::path("expired")))
    );
}

#[test]
fn empty_is_a_syntax_error() {
    assert!(parse_expr("").is_err());
    assert!(parse_expr("   ").is_err());
}

#[test]
fn constant_equality() {
    let e = parse_expr("1 = 1").unwrap();
    assert_eq!(eval_expr(&e, &env(&[])), Ok(Value::Bool(true)));
}

#[test]
fn null_operand_compares_false() {
    let e = parse_expr("x > 2").unwrap();
    assert_eq!(
        eval_expr(&e, &env(&[("x", Value::Null)])),
        Ok(Value::Bool(false))
    );
    let unbound = eval_expr(&e, &env(&[]));
    assert_eq!(unbound, Err(EvalError::Unbound("x".into())));
}

#[test]
fn conjunction_over_every_binding() {
    let e = parse_expr("a = 'y' and b = 'z'").unwrap();
    let domain = ["y", "z", "q"];
    let mut truths = Vec::new();
    for a in domain {
        for b in domain {
            let got = eval_expr(
                &e,
                &env(&[("a", Value::Str(a.into())), ("b", Value::Str(b.into()))]),
            )
            .unwrap();
            assert_eq!(got, Value::Bool(a == "y" && b == "z"), "a={a} b={b}");
            if got == Value::Bool(true) {
                truths.push((a, b));
            }
        }
    }
    assert_eq!(truths, [("y", "z")]);
    let q = env(&[("a", Value::Str("y".into())), ("b", Value::Str("q".into()))]);
    assert_eq!(eval_expr(&e, &q), Ok(Value::Bool(false)));
}

fn fixture_expressions() -> Vec<(String, Expr)> {
    let mut out = Vec::new();
    for name in common::all_fixtures() {
        let doc = common::document(&name);
        let d = &doc.diagram;
        for n in d.nodes() {
            if let Some(c) = &n.condition {
                out.push((format!("{name}:{}", n.id), c.clone()));
            }
        }
        for f in d.sequence_flows() {
            if let Some(g) = &f.guard {
                out.push((format!("{name}:{}", f.id), g.clone()));
            }
        }
        for m in d.mappings() {
            for r in &m.rules {
                out.push((format!("{name}:{}", m.id), r.from.clone()));
            }
        }
        for t in doc.behaviors.iter().flat_map(|b| &b.tasks) {
            for e in &t.effects {
                out.push((format!("{name}:{}", t.task), e.value.clone()));
            }
            for a in &t.store_actions {
                match a {
                    StoreAction::Insert { fields, .. } => {
                        out.extend(
                            fields
                                .iter()
                                .map(|(_, e)| (format!("{name}:{}", t.task), e.clone())),
                        );
                    }
                    StoreAction::Read { filter, .. } => {
                        out.extend(
                            filter
                                .iter()
                                .map(|e| (format!("{name}:{}", t.task), e.clone())),
                        );
                    }
                }
            }
        }
    }
    out
}

#[test]
fn fixture_expressions_round_trip() {
    let exprs = fixture_expressions();
    assert!(exprs.len() > 40);
    for (at, e) in exprs {
        let printed = e.to_string();
        assert_eq!(parse_expr(&printed).as_ref(), Ok(&e), "{at}: {printed}");
    }
}

#[test]
fn overflowing_literal_is_rejected() {
    let huge = "9".repeat(400);
    let e = parse_expr(&format!("x = {huge}")).unwrap_err();
    assert_eq!(e.offset, 4);
    assert!(parse_expr(&"9".repeat(300)).is_ok());
}
