// SPDX-License-Identifier: Apache-2.0

//! JSON encoding of expressions.
//!
//! Constants are bare JSON literals (strings are symbols, integers are
//! ints, numbers with a fraction or exponent are reals). References are
//! `{"ref": "S", "index": 3}`. Every other node is
//! `{"op": "<name>", "args": [...]}` plus node-specific fields.

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use super::{BinaryOp, Expr, IndexRange, UnaryOp, Value, VarRef};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JsonError {
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

fn invalid(path: &str, msg: impl Into<String>) -> JsonError {
    JsonError::Invalid {
        path: path.to_string(),
        msg: msg.into(),
    }
}

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Bool(b) => Json::Bool(*b),
        Value::Int(i) => json!(i),
        Value::Sym(s) => Json::String(s.clone()),
        Value::Real(r) => json!(r),
    }
}

pub fn value_from_json(j: &Json) -> Result<Value, JsonError> {
    value_at(j, "$")
}

fn value_at(j: &Json, path: &str) -> Result<Value, JsonError> {
    match j {
        Json::Bool(b) => Ok(Value::Bool(*b)),
        Json::String(s) => Ok(Value::Sym(s.clone())),
        Json::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Value::Int(i))
            } else if n.is_u64() {
                Err(invalid(path, "integer out of range"))
            } else {
                Ok(Value::Real(n.as_f64().unwrap()))
            }
        }
        _ => Err(invalid(
            path,
            format!("expected a literal value, found {j}"),
        )),
    }
}

pub(crate) fn var_to_json(v: &VarRef) -> Json {
    let mut m = Map::new();
    m.insert("ref".into(), Json::String(v.name.clone()));
    if let Some(i) = v.index {
        m.insert("index".into(), json!(i));
    }
    Json::Object(m)
}

pub(crate) fn var_from_json(j: &Json, path: &str) -> Result<VarRef, JsonError> {
    let m = j
        .as_object()
        .ok_or_else(|| invalid(path, "expected a reference object"))?;
    check_keys(m, &["ref", "index"], path)?;
    let name = m
        .get("ref")
        .and_then(Json::as_str)
        .ok_or_else(|| invalid(path, "missing string field 'ref'"))?;
    let index = match m.get("index") {
        None => None,
        Some(i) => Some(
            i.as_i64()
                .ok_or_else(|| invalid(path, "'index' must be an integer"))?,
        ),
    };
    Ok(VarRef {
        name: name.to_string(),
        index,
    })
}

fn check_keys(m: &Map<String, Json>, allowed: &[&str], path: &str) -> Result<(), JsonError> {
    for k in m.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(invalid(path, format!("unknown field '{k}'")));
        }
    }
    Ok(())
}

fn op_node(op: &str, args: Vec<Json>) -> Map<String, Json> {
    let mut m = Map::new();
    m.insert("op".into(), Json::String(op.into()));
    m.insert("args".into(), Json::Array(args));
    m
}

fn range_into(m: &mut Map<String, Json>, family: &str, range: &IndexRange, value: &Option<Value>) {
    m.insert("family".into(), Json::String(family.into()));
    if let Some(lo) = range.lo {
        m.insert("lo".into(), json!(lo));
    }
    if let Some(hi) = range.hi {
        m.insert("hi".into(), json!(hi));
    }
    if let Some(v) = value {
        m.insert("value".into(), value_to_json(v));
    }
}

pub fn expr_to_json(e: &Expr) -> Json {
    let m = match e {
        Expr::Const(v) => return value_to_json(v),
        Expr::Ref(v) => return var_to_json(v),
        Expr::Unary(op, a) => {
            let name = match op {
                UnaryOp::Neg => "neg",
                UnaryOp::Not => "not",
            };
            op_node(name, vec![expr_to_json(a)])
        }
        Expr::Binary(op, a, b) => op_node(op.name(), vec![expr_to_json(a), expr_to_json(b)]),
        Expr::If(c, t, f) => op_node(
            "if",
            vec![expr_to_json(c), expr_to_json(t), expr_to_json(f)],
        ),
        Expr::Case(arms, d) => {
            let mut args: Vec<Json> = arms
                .iter()
                .flat_map(|(g, v)| [expr_to_json(g), expr_to_json(v)])
                .collect();
            args.push(expr_to_json(d));
            op_node("case", args)
        }
        Expr::IsIntervened(v) => {
            let mut m = op_node("is_intervened", vec![]);
            m.insert("var".into(), var_to_json(v));
            m
        }
        Expr::InterventionValue(v, fb) => {
            let mut m = op_node("intervention_value", vec![expr_to_json(fb)]);
            m.insert("var".into(), var_to_json(v));
            m
        }
        Expr::ExistsIntervention {
            family,
            range,
            value,
        } => {
            let mut m = op_node("exists_intervention", vec![]);
            range_into(&mut m, family, range, value);
            m
        }
        Expr::ForAllIntervention {
            family,
            range,
            value,
        } => {
            let mut m = op_node("forall_intervention", vec![]);
            range_into(&mut m, family, range, value);
            m
        }
        Expr::MaxIntervenedIndex {
            family,
            upper,
            default,
        } => {
            let mut m = op_node(
                "max_intervened_index",
                vec![expr_to_json(upper), expr_to_json(default)],
            );
            m.insert("family".into(), Json::String(family.clone()));
            m
        }
        Expr::Bernoulli(p) => op_node("bernoulli", vec![expr_to_json(p)]),
    };
    Json::Object(m)
}

pub fn expr_from_json(j: &Json) -> Result<Expr, JsonError> {
    expr_at(j, "$")
}

fn expr_at(j: &Json, path: &str) -> Result<Expr, JsonError> {
    let m = match j {
        Json::Object(m) => m,
        Json::Array(_) | Json::Null => {
            return Err(invalid(path, format!("expected an expression, found {j}")))
        }
        lit => return Ok(Expr::Const(value_at(lit, path)?)),
    };
    if m.contains_key("ref") {
        return Ok(Expr::Ref(var_from_json(j, path)?));
    }
    let op = m
        .get("op")
        .and_then(Json::as_str)
        .ok_or_else(|| invalid(path, "expression object needs 'op' or 'ref'"))?;
    let args: Vec<Expr> = match m.get("args") {
        None => vec![],
        Some(Json::Array(a)) => a
            .iter()
            .enumerate()
            .map(|(i, x)| expr_at(x, &format!("{path}.args[{i}]")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(invalid(path, "'args' must be an array")),
    };
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(invalid(
                path,
                format!("'{op}' takes {n} arguments, got {}", args.len()),
            ))
        }
    };
    let mut it = args.clone().into_iter();
    let mut next = || Box::new(it.next().unwrap());
    let family = || {
        m.get("family")
            .and_then(Json::as_str)
            .map(str::to_string)
            .ok_or_else(|| invalid(path, format!("'{op}' needs a string 'family'")))
    };
    let var = || {
        m.get("var")
            .ok_or_else(|| invalid(path, format!("'{op}' needs 'var'")))
            .and_then(|v| var_from_json(v, &format!("{path}.var")))
    };
    let quantifier = || -> Result<(String, IndexRange, Option<Value>), JsonError> {
        check_keys(m, &["op", "args", "family", "lo", "hi", "value"], path)?;
        let bound = |k: &str| match m.get(k) {
            None => Ok(None),
            Some(x) => x
                .as_i64()
                .map(Some)
                .ok_or_else(|| invalid(path, format!("'{k}' must be an integer"))),
        };
        let value = match m.get("value") {
            None => None,
            Some(v) => Some(value_at(v, &format!("{path}.value"))?),
        };
        Ok((
            family()?,
            IndexRange {
                lo: bound("lo")?,
                hi: bound("hi")?,
            },
            value,
        ))
    };

    if let Some(bop) = BinaryOp::ALL.iter().find(|b| b.name() == op) {
        check_keys(m, &["op", "args"], path)?;
        arity(2)?;
        return Ok(Expr::Binary(*bop, next(), next()));
    }
    match op {
        "neg" | "not" => {
            check_keys(m, &["op", "args"], path)?;
            arity(1)?;
            let u = if op == "neg" {
                UnaryOp::Neg
            } else {
                UnaryOp::Not
            };
            Ok(Expr::Unary(u, next()))
        }
        "if" => {
            check_keys(m, &["op", "args"], path)?;
            arity(3)?;
            Ok(Expr::If(next(), next(), next()))
        }
        "case" => {
            check_keys(m, &["op", "args"], path)?;
            if args.len() % 2 != 1 {
                return Err(invalid(
                    path,
                    "'case' takes guard/value pairs and a default",
                ));
            }
            let mut args = args;
            let default = args.pop().unwrap();
            let mut arms = vec![];
            let mut it = args.into_iter();
            while let (Some(g), Some(v)) = (it.next(), it.next()) {
                arms.push((g, v));
            }
            Ok(Expr::Case(arms, Box::new(default)))
        }
        "is_intervened" => {
            check_keys(m, &["op", "args", "var"], path)?;
            arity(0)?;
            Ok(Expr::IsIntervened(var()?))
        }
        "intervention_value" => {
            check_keys(m, &["op", "args", "var"], path)?;
            arity(1)?;
            Ok(Expr::InterventionValue(var()?, next()))
        }
        "exists_intervention" => {
            arity(0)?;
            let (family, range, value) = quantifier()?;
            Ok(Expr::ExistsIntervention {
                family,
                range,
                value,
            })
        }
        "forall_intervention" => {
            arity(0)?;
            let (family, range, value) = quantifier()?;
            Ok(Expr::ForAllIntervention {
                family,
                range,
                value,
            })
        }
        "max_intervened_index" => {
            check_keys(m, &["op", "args", "family"], path)?;
            arity(2)?;
            Ok(Expr::MaxIntervenedIndex {
                family: family()?,
                upper: next(),
                default: next(),
            })
        }
        "bernoulli" => {
            check_keys(m, &["op", "args"], path)?;
            arity(1)?;
            Ok(Expr::Bernoulli(next()))
        }
        other => Err(invalid(path, format!("unknown operator '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(e: &Expr) {
        let j = expr_to_json(e);
        let back = expr_from_json(&j).unwrap();
        assert_eq!(&back, e);
        assert_eq!(expr_to_json(&back).to_string(), j.to_string());
    }

    #[test]
    fn literals_keep_their_kind() {
        assert_eq!(value_from_json(&json!(3)).unwrap(), Value::Int(3));
        assert_eq!(value_from_json(&json!(3.0)).unwrap(), Value::Real(3.0));
        assert_eq!(value_from_json(&json!("coin")).unwrap(), Value::sym("coin"));
        assert_eq!(value_to_json(&Value::Real(1.0)).to_string(), "1.0");
    }

    #[test]
    fn every_node_round_trips() {
        let s3 = VarRef::indexed("S", 3);
        round_trip(&Expr::intervention_branch(s3.clone(), Expr::member("S", 1)));
        round_trip(&Expr::case(
            vec![(Expr::eq(Expr::var("B"), Expr::int(0)), Expr::bool(true))],
            Expr::sym("lives"),
        ));
        round_trip(&Expr::not(Expr::neg(Expr::real(0.25))));
        round_trip(&Expr::ExistsIntervention {
            family: "S".into(),
            range: IndexRange {
                lo: Some(2),
                hi: None,
            },
            value: Some(Value::Bool(false)),
        });
        round_trip(&Expr::ForAllIntervention {
            family: "R".into(),
            range: IndexRange::new(1, 5),
            value: None,
        });
        round_trip(&Expr::MaxIntervenedIndex {
            family: "S".into(),
            upper: Box::new(Expr::int(30)),
            default: Box::new(Expr::int(0)),
        });
        round_trip(&Expr::Bernoulli(Box::new(Expr::var("A"))));
        for op in BinaryOp::ALL {
            round_trip(&Expr::binary(op, Expr::var("x"), Expr::int(2)));
        }
    }

    #[test]
    fn unknown_fields_and_ops_are_rejected() {
        assert!(expr_from_json(&json!({"op": "add", "args": [1, 2], "extra": 1})).is_err());
        assert!(expr_from_json(&json!({"ref": "A", "idx": 1})).is_err());
        assert!(expr_from_json(&json!({"op": "frobnicate", "args": []})).is_err());
        assert!(expr_from_json(&json!({"op": "add", "args": [1]})).is_err());
        assert!(expr_from_json(&json!(null)).is_err());
    }
}
