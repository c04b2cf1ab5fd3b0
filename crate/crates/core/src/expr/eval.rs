// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap};

use rand::RngCore;
use thiserror::Error;

use super::{BinaryOp, Expr, IndexRange, UnaryOp, Value, VarRef};
use crate::scm::InterventionSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound reference {0}")]
    UnboundRef(VarRef),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("random draw in a deterministic evaluation")]
    NonDeterministic,
}

/// Read-only variable bindings.
pub trait Env {
    fn lookup(&self, var: &VarRef) -> Option<&Value>;
}

impl Env for BTreeMap<VarRef, Value> {
    fn lookup(&self, var: &VarRef) -> Option<&Value> {
        self.get(var)
    }
}

impl Env for HashMap<VarRef, Value> {
    fn lookup(&self, var: &VarRef) -> Option<&Value> {
        self.get(var)
    }
}

/// Evaluates a deterministic expression.
pub fn eval_expr(
    expr: &Expr,
    env: &dyn Env,
    interventions: &InterventionSet,
) -> Result<Value, EvalError> {
    Evaluator {
        env,
        interventions,
        rng: None,
    }
    .eval(expr)
}

/// Evaluates an expression that may contain random draws.
pub fn eval_expr_with_rng(
    expr: &Expr,
    env: &dyn Env,
    interventions: &InterventionSet,
    rng: &mut dyn RngCore,
) -> Result<Value, EvalError> {
    Evaluator {
        env,
        interventions,
        rng: Some(rng),
    }
    .eval(expr)
}

struct Evaluator<'a> {
    env: &'a dyn Env,
    interventions: &'a InterventionSet,
    rng: Option<&'a mut dyn RngCore>,
}

fn domain_err(msg: impl Into<String>) -> EvalError {
    EvalError::Domain(msg.into())
}

impl Evaluator<'_> {
    fn eval(&mut self, expr: &Expr) -> Result<Value, EvalError> {
        match expr {
            Expr::Const(v) => Ok(v.clone()),
            Expr::Ref(v) => self
                .env
                .lookup(v)
                .cloned()
                .ok_or_else(|| EvalError::UnboundRef(v.clone())),
            Expr::Unary(op, a) => {
                let a = self.eval(a)?;
                match (op, a) {
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnaryOp::Neg, Value::Int(i)) => i
                        .checked_neg()
                        .map(Value::Int)
                        .ok_or_else(|| domain_err("integer overflow")),
                    (UnaryOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
                    (op, a) => Err(domain_err(format!("{op:?} applied to {a}"))),
                }
            }
            Expr::Binary(BinaryOp::And, a, b) => {
                if !self.eval_bool(a)? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(self.eval_bool(b)?))
            }
            Expr::Binary(BinaryOp::Or, a, b) => {
                if self.eval_bool(a)? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(self.eval_bool(b)?))
            }
            Expr::Binary(op, a, b) => {
                let a = self.eval(a)?;
                let b = self.eval(b)?;
                apply_binary(*op, &a, &b)
            }
            Expr::If(c, t, e) => {
                if self.eval_bool(c)? {
                    self.eval(t)
                } else {
                    self.eval(e)
                }
            }
            Expr::Case(arms, default) => {
                for (guard, value) in arms {
                    if self.eval_bool(guard)? {
                        return self.eval(value);
                    }
                }
                self.eval(default)
            }
            Expr::IsIntervened(v) => Ok(Value::Bool(self.interventions.contains_var(v))),
            Expr::InterventionValue(v, fallback) => match self.interventions.get(v) {
                Some(x) => Ok(x.clone()),
                None => self.eval(fallback),
            },
            Expr::ExistsIntervention {
                family,
                range,
                value,
            } => Ok(Value::Bool(self.interventions.iter().any(|(k, x)| {
                range.matches(family, k) && value.as_ref().is_none_or(|want| want == x)
            }))),
            Expr::ForAllIntervention {
                family,
                range,
                value,
            } => {
                let (Some(lo), Some(hi)) = (range.lo, range.hi) else {
                    return Err(domain_err("forall over an unbounded index range"));
                };
                Ok(Value::Bool((lo..=hi).all(|i| {
                    match self.interventions.get(&VarRef::indexed(family.clone(), i)) {
                        Some(x) => value.as_ref().is_none_or(|want| want == x),
                        None => false,
                    }
                })))
            }
            Expr::MaxIntervenedIndex {
                family,
                upper,
                default,
            } => {
                let upper = self
                    .eval(upper)?
                    .as_int()
                    .ok_or_else(|| domain_err("max-intervened-index bound must be int"))?;
                let range = IndexRange {
                    lo: None,
                    hi: Some(upper),
                };
                let best = self
                    .interventions
                    .vars()
                    .filter(|k| k.index.is_some() && range.matches(family, k))
                    .filter_map(|k| k.index)
                    .max();
                match best {
                    Some(i) => Ok(Value::Int(i)),
                    None => self.eval(default),
                }
            }
            Expr::Bernoulli(p) => {
                let p = self
                    .eval(p)?
                    .as_f64()
                    .ok_or_else(|| domain_err("bernoulli parameter must be numeric"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(domain_err(format!(
                        "bernoulli parameter {p} outside [0, 1]"
                    )));
                }
                let rng = self.rng.as_mut().ok_or(EvalError::NonDeterministic)?;
                let draw = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                Ok(Value::Bool(draw < p))
            }
        }
    }

    fn eval_bool(&mut self, e: &Expr) -> Result<bool, EvalError> {
        match self.eval(e)? {
            Value::Bool(b) => Ok(b),
            v => Err(domain_err(format!("expected bool, found {v}"))),
        }
    }
}

/// Applies a strict binary operator to two values.
pub(crate) fn apply_binary(op: BinaryOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    match op {
        Eq => a
            .semantic_eq(b)
            .map(Value::Bool)
            .ok_or_else(|| domain_err(format!("cannot compare {a} with {b}"))),
        And | Or => match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => {
                Ok(Value::Bool(if op == And { *x && *y } else { *x || *y }))
            }
            _ => Err(domain_err(format!("{} expects bools", op.name()))),
        },
        Lt | Le => {
            let (x, y) = numeric_pair(op, a, b)?;
            Ok(Value::Bool(if op == Lt { x < y } else { x <= y }))
        }
        _ => match (a, b) {
            (Value::Int(x), Value::Int(y)) => int_arith(op, *x, *y),
            _ => {
                let (x, y) = numeric_pair(op, a, b)?;
                real_arith(op, x, y)
            }
        },
    }
}

fn numeric_pair(op: BinaryOp, a: &Value, b: &Value) -> Result<(f64, f64), EvalError> {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(domain_err(format!(
            "{} expects numbers, got {a} and {b}",
            op.name()
        ))),
    }
}

fn int_arith(op: BinaryOp, x: i64, y: i64) -> Result<Value, EvalError> {
    use BinaryOp::*;
    let overflow = || domain_err("integer overflow");
    let r = match op {
        Add => x.checked_add(y).ok_or_else(overflow)?,
        Sub => x.checked_sub(y).ok_or_else(overflow)?,
        Mul => x.checked_mul(y).ok_or_else(overflow)?,
        Div => {
            if y == 0 {
                return Err(EvalError::DivisionByZero);
            }
            x.checked_div_euclid(y).ok_or_else(overflow)?
        }
        Mod => {
            if y == 0 {
                return Err(EvalError::DivisionByZero);
            }
            x.checked_rem_euclid(y).ok_or_else(overflow)?
        }
        Pow => {
            let e = u32::try_from(y).map_err(|_| domain_err("negative integer exponent"))?;
            x.checked_pow(e).ok_or_else(overflow)?
        }
        Min => x.min(y),
        Max => x.max(y),
        _ => unreachable!(),
    };
    Ok(Value::Int(r))
}

fn real_arith(op: BinaryOp, x: f64, y: f64) -> Result<Value, EvalError> {
    use BinaryOp::*;
    let r = match op {
        Add => x + y,
        Sub => x - y,
        Mul => x * y,
        Div => {
            if y == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            x / y
        }
        Mod => {
            if y == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            x.rem_euclid(y)
        }
        Pow => x.powf(y),
        Min => x.min(y),
        Max => x.max(y),
        _ => unreachable!(),
    };
    if r.is_finite() {
        Ok(Value::Real(r))
    } else {
        Err(domain_err(format!(
            "{} of {x} and {y} is not finite",
            op.name()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(VarRef, Value)]) -> BTreeMap<VarRef, Value> {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn reference_identity() {
        let e = env(&[(VarRef::scalar("A"), Value::Int(7))]);
        let v = eval_expr(&Expr::var("A"), &e, &InterventionSet::new()).unwrap();
        assert_eq!(v, Value::Int(7));
    }

    #[test]
    fn held_domino_overrides_the_push() {
        let s3 = VarRef::indexed("S", 3);
        let expr = Expr::ite(
            Expr::IsIntervened(s3.clone()),
            Expr::intervention_value(s3.clone(), Expr::member("S", 1)),
            Expr::member("S", 1),
        );
        let e = env(&[(VarRef::indexed("S", 1), Value::Int(1))]);
        let i = InterventionSet::single(s3, Value::Int(0));
        assert_eq!(eval_expr(&expr, &e, &i).unwrap(), Value::Int(0));
        assert_eq!(
            eval_expr(&expr, &e, &InterventionSet::new()).unwrap(),
            Value::Int(1)
        );
    }

    #[test]
    fn max_intervened_index_matches_linear_scan() {
        let i: InterventionSet = [
            (VarRef::indexed("S", 12), Value::Int(1)),
            (VarRef::indexed("S", 24), Value::Int(1)),
            (VarRef::indexed("L", 40), Value::Int(1)),
        ]
        .into_iter()
        .collect();
        let scan = |upper: i64| {
            let mut best = None;
            for (k, _) in i.iter() {
                if k.name == "S" && k.index.unwrap() <= upper {
                    best = Some(best.map_or(k.index.unwrap(), |b: i64| b.max(k.index.unwrap())));
                }
            }
            best.unwrap_or(0)
        };
        for upper in [0, 11, 12, 23, 24, 30, 36] {
            let expr = Expr::MaxIntervenedIndex {
                family: "S".into(),
                upper: Box::new(Expr::int(upper)),
                default: Box::new(Expr::int(0)),
            };
            let got = eval_expr(&expr, &BTreeMap::new(), &i).unwrap();
            assert_eq!(got, Value::Int(scan(upper)), "upper = {upper}");
        }
        let expr = Expr::MaxIntervenedIndex {
            family: "S".into(),
            upper: Box::new(Expr::int(30)),
            default: Box::new(Expr::int(0)),
        };
        assert_eq!(
            eval_expr(&expr, &BTreeMap::new(), &i).unwrap(),
            Value::Int(24)
        );
    }

    #[test]
    fn errors() {
        let none = InterventionSet::new();
        let empty = BTreeMap::new();
        assert_eq!(
            eval_expr(&Expr::var("Q"), &empty, &none),
            Err(EvalError::UnboundRef(VarRef::scalar("Q")))
        );
        assert_eq!(
            eval_expr(&Expr::div(Expr::int(1), Expr::int(0)), &empty, &none),
            Err(EvalError::DivisionByZero)
        );
        assert_eq!(
            eval_expr(&Expr::div(Expr::real(1.0), Expr::real(0.0)), &empty, &none),
            Err(EvalError::DivisionByZero)
        );
        assert!(matches!(
            eval_expr(&Expr::add(Expr::int(1), Expr::bool(true)), &empty, &none),
            Err(EvalError::Domain(_))
        ));
        assert_eq!(
            eval_expr(&Expr::Bernoulli(Box::new(Expr::real(0.5))), &empty, &none),
            Err(EvalError::NonDeterministic)
        );
    }

    #[test]
    fn case_is_first_match() {
        let b = || Expr::var("B");
        let fc = Expr::case(
            vec![
                (Expr::eq(b(), Expr::int(0)), Expr::bool(true)),
                (
                    Expr::and(Expr::le(Expr::int(0), b()), Expr::le(b(), Expr::int(10))),
                    Expr::bool(false),
                ),
            ],
            Expr::bool(true),
        );
        let run = |x: i64| {
            eval_expr(
                &fc,
                &env(&[(VarRef::scalar("B"), Value::Int(x))]),
                &InterventionSet::new(),
            )
            .unwrap()
        };
        assert_eq!(run(0), Value::Bool(true));
        assert_eq!(run(1), Value::Bool(false));
        assert_eq!(run(11), Value::Bool(true));
    }

    #[test]
    fn quantifiers_over_families() {
        let i: InterventionSet = (1..=3)
            .map(|k| (VarRef::indexed("R", k), Value::Bool(false)))
            .collect();
        let all = |hi| Expr::ForAllIntervention {
            family: "R".into(),
            range: IndexRange::new(1, hi),
            value: Some(Value::Bool(false)),
        };
        let empty = BTreeMap::new();
        assert_eq!(eval_expr(&all(3), &empty, &i).unwrap(), Value::Bool(true));
        assert_eq!(eval_expr(&all(4), &empty, &i).unwrap(), Value::Bool(false));
        let exists = Expr::ExistsIntervention {
            family: "R".into(),
            range: IndexRange::ALL,
            value: Some(Value::Bool(true)),
        };
        assert_eq!(eval_expr(&exists, &empty, &i).unwrap(), Value::Bool(false));
    }

    #[test]
    fn modulo_is_euclidean() {
        let empty = BTreeMap::new();
        let none = InterventionSet::new();
        let v = eval_expr(&Expr::modulo(Expr::int(-3), Expr::int(5)), &empty, &none).unwrap();
        assert_eq!(v, Value::Int(2));
    }
}
