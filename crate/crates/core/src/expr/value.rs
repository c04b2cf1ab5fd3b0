// SPDX-License-Identifier: Apache-2.0

//! Values, value domains and variable references.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

/// Absolute tolerance used when comparing real values across two models.
pub const EPS_VAL: f64 = 1e-9;

/// Maximum number of elements `Domain::values` will materialize.
pub const MAX_ENUMERATED_DOMAIN: u128 = 1 << 20;

/// Runtime type of a value, used by the type checker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Bool,
    Int,
    Real,
    Sym,
}

impl Type {
    pub fn is_numeric(self) -> bool {
        matches!(self, Type::Int | Type::Real)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Type::Bool => "bool",
            Type::Int => "int",
            Type::Real => "real",
            Type::Sym => "symbol",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Sym(String),
    Real(f64),
}

impl Value {
    pub fn sym(name: impl Into<String>) -> Self {
        Value::Sym(name.into())
    }

    pub fn ty(&self) -> Type {
        match self {
            Value::Bool(_) => Type::Bool,
            Value::Int(_) => Type::Int,
            Value::Sym(_) => Type::Sym,
            Value::Real(_) => Type::Real,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// Numeric-aware equality: `Int(1)` equals `Real(1.0)`. Returns `None`
    /// when the two values are of incomparable kinds.
    pub fn semantic_eq(&self, other: &Value) -> Option<bool> {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => Some(a == b),
            (Value::Sym(a), Value::Sym(b)) => Some(a == b),
            (Value::Int(a), Value::Int(b)) => Some(a == b),
            (a, b) if a.ty().is_numeric() && b.ty().is_numeric() => {
                Some(a.as_f64().unwrap() == b.as_f64().unwrap())
            }
            _ => None,
        }
    }

    /// Equality used when comparing two models: exact for discrete values,
    /// within `eps` for reals. Also returns the absolute deviation for reals.
    pub fn close_to(&self, other: &Value, eps: f64) -> (bool, Option<f64>) {
        match (self, other) {
            (Value::Real(_), _) | (_, Value::Real(_))
                if self.ty().is_numeric() && other.ty().is_numeric() =>
            {
                let d = (self.as_f64().unwrap() - other.as_f64().unwrap()).abs();
                (d <= eps, Some(d))
            }
            _ => (self.semantic_eq(other).unwrap_or(false), None),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Bool(_) => 0,
            Value::Int(_) => 1,
            Value::Real(_) => 2,
            Value::Sym(_) => 3,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Sym(a), Value::Sym(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Bool(b) => b.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Real(r) => r.to_bits().hash(state),
            Value::Sym(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

/// The value space a variable ranges over.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Boolean,
    /// Inclusive integer range.
    FiniteInt {
        lo: i64,
        hi: i64,
    },
    Symbolic(Vec<String>),
    /// Real line, optionally restricted to a closed interval.
    Real {
        bounds: Option<(f64, f64)>,
    },
}

impl Domain {
    pub fn real() -> Self {
        Domain::Real { bounds: None }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain::Real {
            bounds: Some((lo, hi)),
        }
    }

    pub fn symbols<S: AsRef<str>>(names: &[S]) -> Self {
        Domain::Symbolic(names.iter().map(|s| s.as_ref().to_string()).collect())
    }

    pub fn ty(&self) -> Type {
        match self {
            Domain::Boolean => Type::Bool,
            Domain::FiniteInt { .. } => Type::Int,
            Domain::Symbolic(_) => Type::Sym,
            Domain::Real { .. } => Type::Real,
        }
    }

    /// Checks the structural invariants of the domain itself.
    pub fn check(&self) -> Result<(), String> {
        match self {
            Domain::FiniteInt { lo, hi } if lo > hi => {
                Err(format!("integer range {lo}..{hi} is empty"))
            }
            Domain::Symbolic(s) if s.is_empty() => Err("symbol set is empty".into()),
            Domain::Real {
                bounds: Some((lo, hi)),
            } if !(lo <= hi) => Err(format!("real interval [{lo}, {hi}] is empty")),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Domain::Boolean, Value::Bool(_)) => true,
            (Domain::FiniteInt { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            (Domain::Symbolic(names), Value::Sym(s)) => names.iter().any(|n| n == s),
            (Domain::Real { bounds }, Value::Real(_) | Value::Int(_)) => {
                let x = v.as_f64().unwrap();
                x.is_finite() && bounds.is_none_or(|(lo, hi)| lo <= x && x <= hi)
            }
            _ => false,
        }
    }

    /// Converts `v` into the canonical representation of this domain
    /// (integers become reals in a real domain) and checks membership.
    pub fn coerce(&self, v: Value) -> Option<Value> {
        let v = match (self, v) {
            (Domain::Real { .. }, Value::Int(i)) => Value::Real(i as f64),
            (_, v) => v,
        };
        self.contains(&v).then_some(v)
    }

    /// Number of elements, `None` for real domains.
    pub fn size(&self) -> Option<u128> {
        match self {
            Domain::Boolean => Some(2),
            Domain::FiniteInt { lo, hi } => Some((*hi as i128 - *lo as i128 + 1).max(0) as u128),
            Domain::Symbolic(s) => Some(s.len() as u128),
            Domain::Real { .. } => None,
        }
    }

    /// All members in ascending order, if the domain is finite and small
    /// enough to materialize.
    pub fn values(&self) -> Option<Vec<Value>> {
        if self.size()? > MAX_ENUMERATED_DOMAIN {
            return None;
        }
        Some(match self {
            Domain::Boolean => vec![Value::Bool(false), Value::Bool(true)],
            Domain::FiniteInt { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            Domain::Symbolic(s) => s.iter().cloned().map(Value::Sym).collect(),
            Domain::Real { .. } => unreachable!(),
        })
    }

    /// Parses a textual value against this domain. Booleans accept
    /// `true`/`false` and `1`/`0`.
    pub fn parse_value(&self, text: &str) -> Option<Value> {
        let text = text.trim();
        let v = match self {
            Domain::Boolean => match text {
                "true" | "1" => Value::Bool(true),
                "false" | "0" => Value::Bool(false),
                _ => return None,
            },
            Domain::FiniteInt { .. } => Value::Int(text.parse().ok()?),
            Domain::Symbolic(_) => Value::Sym(text.to_string()),
            Domain::Real { .. } => Value::Real(text.parse().ok()?),
        };
        self.coerce(v)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Boolean => f.write_str("bool"),
            Domain::FiniteInt { lo, hi } => write!(f, "int[{lo}..{hi}]"),
            Domain::Symbolic(s) => write!(f, "{{{}}}", s.join(", ")),
            Domain::Real { bounds: None } => f.write_str("real"),
            Domain::Real {
                bounds: Some((lo, hi)),
            } => write!(f, "real[{lo:?}, {hi:?}]"),
        }
    }
}

/// Reference to a scalar variable or to one member of an indexed family
/// such as `S_12`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef {
    pub name: String,
    pub index: Option<i64>,
}

impl VarRef {
    pub fn scalar(name: impl Into<String>) -> Self {
        VarRef {
            name: name.into(),
            index: None,
        }
    }

    pub fn indexed(name: impl Into<String>, index: i64) -> Self {
        VarRef {
            name: name.into(),
            index: Some(index),
        }
    }
}

impl VarRef {
    /// Inverse of the display form: a trailing `_<int>` is read as a family
    /// index.
    pub fn parse(text: &str) -> VarRef {
        if let Some((name, idx)) = text.rsplit_once('_') {
            if !name.is_empty() {
                if let Ok(i) = idx.parse::<i64>() {
                    if i.to_string() == idx {
                        return VarRef::indexed(name, i);
                    }
                }
            }
        }
        VarRef::scalar(text)
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}_{}", self.name, i),
            None => f.write_str(&self.name),
        }
    }
}
