// SPDX-License-Identifier: Apache-2.0

//! Typed expression trees.
//!
//! Every structural equation and every consolidation function is an
//! [`Expr`]. Besides the usual arithmetic, logic and branching nodes the IR
//! has a handful of primitives that query the active intervention set, which
//! is what lets a consolidated equation keep honouring interventions on
//! variables it no longer computes explicitly.
//!
//! Expressions are plain trees: a sub-expression that is used twice is
//! stored twice, and [`Expr::node_count`] counts it twice.

mod eval;
mod json;
mod value;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub(crate) use eval::apply_binary;
pub use eval::{eval_expr, eval_expr_with_rng, Env, EvalError};
pub use json::{expr_from_json, expr_to_json, value_from_json, value_to_json, JsonError};
pub use value::{Domain, Type, Value, VarRef, EPS_VAL, MAX_ENUMERATED_DOMAIN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Mod,
    Min,
    Max,
    Lt,
    Le,
    Eq,
    And,
    Or,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 13] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
        BinaryOp::Mod,
        BinaryOp::Min,
        BinaryOp::Max,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Eq,
        BinaryOp::And,
        BinaryOp::Or,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
            BinaryOp::Pow => "pow",
            BinaryOp::Mod => "mod",
            BinaryOp::Min => "min",
            BinaryOp::Max => "max",
            BinaryOp::Lt => "lt",
            BinaryOp::Le => "le",
            BinaryOp::Eq => "eq",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Mod => "mod",
            BinaryOp::Min => "min",
            BinaryOp::Max => "max",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Eq => "=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Add
                | BinaryOp::Sub
                | BinaryOp::Mul
                | BinaryOp::Div
                | BinaryOp::Pow
                | BinaryOp::Mod
                | BinaryOp::Min
                | BinaryOp::Max
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinaryOp::Lt | BinaryOp::Le | BinaryOp::Eq)
    }

    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            BinaryOp::Add
                | BinaryOp::Mul
                | BinaryOp::Min
                | BinaryOp::Max
                | BinaryOp::Eq
                | BinaryOp::And
                | BinaryOp::Or
        )
    }
}

/// Inclusive index range over a variable family; open ends are unbounded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct IndexRange {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl IndexRange {
    pub const ALL: IndexRange = IndexRange { lo: None, hi: None };

    pub fn new(lo: i64, hi: i64) -> Self {
        IndexRange {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo.is_none() && self.hi.is_none()
    }

    /// Whether `var` belongs to `family` within this range. Scalar
    /// variables named like the family only match an unbounded range.
    pub fn matches(&self, family: &str, var: &VarRef) -> bool {
        if var.name != family {
            return false;
        }
        match var.index {
            None => self.is_unbounded(),
            Some(i) => self.lo.is_none_or(|lo| lo <= i) && self.hi.is_none_or(|hi| i <= hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Value),
    Ref(VarRef),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Ordered guard/value arms with first-match semantics and a default.
    Case(Vec<(Expr, Expr)>, Box<Expr>),
    IsIntervened(VarRef),
    /// Value of the intervention on the variable if there is one, otherwise
    /// the fallback. This is the conditional branch every intervenable
    /// variable receives when it is inlined.
    InterventionValue(VarRef, Box<Expr>),
    /// True iff some atom on a family member in `range` is active (and,
    /// when given, assigns `value`).
    ExistsIntervention {
        family: String,
        range: IndexRange,
        value: Option<Value>,
    },
    /// True iff every family member in the bounded `range` carries an atom.
    ForAllIntervention {
        family: String,
        range: IndexRange,
        value: Option<Value>,
    },
    /// Largest intervened family index not above `upper`, else `default`.
    MaxIntervenedIndex {
        family: String,
        upper: Box<Expr>,
        default: Box<Expr>,
    },
    /// A Bernoulli draw with success probability given by the argument.
    /// Only legal in models that have not been reparameterized.
    Bernoulli(Box<Expr>),
}

// Constructors used throughout the crate and by the model builders.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn bool(b: bool) -> Expr {
        Expr::Const(Value::Bool(b))
    }

    pub fn int(i: i64) -> Expr {
        Expr::Const(Value::Int(i))
    }

    pub fn real(r: f64) -> Expr {
        Expr::Const(Value::Real(r))
    }

    pub fn sym(s: &str) -> Expr {
        Expr::Const(Value::sym(s))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Ref(VarRef::scalar(name))
    }

    pub fn member(name: &str, index: i64) -> Expr {
        Expr::Ref(VarRef::indexed(name, index))
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn not(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Not, a)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Neg, a)
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Or, a, b)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, a, b)
    }

    pub fn modulo(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mod, a, b)
    }

    pub fn min(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Min, a, b)
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Max, a, b)
    }

    pub fn lt(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Lt, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Le, a, b)
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Eq, a, b)
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn case(arms: Vec<(Expr, Expr)>, default: Expr) -> Expr {
        Expr::Case(arms, Box::new(default))
    }

    pub fn intervention_value(var: VarRef, fallback: Expr) -> Expr {
        Expr::InterventionValue(var, Box::new(fallback))
    }

    /// The literal intervention branch
    /// `if do(V) in I then value(V) else f`.
    pub fn intervention_branch(var: VarRef, f: Expr) -> Expr {
        Expr::ite(
            Expr::IsIntervened(var.clone()),
            Expr::intervention_value(var, f.clone()),
            f,
        )
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    pub fn as_const(&self) -> Option<&Value> {
        match self {
            Expr::Const(v) => Some(v),
            _ => None,
        }
    }

    /// Number of nodes in the tree. Leaves (constants, references and the
    /// intervention predicates) count one; every other node counts one plus
    /// its children.
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_)
            | Expr::Ref(_)
            | Expr::IsIntervened(_)
            | Expr::ExistsIntervention { .. }
            | Expr::ForAllIntervention { .. } => 1,
            Expr::Unary(_, a) | Expr::InterventionValue(_, a) | Expr::Bernoulli(a) => {
                1 + a.node_count()
            }
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
            Expr::If(c, t, e) => 1 + c.node_count() + t.node_count() + e.node_count(),
            Expr::Case(arms, d) => {
                1 + d.node_count()
                    + arms
                        .iter()
                        .map(|(g, v)| g.node_count() + v.node_count())
                        .sum::<usize>()
            }
            Expr::MaxIntervenedIndex { upper, default, .. } => {
                1 + upper.node_count() + default.node_count()
            }
        }
    }

    /// Direct sub-expressions in a fixed order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_)
            | Expr::Ref(_)
            | Expr::IsIntervened(_)
            | Expr::ExistsIntervention { .. }
            | Expr::ForAllIntervention { .. } => vec![],
            Expr::Unary(_, a) | Expr::InterventionValue(_, a) | Expr::Bernoulli(a) => vec![a],
            Expr::Binary(_, a, b) => vec![a, b],
            Expr::If(c, t, e) => vec![c, t, e],
            Expr::Case(arms, d) => {
                let mut out: Vec<&Expr> = arms.iter().flat_map(|(g, v)| [g, v]).collect();
                out.push(d);
                out
            }
            Expr::MaxIntervenedIndex { upper, default, .. } => vec![upper, default],
        }
    }

    /// Rebuilds this node with every direct child replaced by `f(child)`.
    pub fn map_children(&self, mut f: impl FnMut(&Expr) -> Expr) -> Expr {
        match self {
            Expr::Const(_)
            | Expr::Ref(_)
            | Expr::IsIntervened(_)
            | Expr::ExistsIntervention { .. }
            | Expr::ForAllIntervention { .. } => self.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(f(a))),
            Expr::InterventionValue(v, a) => Expr::InterventionValue(v.clone(), Box::new(f(a))),
            Expr::Bernoulli(a) => Expr::Bernoulli(Box::new(f(a))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(f(a)), Box::new(f(b))),
            Expr::If(c, t, e) => Expr::If(Box::new(f(c)), Box::new(f(t)), Box::new(f(e))),
            Expr::Case(arms, d) => {
                let arms = arms.iter().map(|(g, v)| (f(g), f(v))).collect();
                Expr::Case(arms, Box::new(f(d)))
            }
            Expr::MaxIntervenedIndex {
                family,
                upper,
                default,
            } => Expr::MaxIntervenedIndex {
                family: family.clone(),
                upper: Box::new(f(upper)),
                default: Box::new(f(default)),
            },
        }
    }

    /// Variables read through `Ref` nodes.
    pub fn free_refs(&self) -> BTreeSet<VarRef> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut BTreeSet<VarRef>) {
        if let Expr::Ref(v) = self {
            out.insert(v.clone());
        }
        for c in self.children() {
            c.collect_refs(out);
        }
    }

    /// Whether any node inspects the intervention set.
    pub fn queries_interventions(&self) -> bool {
        match self {
            Expr::IsIntervened(_)
            | Expr::InterventionValue(..)
            | Expr::ExistsIntervention { .. }
            | Expr::ForAllIntervention { .. }
            | Expr::MaxIntervenedIndex { .. } => true,
            _ => self.children().into_iter().any(Expr::queries_interventions),
        }
    }

    /// Whether the tree contains a random draw.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Expr::Bernoulli(_)) || self.children().into_iter().any(Expr::is_stochastic)
    }

    /// Number of `Ref` occurrences of `var`.
    pub fn occurrences(&self, var: &VarRef) -> usize {
        let here = matches!(self, Expr::Ref(v) if v == var) as usize;
        here + self
            .children()
            .into_iter()
            .map(|c| c.occurrences(var))
            .sum::<usize>()
    }

    /// Replaces every `Ref` to a bound variable by a copy of its binding.
    /// Bindings are not applied recursively to their own output.
    pub fn substitute(&self, bindings: &BTreeMap<VarRef, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        match self {
            Expr::Ref(v) => bindings.get(v).cloned().unwrap_or_else(|| self.clone()),
            _ => self.map_children(|c| c.substitute(bindings)),
        }
    }

    /// Infers the result type, checking operand kinds on the way.
    /// `lookup` resolves variable types; unknown variables are an error.
    pub fn infer_type(&self, lookup: &dyn Fn(&VarRef) -> Option<Type>) -> Result<Type, String> {
        let numeric = |t: Type, what: &str| {
            if t.is_numeric() {
                Ok(())
            } else {
                Err(format!("{what} expects a number, found {t}"))
            }
        };
        let boolean = |t: Type, what: &str| {
            if t == Type::Bool {
                Ok(())
            } else {
                Err(format!("{what} expects a bool, found {t}"))
            }
        };
        Ok(match self {
            Expr::Const(v) => v.ty(),
            Expr::Ref(v) => lookup(v).ok_or_else(|| format!("unresolved reference {v}"))?,
            Expr::Unary(UnaryOp::Neg, a) => {
                let t = a.infer_type(lookup)?;
                numeric(t, "negation")?;
                t
            }
            Expr::Unary(UnaryOp::Not, a) => {
                boolean(a.infer_type(lookup)?, "not")?;
                Type::Bool
            }
            Expr::Binary(op, a, b) => {
                let (ta, tb) = (a.infer_type(lookup)?, b.infer_type(lookup)?);
                match op {
                    BinaryOp::And | BinaryOp::Or => {
                        boolean(ta, op.name())?;
                        boolean(tb, op.name())?;
                        Type::Bool
                    }
                    BinaryOp::Lt | BinaryOp::Le => {
                        numeric(ta, op.name())?;
                        numeric(tb, op.name())?;
                        Type::Bool
                    }
                    BinaryOp::Eq => {
                        if ta != tb && !(ta.is_numeric() && tb.is_numeric()) {
                            return Err(format!("cannot compare {ta} with {tb}"));
                        }
                        Type::Bool
                    }
                    _ => {
                        numeric(ta, op.name())?;
                        numeric(tb, op.name())?;
                        if ta == Type::Int && tb == Type::Int {
                            Type::Int
                        } else {
                            Type::Real
                        }
                    }
                }
            }
            Expr::If(c, t, e) => {
                boolean(c.infer_type(lookup)?, "if condition")?;
                unify(t.infer_type(lookup)?, e.infer_type(lookup)?)?
            }
            Expr::Case(arms, d) => {
                let mut ty = d.infer_type(lookup)?;
                for (g, v) in arms {
                    boolean(g.infer_type(lookup)?, "case guard")?;
                    ty = unify(ty, v.infer_type(lookup)?)?;
                }
                ty
            }
            Expr::IsIntervened(_)
            | Expr::ExistsIntervention { .. }
            | Expr::ForAllIntervention { .. } => {
                if let Expr::ForAllIntervention { range, .. } = self {
                    if range.lo.is_none() || range.hi.is_none() {
                        return Err("forall over interventions needs a bounded range".into());
                    }
                }
                Type::Bool
            }
            Expr::InterventionValue(v, fb) => {
                let tf = fb.infer_type(lookup)?;
                match lookup(v) {
                    Some(tv) => unify(tv, tf)?,
                    None => tf,
                }
            }
            Expr::MaxIntervenedIndex { upper, default, .. } => {
                let tu = upper.infer_type(lookup)?;
                if tu != Type::Int {
                    return Err(format!(
                        "max-intervened-index bound must be int, found {tu}"
                    ));
                }
                let td = default.infer_type(lookup)?;
                if td != Type::Int {
                    return Err(format!(
                        "max-intervened-index default must be int, found {td}"
                    ));
                }
                Type::Int
            }
            Expr::Bernoulli(p) => {
                numeric(p.infer_type(lookup)?, "bernoulli")?;
                Type::Bool
            }
        })
    }
}

fn unify(a: Type, b: Type) -> Result<Type, String> {
    match (a, b) {
        _ if a == b => Ok(a),
        (Type::Int, Type::Real) | (Type::Real, Type::Int) => Ok(Type::Real),
        _ => Err(format!("branches disagree: {a} vs {b}")),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(Value::Sym(s)) => write!(f, "'{s}'"),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Ref(v) => write!(f, "{v}"),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "-({a})"),
            Expr::Unary(UnaryOp::Not, a) => write!(f, "!({a})"),
            Expr::Binary(op @ (BinaryOp::Min | BinaryOp::Max), a, b) => {
                write!(f, "{}({a}, {b})", op.symbol())
            }
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::If(c, t, e) => write!(f, "(if {c} then {t} else {e})"),
            Expr::Case(arms, d) => {
                f.write_str("case {")?;
                for (g, v) in arms {
                    write!(f, " {g} => {v};")?;
                }
                write!(f, " else => {d} }}")
            }
            Expr::IsIntervened(v) => write!(f, "do({v})?"),
            Expr::InterventionValue(v, fb) => write!(f, "do({v}) ?? {fb}"),
            Expr::ExistsIntervention {
                family,
                range,
                value,
            } => write!(
                f,
                "exists do({}{}{})",
                family,
                fmt_range(range),
                fmt_val(value)
            ),
            Expr::ForAllIntervention {
                family,
                range,
                value,
            } => write!(
                f,
                "forall do({}{}{})",
                family,
                fmt_range(range),
                fmt_val(value)
            ),
            Expr::MaxIntervenedIndex {
                family,
                upper,
                default,
            } => write!(f, "maxidx({family} <= {upper}; {default})"),
            Expr::Bernoulli(p) => write!(f, "bern({p})"),
        }
    }
}

fn fmt_range(r: &IndexRange) -> String {
    match (r.lo, r.hi) {
        (None, None) => String::new(),
        (lo, hi) => format!(
            "_[{}..{}]",
            lo.map(|x| x.to_string()).unwrap_or_default(),
            hi.map(|x| x.to_string()).unwrap_or_default()
        ),
    }
}

fn fmt_val(v: &Option<Value>) -> String {
    v.as_ref().map(|v| format!(" = {v}")).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_count_leaf_and_binary() {
        assert_eq!(Expr::int(5).node_count(), 1);
        assert_eq!(Expr::add(Expr::var("A"), Expr::int(1)).node_count(), 3);
    }

    #[test]
    fn node_count_of_intervention_branch() {
        // if(1) + is_intervened(1) + value(1 + f) + f, with f a single ref
        let wrapped = Expr::intervention_branch(VarRef::scalar("V"), Expr::var("A"));
        assert_eq!(wrapped.node_count(), 5);
        let f = Expr::add(Expr::var("A"), Expr::int(1));
        let wrapped = Expr::intervention_branch(VarRef::scalar("V"), f.clone());
        assert_eq!(wrapped.node_count(), 3 + 2 * f.node_count());
    }

    #[test]
    fn substitute_single_and_identity() {
        let b = VarRef::scalar("B");
        let bound = Expr::add(Expr::var("A"), Expr::int(1));
        let mut m = BTreeMap::new();
        m.insert(b.clone(), bound.clone());
        assert_eq!(Expr::Ref(b).substitute(&m), bound);
        let e = Expr::and(Expr::var("E"), Expr::var("F"));
        assert_eq!(e.substitute(&BTreeMap::new()), e);
    }

    #[test]
    fn substitute_step_by_step_conjunction() {
        let a = || Expr::var("A");
        let fe = Expr::eq(Expr::modulo(a(), Expr::int(5)), Expr::int(0));
        let ff = Expr::eq(Expr::modulo(a(), Expr::int(10)), Expr::int(0));
        let mut m = BTreeMap::new();
        m.insert(VarRef::scalar("E"), fe.clone());
        m.insert(VarRef::scalar("F"), ff.clone());
        let g = Expr::and(Expr::var("E"), Expr::var("F")).substitute(&m);
        assert_eq!(g, Expr::and(fe, ff));
    }

    #[test]
    fn type_errors() {
        let lookup = |v: &VarRef| match v.name.as_str() {
            "A" => Some(Type::Int),
            "B" => Some(Type::Bool),
            _ => None,
        };
        assert_eq!(
            Expr::add(Expr::var("A"), Expr::real(1.0)).infer_type(&lookup),
            Ok(Type::Real)
        );
        assert!(Expr::add(Expr::var("A"), Expr::var("B"))
            .infer_type(&lookup)
            .is_err());
        assert!(Expr::ite(Expr::var("A"), Expr::int(1), Expr::int(2))
            .infer_type(&lookup)
            .is_err());
        assert!(Expr::ite(Expr::var("B"), Expr::int(1), Expr::bool(true))
            .infer_type(&lookup)
            .is_err());
        assert!(Expr::var("Z").infer_type(&lookup).is_err());
    }

    #[test]
    fn family_range_matching() {
        let r = IndexRange::new(2, 5);
        assert!(r.matches("S", &VarRef::indexed("S", 2)));
        assert!(!r.matches("S", &VarRef::indexed("S", 6)));
        assert!(!r.matches("S", &VarRef::scalar("S")));
        assert!(IndexRange::ALL.matches("S", &VarRef::scalar("S")));
        assert!(!IndexRange::ALL.matches("S", &VarRef::indexed("R", 1)));
    }
}
