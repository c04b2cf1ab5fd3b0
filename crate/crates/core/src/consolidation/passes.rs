// SPDX-License-Identifier: Apache-2.0

//! Expression rewrites applied to consolidated mechanisms.
//!
//! Every local rewrite leaves the node count unchanged or smaller. A rewrite
//! may drop a subexpression whose evaluation would fail; equivalence is
//! only demanded where the original evaluates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::image::{image_of, Context, Image, MAX_FINITE_IMAGE};
use crate::expr::{apply_binary, eval_expr, BinaryOp, Expr, UnaryOp, Value, VarRef};
use crate::scm::for_each_assignment;
use crate::scm::{InterventionSet, InterventionSpace, InversePair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassKind {
    ConstantFold,
    Simplify,
    HoistInterventions,
    PruneBranches,
    CancelInverses,
    DeadCode,
}

impl PassKind {
    pub const ALL: [PassKind; 6] = [
        PassKind::ConstantFold,
        PassKind::Simplify,
        PassKind::HoistInterventions,
        PassKind::PruneBranches,
        PassKind::CancelInverses,
        PassKind::DeadCode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PassKind::ConstantFold => "constant_fold",
            PassKind::Simplify => "simplify",
            PassKind::HoistInterventions => "hoist_interventions",
            PassKind::PruneBranches => "prune_branches",
            PassKind::CancelInverses => "cancel_inverses",
            PassKind::DeadCode => "dead_code",
        }
    }

    pub fn from_name(s: &str) -> Option<PassKind> {
        PassKind::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// What the passes may assume about the mechanism's inputs.
#[derive(Clone, Debug)]
pub struct PassEnv<'a> {
    pub inputs: BTreeMap<VarRef, Image>,
    pub space: &'a InterventionSpace,
    pub inverse_pairs: &'a [InversePair],
}

pub fn apply_pass(kind: PassKind, e: &Expr, env: &PassEnv) -> Expr {
    match kind {
        PassKind::ConstantFold => fold(e),
        PassKind::Simplify => bottom_up(e, &simplify_node),
        PassKind::HoistInterventions => hoist(e, env.space),
        PassKind::PruneBranches => prune(e, &Context::new(env.inputs.clone(), env.space)),
        PassKind::CancelInverses => {
            let patterns = inverse_patterns(env.inverse_pairs);
            bottom_up(e, &|n| cancel(n, &patterns))
        }
        PassKind::DeadCode => bottom_up(e, &dead_code_node),
    }
}

/// Rewrites children first, then applies `rule` at the node until it no
/// longer fires.
fn bottom_up(e: &Expr, rule: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
    let mut cur = e.map_children(|c| bottom_up(c, rule));
    while let Some(next) = rule(&cur) {
        // a rule result may expose new redexes below it
        cur = next.map_children(|c| bottom_up(c, rule));
    }
    cur
}

fn fold(e: &Expr) -> Expr {
    let e = e.map_children(fold);
    if e.is_const() || matches!(e, Expr::Ref(_)) {
        return e;
    }
    if e.children().iter().all(|c| c.is_const())
        && !e.queries_interventions()
        && !e.is_stochastic()
        && e.free_refs().is_empty()
    {
        let env: BTreeMap<VarRef, Value> = BTreeMap::new();
        if let Ok(v) = eval_expr(&e, &env, &InterventionSet::new()) {
            return Expr::Const(v);
        }
    }
    e
}

fn const_binary(op: BinaryOp, a: &Value, b: &Value) -> Option<Expr> {
    apply_binary(op, a, b).ok().map(Expr::Const)
}

fn is_int(e: &Expr, k: i64) -> bool {
    matches!(e, Expr::Const(Value::Int(i)) if *i == k)
}

fn simplify_node(e: &Expr) -> Option<Expr> {
    use BinaryOp::*;
    match e {
        Expr::Unary(UnaryOp::Not, a) => match a.as_ref() {
            Expr::Const(Value::Bool(b)) => Some(Expr::bool(!b)),
            Expr::If(c, t, f) => match (t.as_ref(), f.as_ref()) {
                (Expr::Const(Value::Bool(x)), Expr::Const(Value::Bool(y))) => {
                    Some(Expr::ite((**c).clone(), Expr::bool(!x), Expr::bool(!y)))
                }
                _ => None,
            },
            _ => None,
        },
        Expr::Binary(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                And => {
                    match (a, b) {
                        (Expr::Const(Value::Bool(true)), x)
                        | (x, Expr::Const(Value::Bool(true))) => Some(x.clone()),
                        (Expr::Const(Value::Bool(false)), _)
                        | (_, Expr::Const(Value::Bool(false))) => Some(Expr::bool(false)),
                        _ if a == b => Some(a.clone()),
                        _ if is_negation(a, b) => Some(Expr::bool(false)),
                        _ => push_into_if(*op, a, b),
                    }
                }
                Or => {
                    match (a, b) {
                        (Expr::Const(Value::Bool(false)), x)
                        | (x, Expr::Const(Value::Bool(false))) => Some(x.clone()),
                        (Expr::Const(Value::Bool(true)), _)
                        | (_, Expr::Const(Value::Bool(true))) => Some(Expr::bool(true)),
                        _ if a == b => Some(a.clone()),
                        _ if is_negation(a, b) => Some(Expr::bool(true)),
                        _ => push_into_if(*op, a, b),
                    }
                }
                Eq | Le if a == b && !a.is_stochastic() => Some(Expr::bool(true)),
                Lt if a == b && !a.is_stochastic() => Some(Expr::bool(false)),
                Min | Max if a == b && !a.is_stochastic() => Some(a.clone()),
                Add if is_int(b, 0) => Some(a.clone()),
                Add if is_int(a, 0) => Some(b.clone()),
                Sub if is_int(b, 0) => Some(a.clone()),
                Mul if is_int(b, 1) => Some(a.clone()),
                Mul if is_int(a, 1) => Some(b.clone()),
                Div | Pow if is_int(b, 1) => Some(a.clone()),
                _ => push_into_if(*op, a, b),
            }
        }
        Expr::If(c, t, f) => {
            let (c, t, f) = (c.as_ref(), t.as_ref(), f.as_ref());
            match (c, t, f) {
                (Expr::Const(Value::Bool(true)), t, _) => Some(t.clone()),
                (Expr::Const(Value::Bool(false)), _, f) => Some(f.clone()),
                _ if t == f => Some(t.clone()),
                (c, Expr::Const(Value::Bool(true)), Expr::Const(Value::Bool(false))) => {
                    Some(c.clone())
                }
                (c, Expr::Const(Value::Bool(false)), Expr::Const(Value::Bool(true))) => {
                    Some(Expr::not(c.clone()))
                }
                (Expr::Unary(UnaryOp::Not, inner), t, f) => {
                    Some(Expr::ite((**inner).clone(), f.clone(), t.clone()))
                }
                (c, Expr::Const(Value::Bool(true)), f) => Some(Expr::or(c.clone(), f.clone())),
                (c, t, Expr::Const(Value::Bool(false))) => Some(Expr::and(c.clone(), t.clone())),
                _ => None,
            }
        }
        Expr::Case(arms, d) => simplify_case(arms, d),
        _ => None,
    }
}

fn is_negation(a: &Expr, b: &Expr) -> bool {
    matches!(a, Expr::Unary(UnaryOp::Not, x) if x.as_ref() == b)
        || matches!(b, Expr::Unary(UnaryOp::Not, x) if x.as_ref() == a)
}

/// `op(if c then k1 else k2, k3)` becomes `if c then op(k1,k3) else op(k2,k3)`.
fn push_into_if(op: BinaryOp, a: &Expr, b: &Expr) -> Option<Expr> {
    if let (Expr::If(c, t, f), Expr::Const(k)) = (a, b) {
        if let (Expr::Const(x), Expr::Const(y)) = (t.as_ref(), f.as_ref()) {
            return Some(Expr::ite(
                (**c).clone(),
                const_binary(op, x, k)?,
                const_binary(op, y, k)?,
            ));
        }
    }
    if let (Expr::Const(k), Expr::If(c, t, f)) = (a, b) {
        if let (Expr::Const(x), Expr::Const(y)) = (t.as_ref(), f.as_ref()) {
            return Some(Expr::ite(
                (**c).clone(),
                const_binary(op, k, x)?,
                const_binary(op, k, y)?,
            ));
        }
    }
    None
}

fn simplify_case(arms: &[(Expr, Expr)], d: &Expr) -> Option<Expr> {
    let mut out: Vec<(Expr, Expr)> = vec![];
    let mut default = d.clone();
    let mut changed = false;
    for (g, v) in arms {
        match g {
            Expr::Const(Value::Bool(false)) => changed = true,
            Expr::Const(Value::Bool(true)) => {
                default = v.clone();
                changed = true;
                break;
            }
            _ => out.push((g.clone(), v.clone())),
        }
    }
    while out.last().is_some_and(|(_, v)| *v == default) {
        out.pop();
        changed = true;
    }
    match out.len() {
        0 => Some(default),
        1 => {
            let (g, v) = out.pop().unwrap();
            Some(Expr::ite(g, v, default))
        }
        _ if changed => Some(Expr::case(out, default)),
        _ => None,
    }
}

fn dead_code_node(e: &Expr) -> Option<Expr> {
    match e {
        Expr::If(c, t, f) => {
            if let Expr::If(c2, a, _) = t.as_ref() {
                if c2 == c {
                    return Some(Expr::ite((**c).clone(), (**a).clone(), (**f).clone()));
                }
            }
            if let Expr::If(c2, _, b) = f.as_ref() {
                if c2 == c {
                    return Some(Expr::ite((**c).clone(), (**t).clone(), (**b).clone()));
                }
            }
            None
        }
        Expr::Case(arms, d) => {
            let mut seen = BTreeSet::new();
            let mut kept = vec![];
            for (g, v) in arms {
                // a repeated guard can never fire
                if seen.insert(format!("{g}")) {
                    kept.push((g.clone(), v.clone()));
                }
            }
            (kept.len() < arms.len()).then(|| Expr::case(kept, (**d).clone()))
        }
        _ => None,
    }
}

fn hoist(e: &Expr, space: &InterventionSpace) -> Expr {
    match e {
        Expr::If(c, t, f) => {
            if let Expr::IsIntervened(v) = c.as_ref() {
                if let Expr::InterventionValue(w, _) = t.as_ref() {
                    if w == v {
                        return hoist(&Expr::intervention_value(v.clone(), (**f).clone()), space);
                    }
                }
                if !space.is_intervenable(v) {
                    return hoist(f, space);
                }
                let t = assume_intervened(t, v, space);
                let f = assume_free(f, v);
                return Expr::ite((**c).clone(), hoist(&t, space), hoist(&f, space));
            }
            e.map_children(|x| hoist(x, space))
        }
        Expr::InterventionValue(v, fb) => {
            if !space.is_intervenable(v) {
                return hoist(fb, space);
            }
            Expr::intervention_value(v.clone(), hoist(&assume_free(fb, v), space))
        }
        Expr::IsIntervened(v) if !space.is_intervenable(v) => Expr::bool(false),
        _ => e.map_children(|x| hoist(x, space)),
    }
}

/// `e` specialized to the knowledge that `v` is not intervened on.
fn assume_free(e: &Expr, v: &VarRef) -> Expr {
    match e {
        Expr::IsIntervened(w) if w == v => Expr::bool(false),
        Expr::InterventionValue(w, fb) if w == v => assume_free(fb, v),
        _ => e.map_children(|c| assume_free(c, v)),
    }
}

/// `e` specialized to the knowledge that `v` is intervened on.
fn assume_intervened(e: &Expr, v: &VarRef, space: &InterventionSpace) -> Expr {
    match e {
        Expr::IsIntervened(w) if w == v => Expr::bool(true),
        Expr::InterventionValue(w, fb) if w == v => {
            // the fallback is never consulted
            match space.atom_values(v).into_iter().next() {
                Some(x) if fb.node_count() > 1 => {
                    Expr::intervention_value(v.clone(), Expr::Const(x))
                }
                _ => e.clone(),
            }
        }
        _ => e.map_children(|c| assume_intervened(c, v, space)),
    }
}

fn prune(e: &Expr, ctx: &Context) -> Expr {
    if !e.is_const() && !e.is_stochastic() {
        if let Some(v) = image_of(e, ctx).singleton() {
            return Expr::Const(v.clone());
        }
    }
    if let Some(split) = split_on_interventions(e, ctx) {
        return split;
    }
    match e {
        Expr::If(c, t, f) => {
            let c = prune(c, ctx);
            match image_of(&c, ctx).as_bool() {
                Some(true) => prune(t, ctx),
                Some(false) => prune(f, ctx),
                None => Expr::ite(
                    c.clone(),
                    prune(t, &ctx.assume(&c, true)),
                    prune(f, &ctx.assume(&c, false)),
                ),
            }
        }
        Expr::Case(arms, d) => {
            let mut cur = ctx.clone();
            let mut out = vec![];
            for (g, v) in arms {
                let g = prune(g, &cur);
                match image_of(&g, &cur).as_bool() {
                    Some(false) => {}
                    Some(true) => {
                        let v = prune(v, &cur);
                        return if out.is_empty() {
                            v
                        } else {
                            Expr::case(out, v)
                        };
                    }
                    None => {
                        out.push((g.clone(), prune(v, &cur.assume(&g, true))));
                        cur = cur.assume(&g, false);
                    }
                }
            }
            let d = prune(d, &cur);
            if out.is_empty() {
                d
            } else {
                Expr::case(out, d)
            }
        }
        Expr::Binary(op @ (BinaryOp::And | BinaryOp::Or), a, b) => {
            let a = prune(a, ctx);
            let b = prune(b, &ctx.assume(&a, *op == BinaryOp::And));
            truth_table(*op, &a, &b, ctx).unwrap_or_else(|| Expr::binary(*op, a, b))
        }
        Expr::InterventionValue(v, fb) => match ctx.is_intervened(v) {
            Some(false) => prune(fb, ctx),
            Some(true) => e.clone(),
            None => Expr::intervention_value(v.clone(), prune(fb, &ctx.with_free(v))),
        },
        _ => e.map_children(|c| prune(c, ctx)),
    }
}

const MAX_SPLIT_VARS: usize = 4;

/// Collects the variables whose intervention status `e` reads. `None` if it
/// reads a family quantifier.
fn queried_vars(e: &Expr, out: &mut BTreeSet<VarRef>) -> Option<()> {
    match e {
        Expr::IsIntervened(v) | Expr::InterventionValue(v, _) => {
            out.insert(v.clone());
        }
        Expr::ExistsIntervention { .. }
        | Expr::ForAllIntervention { .. }
        | Expr::MaxIntervenedIndex { .. } => return None,
        _ => {}
    }
    for c in e.children() {
        queried_vars(c, out)?;
    }
    Some(())
}

/// Replaces an input-free mechanism by a decision tree over the status of
/// the few interventions it reads, when every such variable has a single
/// admissible value.
fn split_on_interventions(e: &Expr, ctx: &Context) -> Option<Expr> {
    if e.is_const() || e.is_stochastic() || !e.free_refs().is_empty() {
        return None;
    }
    let mut vars = BTreeSet::new();
    queried_vars(e, &mut vars)?;
    if vars.is_empty() || vars.len() > MAX_SPLIT_VARS {
        return None;
    }
    let mut atoms = vec![];
    let mut fixed = InterventionSet::new();
    for v in vars {
        let vals = ctx.space.atom_values(&v);
        if vals.len() != 1 {
            return None;
        }
        let val = vals.into_iter().next()?;
        match ctx.is_intervened(&v) {
            Some(true) => {
                fixed.insert(v, val);
            }
            Some(false) => {}
            None => atoms.push((v, val)),
        }
    }
    let out = decide(e, &atoms, fixed)?;
    (out.node_count() < e.node_count()).then_some(out)
}

fn decide(e: &Expr, atoms: &[(VarRef, Value)], i: InterventionSet) -> Option<Expr> {
    let Some(((v, val), rest)) = atoms.split_first() else {
        let empty: BTreeMap<VarRef, Value> = BTreeMap::new();
        return eval_expr(e, &empty, &i).ok().map(Expr::Const);
    };
    let free = decide(e, rest, i.clone())?;
    let mut on = i;
    on.insert(v.clone(), val.clone());
    let set = decide(e, rest, on)?;
    Some(if set == free {
        free
    } else {
        Expr::ite(Expr::IsIntervened(v.clone()), set, free)
    })
}

/// Drops one side of a conjunction or disjunction when enumeration over the
/// finite inputs shows that one operand implies the other.
fn truth_table(op: BinaryOp, a: &Expr, b: &Expr, ctx: &Context) -> Option<Expr> {
    for x in [a, b] {
        if x.queries_interventions() || x.is_stochastic() {
            return None;
        }
    }
    let refs: BTreeSet<VarRef> = a.free_refs().union(&b.free_refs()).cloned().collect();
    let mut spaces = vec![];
    let mut total = 1usize;
    for r in refs {
        let Image::Finite(vals) = ctx.var(&r) else {
            return None;
        };
        total = total.saturating_mul(vals.len());
        spaces.push((r, vals.into_iter().collect::<Vec<_>>()));
    }
    if total > MAX_FINITE_IMAGE || total == 0 {
        return None;
    }
    let none = InterventionSet::new();
    let (mut a_to_b, mut b_to_a, mut ok) = (true, true, true);
    for_each_assignment(&spaces, &mut |env| {
        let (Ok(Value::Bool(x)), Ok(Value::Bool(y))) =
            (eval_expr(a, env, &none), eval_expr(b, env, &none))
        else {
            ok = false;
            return false;
        };
        a_to_b &= !x || y;
        b_to_a &= !y || x;
        true
    });
    if !ok {
        return None;
    }
    match op {
        BinaryOp::And if a_to_b => Some(a.clone()),
        BinaryOp::And if b_to_a => Some(b.clone()),
        BinaryOp::Or if a_to_b => Some(b.clone()),
        BinaryOp::Or if b_to_a => Some(a.clone()),
        _ => None,
    }
}

/// Patterns `inverse(forward(_))` that reduce to the hole.
fn inverse_patterns(pairs: &[InversePair]) -> Vec<Expr> {
    let hole = Expr::Ref(InversePair::hole());
    let mut out = vec![
        Expr::not(Expr::not(hole.clone())),
        Expr::neg(Expr::neg(hole.clone())),
    ];
    for p in pairs {
        let b: BTreeMap<VarRef, Expr> = [(InversePair::hole(), p.forward.clone())]
            .into_iter()
            .collect();
        out.push(p.inverse.substitute(&b));
    }
    out
}

fn cancel(e: &Expr, patterns: &[Expr]) -> Option<Expr> {
    patterns.iter().find_map(|p| {
        let mut bound = None;
        match_pattern(p, e, &mut bound).then_some(bound).flatten()
    })
}

fn match_pattern(p: &Expr, e: &Expr, bound: &mut Option<Expr>) -> bool {
    if let Expr::Ref(v) = p {
        if *v == InversePair::hole() {
            return match bound {
                Some(b) => b == e,
                None => {
                    *bound = Some(e.clone());
                    true
                }
            };
        }
    }
    let shallow = |x: &Expr| x.map_children(|_| Expr::bool(false));
    let (pc, ec) = (p.children(), e.children());
    pc.len() == ec.len()
        && shallow(p) == shallow(e)
        && pc.iter().zip(ec).all(|(a, b)| match_pattern(a, b, bound))
}
