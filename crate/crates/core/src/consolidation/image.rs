// SPDX-License-Identifier: Apache-2.0

//! Over-approximating value sets for expressions.
//!
//! An image is a finite value set, a numeric interval or "anything". The
//! analysis is sound for error-free evaluations: whenever an expression
//! evaluates without error, its value lies in the computed image. Any
//! abstract step that could hide a runtime error returns `Top`.

use std::collections::{BTreeMap, BTreeSet};

use crate::expr::{BinaryOp, Domain, Expr, IndexRange, UnaryOp, Value, VarRef};
use crate::scm::{ExoDistribution, InterventionSet, InterventionSpace};

use crate::expr::eval_expr;

/// Largest finite image kept as an explicit set.
pub const MAX_FINITE_IMAGE: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum Image {
    Finite(BTreeSet<Value>),
    /// Closed numeric interval; `integral` when every member is an int.
    Interval {
        lo: f64,
        hi: f64,
        integral: bool,
    },
    Top,
}

impl Image {
    pub fn single(v: Value) -> Image {
        Image::Finite([v].into_iter().collect())
    }

    pub fn bools() -> Image {
        Image::Finite(
            [Value::Bool(false), Value::Bool(true)]
                .into_iter()
                .collect(),
        )
    }

    pub fn of_domain(d: &Domain) -> Image {
        match d {
            Domain::Real { bounds: None } => Image::Top,
            Domain::Real {
                bounds: Some((lo, hi)),
            } => Image::interval(*lo, *hi, false),
            Domain::FiniteInt { lo, hi } => Image::interval(*lo as f64, *hi as f64, true),
            d => Image::Finite(d.values().unwrap_or_default().into_iter().collect()),
        }
    }

    pub fn of_distribution(dist: &ExoDistribution, domain: &Domain) -> Image {
        match dist.support() {
            Some(vs) => Image::Finite(vs.into_iter().filter_map(|v| domain.coerce(v)).collect()),
            None => match dist {
                ExoDistribution::UniformReal { lo, hi } => Image::interval(*lo, *hi, false),
                _ => Image::of_domain(domain),
            },
        }
    }

    /// Interval, materialized as a finite set when it is a small integer
    /// range or a single point.
    pub fn interval(lo: f64, hi: f64, integral: bool) -> Image {
        if !(lo <= hi) {
            return Image::Top;
        }
        if lo == hi && lo.is_finite() {
            return Image::single(if integral {
                Value::Int(lo as i64)
            } else {
                Value::Real(lo)
            });
        }
        if integral && lo.is_finite() && hi.is_finite() && hi - lo < MAX_FINITE_IMAGE as f64 {
            return Image::Finite((lo as i64..=hi as i64).map(Value::Int).collect());
        }
        Image::Interval { lo, hi, integral }
    }

    pub fn singleton(&self) -> Option<&Value> {
        match self {
            Image::Finite(s) if s.len() == 1 => s.iter().next(),
            _ => None,
        }
    }

    pub fn finite(&self) -> Option<&BTreeSet<Value>> {
        match self {
            Image::Finite(s) => Some(s),
            _ => None,
        }
    }

    pub fn size(&self) -> Option<usize> {
        self.finite().map(BTreeSet::len)
    }

    pub fn as_bool(&self) -> Option<bool> {
        self.singleton().and_then(Value::as_bool)
    }

    /// Numeric hull, if every member is numeric.
    pub fn hull(&self) -> Option<(f64, f64, bool)> {
        match self {
            Image::Interval { lo, hi, integral } => Some((*lo, *hi, *integral)),
            Image::Finite(s) if !s.is_empty() => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut integral = true;
                for v in s {
                    let x = v.as_f64()?;
                    integral &= matches!(v, Value::Int(_));
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                Some((lo, hi, integral))
            }
            _ => None,
        }
    }

    pub fn union(&self, other: &Image) -> Image {
        match (self, other) {
            (Image::Finite(a), Image::Finite(b)) => {
                let s: BTreeSet<Value> = a.union(b).cloned().collect();
                if s.len() <= MAX_FINITE_IMAGE {
                    return Image::Finite(s);
                }
                match Image::Finite(s).hull() {
                    Some((lo, hi, i)) => Image::Interval {
                        lo,
                        hi,
                        integral: i,
                    },
                    None => Image::Top,
                }
            }
            (Image::Top, _) | (_, Image::Top) => Image::Top,
            _ => match (self.hull(), other.hull()) {
                (Some((a, b, i)), Some((c, d, j))) => Image::Interval {
                    lo: a.min(c),
                    hi: b.max(d),
                    integral: i && j,
                },
                _ => Image::Top,
            },
        }
    }

    fn map_values(&self, f: impl Fn(&Value) -> Option<Value>) -> Image {
        match self {
            Image::Finite(s) => s
                .iter()
                .map(&f)
                .collect::<Option<BTreeSet<_>>>()
                .map_or(Image::Top, Image::Finite),
            _ => Image::Top,
        }
    }
}

/// What the analysis knows at a program point.
#[derive(Clone, Debug)]
pub struct Context<'a> {
    pub vars: BTreeMap<VarRef, Image>,
    pub space: &'a InterventionSpace,
    pub intervened: BTreeSet<VarRef>,
    pub free: BTreeSet<VarRef>,
}

impl<'a> Context<'a> {
    pub fn new(vars: BTreeMap<VarRef, Image>, space: &'a InterventionSpace) -> Self {
        Context {
            vars,
            space,
            intervened: BTreeSet::new(),
            free: BTreeSet::new(),
        }
    }

    pub fn var(&self, v: &VarRef) -> Image {
        self.vars.get(v).cloned().unwrap_or(Image::Top)
    }

    /// Definite knowledge about `do(v) in I`, if any.
    pub fn is_intervened(&self, v: &VarRef) -> Option<bool> {
        if self.intervened.contains(v) {
            Some(true)
        } else if self.free.contains(v) || !self.space.is_intervenable(v) {
            Some(false)
        } else {
            None
        }
    }

    pub fn with_free(&self, v: &VarRef) -> Context<'a> {
        let mut c = self.clone();
        c.free.insert(v.clone());
        c
    }

    /// Context refined by the knowledge that `guard` evaluated to `truth`.
    pub fn assume(&self, guard: &Expr, truth: bool) -> Context<'a> {
        let mut c = self.clone();
        c.refine(guard, truth);
        c
    }

    fn refine(&mut self, guard: &Expr, truth: bool) {
        match guard {
            Expr::Unary(UnaryOp::Not, g) => return self.refine(g, !truth),
            Expr::Binary(BinaryOp::And, a, b) if truth => {
                self.refine(a, true);
                self.refine(b, true);
                return;
            }
            Expr::Binary(BinaryOp::Or, a, b) if !truth => {
                self.refine(a, false);
                self.refine(b, false);
                return;
            }
            Expr::IsIntervened(v) => {
                if truth {
                    self.intervened.insert(v.clone());
                } else {
                    self.free.insert(v.clone());
                }
                return;
            }
            _ => {}
        }
        if guard.queries_interventions() || guard.is_stochastic() {
            return;
        }
        let refs = guard.free_refs();
        if refs.len() != 1 {
            return;
        }
        let v = refs.into_iter().next().unwrap();
        match self.var(&v) {
            Image::Finite(vals) => {
                let none = InterventionSet::new();
                let mut kept = BTreeSet::new();
                for x in vals {
                    let env: BTreeMap<VarRef, Value> =
                        [(v.clone(), x.clone())].into_iter().collect();
                    match eval_expr(guard, &env, &none) {
                        Ok(Value::Bool(b)) if b != truth => {}
                        _ => {
                            kept.insert(x);
                        }
                    }
                }
                self.vars.insert(v, Image::Finite(kept));
            }
            Image::Interval { lo, hi, integral } => {
                if let Some((nlo, nhi)) = refine_interval(guard, &v, truth, lo, hi, integral) {
                    self.vars.insert(v, Image::interval(nlo, nhi, integral));
                }
            }
            Image::Top => {}
        }
    }
}

/// Bounds implied by `v <op> c` or `c <op> v` holding with `truth`.
fn refine_interval(
    guard: &Expr,
    v: &VarRef,
    truth: bool,
    lo: f64,
    hi: f64,
    integral: bool,
) -> Option<(f64, f64)> {
    let Expr::Binary(op, a, b) = guard else {
        return None;
    };
    let (var_left, c) = match (a.as_ref(), b.as_ref()) {
        (Expr::Ref(x), Expr::Const(c)) if x == v => (true, c.as_f64()?),
        (Expr::Const(c), Expr::Ref(x)) if x == v => (false, c.as_f64()?),
        _ => return None,
    };
    // normalize to a constraint on v
    let step = if integral { 1.0 } else { 0.0 };
    let (mut nlo, mut nhi) = (lo, hi);
    match (op, var_left, truth) {
        // v < c
        (BinaryOp::Lt, true, true) | (BinaryOp::Le, false, false) => {
            if integral {
                nhi = nhi.min((c - step).ceil().min(c - step));
            } else {
                nhi = nhi.min(c);
            }
        }
        // v <= c
        (BinaryOp::Le, true, true) | (BinaryOp::Lt, false, false) => nhi = nhi.min(c),
        // v >= c
        (BinaryOp::Lt, true, false) | (BinaryOp::Le, false, true) => nlo = nlo.max(c),
        // v > c
        (BinaryOp::Le, true, false) | (BinaryOp::Lt, false, true) => {
            nlo = nlo.max(if integral { c + step } else { c })
        }
        (BinaryOp::Eq, _, true) => {
            nlo = nlo.max(c);
            nhi = nhi.min(c);
        }
        _ => return None,
    }
    Some((nlo, nhi))
}

/// Image of `e` in context `ctx`.
pub fn image_of(e: &Expr, ctx: &Context) -> Image {
    match e {
        Expr::Const(v) => Image::single(v.clone()),
        Expr::Ref(v) => ctx.var(v),
        Expr::Unary(op, a) => {
            let ia = image_of(a, ctx);
            match (op, &ia) {
                (UnaryOp::Not, _) => ia.map_values(|v| v.as_bool().map(|b| Value::Bool(!b))),
                (UnaryOp::Neg, Image::Interval { lo, hi, integral }) => {
                    Image::interval(-hi, -lo, *integral)
                }
                (UnaryOp::Neg, _) => ia.map_values(|v| match v {
                    Value::Int(i) => i.checked_neg().map(Value::Int),
                    Value::Real(r) => Some(Value::Real(-r)),
                    _ => None,
                }),
            }
        }
        Expr::Binary(BinaryOp::And, a, b) => {
            let ia = image_of(a, ctx);
            if ia.as_bool() == Some(false) {
                return Image::single(Value::Bool(false));
            }
            let ib = image_of(b, &ctx.assume(a, true));
            logical(BinaryOp::And, &ia, &ib)
        }
        Expr::Binary(BinaryOp::Or, a, b) => {
            let ia = image_of(a, ctx);
            if ia.as_bool() == Some(true) {
                return Image::single(Value::Bool(true));
            }
            let ib = image_of(b, &ctx.assume(a, false));
            logical(BinaryOp::Or, &ia, &ib)
        }
        Expr::Binary(op, a, b) => binary(*op, &image_of(a, ctx), &image_of(b, ctx)),
        Expr::If(c, t, f) => {
            let ic = image_of(c, ctx);
            match ic.as_bool() {
                Some(true) => image_of(t, ctx),
                Some(false) => image_of(f, ctx),
                None if is_bool_image(&ic) => {
                    image_of(t, &ctx.assume(c, true)).union(&image_of(f, &ctx.assume(c, false)))
                }
                None => Image::Top,
            }
        }
        Expr::Case(arms, d) => {
            let mut out: Option<Image> = None;
            let mut cur = ctx.clone();
            let add = |out: &mut Option<Image>, im: Image| {
                *out = Some(match out.take() {
                    None => im,
                    Some(o) => o.union(&im),
                });
            };
            for (g, v) in arms {
                let ig = image_of(g, &cur);
                match ig.as_bool() {
                    Some(false) => continue,
                    Some(true) => {
                        add(&mut out, image_of(v, &cur));
                        return out.unwrap();
                    }
                    None if is_bool_image(&ig) => {
                        add(&mut out, image_of(v, &cur.assume(g, true)));
                        cur = cur.assume(g, false);
                    }
                    None => return Image::Top,
                }
            }
            add(&mut out, image_of(d, &cur));
            out.unwrap()
        }
        Expr::IsIntervened(v) => match ctx.is_intervened(v) {
            Some(b) => Image::single(Value::Bool(b)),
            None => Image::bools(),
        },
        Expr::InterventionValue(v, fb) => {
            let atoms = || Image::Finite(ctx.space.atom_values(v));
            match ctx.is_intervened(v) {
                Some(true) => atoms(),
                Some(false) => image_of(fb, ctx),
                None => atoms().union(&image_of(fb, &ctx.with_free(v))),
            }
        }
        Expr::ExistsIntervention {
            family,
            range,
            value,
        } => {
            if family_members(ctx, family, range, value).is_empty() {
                Image::single(Value::Bool(false))
            } else {
                Image::bools()
            }
        }
        Expr::ForAllIntervention {
            family,
            range,
            value,
        } => {
            let (Some(lo), Some(hi)) = (range.lo, range.hi) else {
                return Image::Top;
            };
            let members = family_members(ctx, family, range, value);
            let all_possible =
                (lo..=hi).all(|i| members.contains(&VarRef::indexed(family.clone(), i)));
            if all_possible {
                Image::bools()
            } else {
                Image::single(Value::Bool(false))
            }
        }
        Expr::MaxIntervenedIndex { .. } => Image::Top,
        Expr::Bernoulli(_) => Image::bools(),
    }
}

fn is_bool_image(im: &Image) -> bool {
    im.finite()
        .is_some_and(|s| s.iter().all(|v| matches!(v, Value::Bool(_))))
}

/// Family members that some allowed set can intervene on (with `value`).
fn family_members(
    ctx: &Context,
    family: &str,
    range: &IndexRange,
    value: &Option<Value>,
) -> BTreeSet<VarRef> {
    ctx.space
        .intervenable_vars()
        .into_iter()
        .filter(|v| range.matches(family, v))
        .filter(|v| !ctx.free.contains(v))
        .filter(|v| {
            value
                .as_ref()
                .is_none_or(|want| ctx.space.atom_values(v).contains(want))
        })
        .collect()
}

fn logical(op: BinaryOp, a: &Image, b: &Image) -> Image {
    let (Some(sa), Some(sb)) = (a.finite(), b.finite()) else {
        return Image::Top;
    };
    let mut out = BTreeSet::new();
    for x in sa {
        for y in sb {
            match (x.as_bool(), y.as_bool()) {
                (Some(p), Some(q)) => {
                    out.insert(Value::Bool(if op == BinaryOp::And {
                        p && q
                    } else {
                        p || q
                    }));
                }
                _ => return Image::Top,
            }
        }
    }
    Image::Finite(out)
}

fn binary(op: BinaryOp, a: &Image, b: &Image) -> Image {
    if let (Image::Finite(sa), Image::Finite(sb)) = (a, b) {
        if sa.len().saturating_mul(sb.len()) <= MAX_FINITE_IMAGE {
            let mut out = BTreeSet::new();
            for x in sa {
                for y in sb {
                    match crate::expr::apply_binary(op, x, y) {
                        Ok(v) => {
                            out.insert(v);
                        }
                        Err(_) => return Image::Top,
                    }
                }
            }
            return Image::Finite(out);
        }
    }
    let (Some((alo, ahi, ai)), Some((blo, bhi, bi))) = (a.hull(), b.hull()) else {
        if op == BinaryOp::Eq {
            return eq_by_disjointness(a, b);
        }
        return Image::Top;
    };
    let integral = ai && bi;
    let fits = |lo: f64, hi: f64| !integral || (lo >= i64::MIN as f64 && hi <= i64::MAX as f64);
    match op {
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Min | BinaryOp::Max => {
            let (lo, hi) = match op {
                BinaryOp::Add => (alo + blo, ahi + bhi),
                BinaryOp::Sub => (alo - bhi, ahi - blo),
                BinaryOp::Mul => {
                    let c = [alo * blo, alo * bhi, ahi * blo, ahi * bhi];
                    if c.iter().any(|x| x.is_nan()) {
                        return Image::Top;
                    }
                    (
                        c.iter().cloned().fold(f64::INFINITY, f64::min),
                        c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    )
                }
                BinaryOp::Min => (alo.min(blo), ahi.min(bhi)),
                _ => (alo.max(blo), ahi.max(bhi)),
            };
            if lo.is_nan() || hi.is_nan() || !fits(lo, hi) {
                return Image::Top;
            }
            Image::interval(lo, hi, integral)
        }
        BinaryOp::Div if !integral && (blo > 0.0 || bhi < 0.0) => {
            let c = [alo / blo, alo / bhi, ahi / blo, ahi / bhi];
            Image::interval(
                c.iter().cloned().fold(f64::INFINITY, f64::min),
                c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                false,
            )
        }
        BinaryOp::Mod if blo == bhi && blo > 0.0 => {
            if integral {
                Image::interval(0.0, blo - 1.0, true)
            } else {
                Image::interval(0.0, blo, false)
            }
        }
        BinaryOp::Pow if !integral && alo >= 0.0 && blo == bhi && blo > 0.0 => {
            // x^c is increasing on x >= 0 for c > 0
            Image::interval(alo.powf(blo), ahi.powf(blo), false)
        }
        BinaryOp::Lt => decide(ahi < blo, alo >= bhi),
        BinaryOp::Le => decide(ahi <= blo, alo > bhi),
        BinaryOp::Eq => {
            if ahi < blo || bhi < alo {
                Image::single(Value::Bool(false))
            } else {
                Image::bools()
            }
        }
        _ => Image::Top,
    }
}

fn eq_by_disjointness(a: &Image, b: &Image) -> Image {
    match (a.finite(), b.finite()) {
        (Some(x), Some(y))
            if x.is_disjoint(y) && x.iter().chain(y.iter()).all(|v| !v.ty().is_numeric()) =>
        {
            Image::single(Value::Bool(false))
        }
        _ => Image::bools(),
    }
}

fn decide(always: bool, never: bool) -> Image {
    if always {
        Image::single(Value::Bool(true))
    } else if never {
        Image::single(Value::Bool(false))
    } else {
        Image::bools()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_with<'a>(space: &'a InterventionSpace, v: &str, im: Image) -> Context<'a> {
        Context::new([(VarRef::scalar(v), im)].into_iter().collect(), space)
    }

    #[test]
    fn chain_image_is_bounded_by_the_inner_function() {
        let space = InterventionSpace::default();
        let ctx = ctx_with(
            &space,
            "A",
            Image::of_domain(&Domain::FiniteInt { lo: 0, hi: 20 }),
        );
        let fb = Expr::ite(
            Expr::le(Expr::var("A"), Expr::int(5)),
            Expr::int(0),
            Expr::int(1),
        );
        assert_eq!(image_of(&fb, &ctx).size(), Some(2));
        let guard = Expr::and(
            Expr::le(Expr::int(0), fb.clone()),
            Expr::le(fb.clone(), Expr::int(10)),
        );
        assert_eq!(image_of(&guard, &ctx).as_bool(), Some(true));
    }

    #[test]
    fn intervals_decide_comparisons() {
        let space = InterventionSpace::default();
        let ctx = ctx_with(&space, "d", Image::of_domain(&Domain::interval(0.0, 1.5)));
        let cost = Expr::add(Expr::real(1.0), Expr::mul(Expr::real(0.5), Expr::var("d")));
        assert_eq!(
            image_of(&Expr::lt(cost.clone(), Expr::int(9)), &ctx).as_bool(),
            Some(true)
        );
        assert_eq!(
            image_of(&Expr::lt(cost, Expr::int(1)), &ctx).as_bool(),
            Some(false)
        );
    }

    #[test]
    fn guard_refinement_filters_finite_images() {
        let space = InterventionSpace::default();
        let ctx = ctx_with(
            &space,
            "A",
            Image::of_domain(&Domain::FiniteInt { lo: 0, hi: 20 }),
        );
        let g = Expr::le(Expr::var("A"), Expr::int(5));
        let t = ctx.assume(&g, false);
        assert_eq!(t.var(&VarRef::scalar("A")).size(), Some(15));
        let wide = ctx_with(
            &space,
            "x",
            Image::Interval {
                lo: 0.0,
                hi: 1e9,
                integral: true,
            },
        );
        let n = wide.assume(&Expr::lt(Expr::var("x"), Expr::int(10)), true);
        assert_eq!(n.var(&VarRef::scalar("x")).size(), Some(10));
    }

    #[test]
    fn errors_widen_to_top() {
        let space = InterventionSpace::default();
        let ctx = ctx_with(
            &space,
            "A",
            Image::Finite([Value::Int(0), Value::Int(1)].into_iter().collect()),
        );
        let e = Expr::div(Expr::int(1), Expr::var("A"));
        assert_eq!(image_of(&e, &ctx), Image::Top);
    }
}
