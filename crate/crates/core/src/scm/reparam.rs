// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use super::{ExoDistribution, Scm};
use crate::expr::{Domain, Expr, VarRef};

/// Replaces every random draw `Bernoulli(e)` inside an equation by the
/// comparison `R < e` against a fresh exogenous `R ~ U(0, 1)`.
///
/// One noise variable is introduced per draw site and named after the
/// owning variable (`R_B`, then `R_B_2`, ...). Deterministic models come
/// back unchanged.
pub fn reparameterize(scm: &Scm) -> Scm {
    let mut out = scm.clone();
    let mut taken: BTreeSet<String> = scm
        .exogenous_vars()
        .iter()
        .chain(scm.endogenous_vars().iter())
        .map(VarRef::to_string)
        .collect();
    let mut fresh = vec![];
    for e in &mut out.endogenous {
        if !e.eq.is_stochastic() {
            continue;
        }
        let owner = e.var.to_string();
        let mut counter = 0;
        let mut next_name = || loop {
            counter += 1;
            let name = if counter == 1 {
                format!("R_{owner}")
            } else {
                format!("R_{owner}_{counter}")
            };
            if taken.insert(name.clone()) {
                return VarRef::scalar(name);
            }
        };
        e.eq = replace_draws(&e.eq, &mut |p| {
            let r = next_name();
            fresh.push(r.clone());
            Expr::lt(Expr::Ref(r), p)
        });
    }
    for r in fresh {
        out.add_exogenous(
            r,
            Domain::interval(0.0, 1.0),
            ExoDistribution::UniformReal { lo: 0.0, hi: 1.0 },
        );
    }
    out
}

fn replace_draws(e: &Expr, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
    match e {
        Expr::Bernoulli(p) => {
            let p = replace_draws(p, f);
            f(p)
        }
        _ => e.map_children(|c| replace_draws(c, f)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Value;

    fn m1() -> Scm {
        let mut m = Scm::new("m1");
        m.add_exogenous(
            VarRef::scalar("A"),
            Domain::interval(0.0, 1.0),
            ExoDistribution::PointMass(Value::Real(0.5)),
        );
        m.add_endogenous(
            VarRef::scalar("B"),
            Domain::Boolean,
            Expr::Bernoulli(Box::new(Expr::var("A"))),
        );
        m.add_endogenous(VarRef::scalar("C"), Domain::Boolean, Expr::var("B"));
        m
    }

    #[test]
    fn draw_becomes_a_comparison_against_fresh_noise() {
        let m2 = reparameterize(&m1());
        assert!(!m2.is_stochastic());
        let r = VarRef::scalar("R_B");
        assert!(m2.is_exogenous(&r));
        assert_eq!(
            m2.endogenous(&VarRef::scalar("B")).unwrap().eq,
            Expr::lt(Expr::Ref(r), Expr::var("A"))
        );
        assert_eq!(reparameterize(&m2), m2);
    }
}
