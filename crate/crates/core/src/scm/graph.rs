// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{InterventionSet, Scm, MAX_JOINT_ENUMERATION};
use crate::expr::{eval_expr, Value, VarRef};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("semantic graph needs {needed} assignments for {variable}, over the limit")]
    EnumerationTooLarge { variable: String, needed: String },
    #[error("unknown variable {0}")]
    UnknownVariable(VarRef),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphMode {
    /// Edge j -> i iff f_i mentions X_j.
    Syntactic,
    /// Edge j -> i iff changing X_j alone can change f_i.
    Semantic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Parents,
    Children,
    Ancestors,
    Descendants,
}

/// Causal graph over all model variables, exogenous first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Graph {
    pub vertices: Vec<VarRef>,
    pub edges: BTreeSet<(VarRef, VarRef)>,
    parents: BTreeMap<VarRef, BTreeSet<VarRef>>,
    children: BTreeMap<VarRef, BTreeSet<VarRef>>,
}

impl Graph {
    pub fn from_edges(vertices: Vec<VarRef>, edges: BTreeSet<(VarRef, VarRef)>) -> Self {
        let mut parents: BTreeMap<VarRef, BTreeSet<VarRef>> = vertices
            .iter()
            .map(|v| (v.clone(), BTreeSet::new()))
            .collect();
        let mut children = parents.clone();
        for (a, b) in &edges {
            parents.entry(b.clone()).or_default().insert(a.clone());
            children.entry(a.clone()).or_default().insert(b.clone());
        }
        Graph {
            vertices,
            edges,
            parents,
            children,
        }
    }

    pub fn contains(&self, v: &VarRef) -> bool {
        self.parents.contains_key(v)
    }

    pub fn parents_of(&self, v: &VarRef) -> &BTreeSet<VarRef> {
        &self.parents[v]
    }

    pub fn children_of(&self, v: &VarRef) -> &BTreeSet<VarRef> {
        &self.children[v]
    }
}

pub fn derive_graph(scm: &Scm, mode: GraphMode) -> Result<Graph, GraphError> {
    let vertices: Vec<VarRef> = scm
        .exogenous_vars()
        .into_iter()
        .chain(scm.endogenous_vars())
        .collect();
    let mut edges = BTreeSet::new();
    for e in &scm.endogenous {
        let refs = e.eq.free_refs();
        for r in &refs {
            let keep = match mode {
                GraphMode::Syntactic => true,
                GraphMode::Semantic => depends_on(scm, &e.var, &refs, r)?,
            };
            if keep {
                edges.insert((r.clone(), e.var.clone()));
            }
        }
    }
    Ok(Graph::from_edges(vertices, edges))
}

/// Whether f_var changes with `target` for some assignment of the others.
fn depends_on(
    scm: &Scm,
    var: &VarRef,
    refs: &BTreeSet<VarRef>,
    target: &VarRef,
) -> Result<bool, GraphError> {
    let too_large = || GraphError::EnumerationTooLarge {
        variable: var.to_string(),
        needed: "an infinite number of".into(),
    };
    let mut spaces = vec![];
    let mut total: u128 = 1;
    for r in refs {
        let d = scm
            .domain(r)
            .ok_or_else(|| GraphError::UnknownVariable(r.clone()))?;
        let vals = d.values().ok_or_else(too_large)?;
        total = total.saturating_mul(vals.len() as u128);
        spaces.push((r.clone(), vals));
    }
    if total > MAX_JOINT_ENUMERATION {
        return Err(GraphError::EnumerationTooLarge {
            variable: var.to_string(),
            needed: total.to_string(),
        });
    }
    let eq = &scm.endogenous(var).unwrap().eq;
    let t = spaces.iter().position(|(r, _)| r == target).unwrap();
    let target_vals = spaces.remove(t).1;
    let none = InterventionSet::new();
    let mut found = false;
    for_each_assignment(&spaces, &mut |env| {
        let mut env = env.clone();
        let mut first = None;
        for x in &target_vals {
            env.insert(target.clone(), x.clone());
            let out = eval_expr(eq, &env, &none);
            match &first {
                None => first = Some(out),
                Some(f) if *f != out => {
                    found = true;
                    return false;
                }
                _ => {}
            }
        }
        true
    });
    Ok(found)
}

/// Calls `f` on every combination of values in order; stops when it returns false.
pub fn for_each_assignment(
    spaces: &[(VarRef, Vec<Value>)],
    f: &mut dyn FnMut(&BTreeMap<VarRef, Value>) -> bool,
) {
    let mut env = BTreeMap::new();
    fn rec(
        spaces: &[(VarRef, Vec<Value>)],
        env: &mut BTreeMap<VarRef, Value>,
        f: &mut dyn FnMut(&BTreeMap<VarRef, Value>) -> bool,
    ) -> bool {
        match spaces.split_first() {
            None => f(env),
            Some(((var, vals), rest)) => {
                for v in vals {
                    env.insert(var.clone(), v.clone());
                    if !rec(rest, env, f) {
                        return false;
                    }
                }
                true
            }
        }
    }
    rec(spaces, &mut env, f);
}

/// Union of the relatives of every variable in `vars`. Ancestors and
/// descendants are transitive and exclude the query variables themselves.
pub fn relatives(
    graph: &Graph,
    vars: &BTreeSet<VarRef>,
    kind: Relation,
) -> Result<BTreeSet<VarRef>, GraphError> {
    for v in vars {
        if !graph.contains(v) {
            return Err(GraphError::UnknownVariable(v.clone()));
        }
    }
    let step = |v: &VarRef| -> &BTreeSet<VarRef> {
        match kind {
            Relation::Parents | Relation::Ancestors => graph.parents_of(v),
            Relation::Children | Relation::Descendants => graph.children_of(v),
        }
    };
    let mut out = BTreeSet::new();
    match kind {
        Relation::Parents | Relation::Children => {
            for v in vars {
                out.extend(step(v).iter().cloned());
            }
        }
        Relation::Ancestors | Relation::Descendants => {
            let mut stack: Vec<VarRef> = vars.iter().cloned().collect();
            while let Some(v) = stack.pop() {
                for w in step(&v) {
                    if out.insert(w.clone()) {
                        stack.push(w.clone());
                    }
                }
            }
            for v in vars {
                out.remove(v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Domain, Expr};
    use crate::scm::ExoDistribution;

    #[test]
    fn constant_function_has_no_semantic_edge() {
        let mut m = Scm::new("t");
        m.add_exogenous(
            VarRef::scalar("A"),
            Domain::FiniteInt { lo: 0, hi: 3 },
            ExoDistribution::UniformFinite((0..4).map(Value::Int).collect()),
        );
        m.add_endogenous(
            VarRef::scalar("B"),
            Domain::FiniteInt { lo: 0, hi: 0 },
            Expr::mul(Expr::var("A"), Expr::int(0)),
        );
        let a = VarRef::scalar("A");
        let b = VarRef::scalar("B");
        let syn = derive_graph(&m, GraphMode::Syntactic).unwrap();
        let sem = derive_graph(&m, GraphMode::Semantic).unwrap();
        assert!(syn.edges.contains(&(a.clone(), b.clone())));
        assert!(sem.edges.is_empty());
        let bs: BTreeSet<_> = [b].into_iter().collect();
        assert!(relatives(&syn, &bs, Relation::Children).unwrap().is_empty());
        assert!(relatives(
            &syn,
            &[VarRef::scalar("Q")].into_iter().collect(),
            Relation::Parents
        )
        .is_err());
    }

    #[test]
    fn real_parents_are_too_large_for_semantic_mode() {
        let mut m = Scm::new("t");
        m.add_exogenous(
            VarRef::scalar("U"),
            Domain::real(),
            ExoDistribution::Normal {
                mean: 0.0,
                variance: 1.0,
            },
        );
        m.add_endogenous(VarRef::scalar("X"), Domain::real(), Expr::var("U"));
        assert!(matches!(
            derive_graph(&m, GraphMode::Semantic),
            Err(GraphError::EnumerationTooLarge { .. })
        ));
    }
}
