// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{InterventionSet, InterventionSpace, Scm};
use crate::expr::{Type, VarRef};

/// One violated model invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Finding {
    /// Variables along a dependency cycle; the first repeats at the end
    /// implicitly.
    Cycle {
        path: Vec<String>,
    },
    UnresolvedRef {
        variable: String,
        reference: String,
    },
    /// An equation reads an endogenous variable declared after it.
    OrderViolation {
        variable: String,
        reference: String,
    },
    DuplicateVariable {
        variable: String,
    },
    InvalidDomain {
        variable: String,
        message: String,
    },
    InvalidDistribution {
        variable: String,
        message: String,
    },
    TypeError {
        variable: String,
        message: String,
    },
    AtomOnExogenous {
        variable: String,
    },
    AtomOnUnknown {
        variable: String,
    },
    AtomValueOutOfDomain {
        variable: String,
        value: String,
    },
    DuplicateAtom {
        variable: String,
    },
    ClosureViolation {
        set: String,
        missing: Vec<String>,
    },
}

impl Finding {
    pub fn kind(&self) -> &'static str {
        match self {
            Finding::Cycle { .. } => "Cycle",
            Finding::UnresolvedRef { .. } => "UnresolvedRef",
            Finding::OrderViolation { .. } => "OrderViolation",
            Finding::DuplicateVariable { .. } => "DuplicateVariable",
            Finding::InvalidDomain { .. } => "InvalidDomain",
            Finding::InvalidDistribution { .. } => "InvalidDistribution",
            Finding::TypeError { .. } => "TypeError",
            Finding::AtomOnExogenous { .. } => "AtomOnExogenous",
            Finding::AtomOnUnknown { .. } => "AtomOnUnknown",
            Finding::AtomValueOutOfDomain { .. } => "AtomValueOutOfDomain",
            Finding::DuplicateAtom { .. } => "DuplicateAtom",
            Finding::ClosureViolation { .. } => "ClosureViolation",
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::Cycle { path } => write!(f, "Cycle: {}", path.join(" -> ")),
            Finding::UnresolvedRef {
                variable,
                reference,
            } => write!(f, "UnresolvedRef: {variable} reads unknown {reference}"),
            Finding::OrderViolation {
                variable,
                reference,
            } => write!(
                f,
                "OrderViolation: {variable} reads {reference}, declared later"
            ),
            Finding::DuplicateVariable { variable } => {
                write!(f, "DuplicateVariable: {variable}")
            }
            Finding::InvalidDomain { variable, message } => {
                write!(f, "InvalidDomain: {variable}: {message}")
            }
            Finding::InvalidDistribution { variable, message } => {
                write!(f, "InvalidDistribution: {variable}: {message}")
            }
            Finding::TypeError { variable, message } => {
                write!(f, "TypeError: {variable}: {message}")
            }
            Finding::AtomOnExogenous { variable } => write!(f, "AtomOnExogenous: {variable}"),
            Finding::AtomOnUnknown { variable } => write!(f, "AtomOnUnknown: {variable}"),
            Finding::AtomValueOutOfDomain { variable, value } => {
                write!(f, "AtomValueOutOfDomain: {variable} = {value}")
            }
            Finding::DuplicateAtom { variable } => write!(f, "DuplicateAtom: {variable}"),
            Finding::ClosureViolation { set, missing } => {
                write!(
                    f,
                    "ClosureViolation: {set} lacks subsets {}",
                    missing.join(", ")
                )
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, kind: &str) -> bool {
        self.findings.iter().any(|f| f.kind() == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "valid");
        }
        for x in &self.findings {
            writeln!(f, "{x}")?;
        }
        Ok(())
    }
}

pub fn validate(scm: &Scm) -> ValidationReport {
    let mut out = vec![];
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for v in scm
        .exogenous_vars()
        .iter()
        .chain(scm.endogenous_vars().iter())
    {
        *seen.entry(v.to_string()).or_default() += 1;
    }
    for (name, n) in &seen {
        if *n > 1 {
            out.push(Finding::DuplicateVariable {
                variable: name.clone(),
            });
        }
    }

    for x in &scm.exogenous {
        if let Err(message) = x.domain.check() {
            out.push(Finding::InvalidDomain {
                variable: x.var.to_string(),
                message,
            });
        } else if let Err(message) = x.dist.check(&x.domain) {
            out.push(Finding::InvalidDistribution {
                variable: x.var.to_string(),
                message,
            });
        }
    }

    let position: BTreeMap<&VarRef, usize> = scm
        .endogenous
        .iter()
        .enumerate()
        .map(|(i, e)| (&e.var, i))
        .collect();
    let cycles = find_cycles(scm);
    let cyclic: BTreeSet<String> = cycles.iter().flatten().cloned().collect();
    out.extend(cycles.into_iter().map(|path| Finding::Cycle { path }));

    let lookup = |v: &VarRef| scm.type_of(v);
    for (i, e) in scm.endogenous.iter().enumerate() {
        if let Err(message) = e.domain.check() {
            out.push(Finding::InvalidDomain {
                variable: e.var.to_string(),
                message,
            });
        }
        let mut resolved = true;
        for r in e.eq.free_refs() {
            if scm.is_exogenous(&r) {
                continue;
            }
            match position.get(&r) {
                None => {
                    resolved = false;
                    out.push(Finding::UnresolvedRef {
                        variable: e.var.to_string(),
                        reference: r.to_string(),
                    });
                }
                Some(&j) if j >= i && !cyclic.contains(&e.var.to_string()) => {
                    out.push(Finding::OrderViolation {
                        variable: e.var.to_string(),
                        reference: r.to_string(),
                    })
                }
                _ => {}
            }
        }
        if !resolved {
            continue;
        }
        match e.eq.infer_type(&lookup) {
            Err(message) => out.push(Finding::TypeError {
                variable: e.var.to_string(),
                message,
            }),
            Ok(t) => {
                let want = e.domain.ty();
                if t != want && !(t == Type::Int && want == Type::Real) {
                    out.push(Finding::TypeError {
                        variable: e.var.to_string(),
                        message: format!("equation has type {t}, domain is {}", e.domain),
                    });
                }
            }
        }
    }

    check_space(scm, &mut out);
    ValidationReport { findings: out }
}

fn check_space(scm: &Scm, out: &mut Vec<Finding>) {
    let mut atom_pairs: Vec<(&VarRef, Vec<&crate::expr::Value>)> = vec![];
    match &scm.interventions {
        InterventionSpace::PowerSet(atoms) | InterventionSpace::Singleton(atoms) => {
            let mut seen = BTreeSet::new();
            for a in atoms {
                if !seen.insert(&a.var) {
                    out.push(Finding::DuplicateAtom {
                        variable: a.var.to_string(),
                    });
                }
                atom_pairs.push((&a.var, a.values.iter().collect()));
            }
        }
        InterventionSpace::Explicit(sets) => {
            for s in sets {
                for (k, v) in s.iter() {
                    atom_pairs.push((k, vec![v]));
                }
            }
        }
    }
    let mut reported = BTreeSet::new();
    for (var, values) in atom_pairs {
        if scm.is_exogenous(var) {
            if reported.insert(var.clone()) {
                out.push(Finding::AtomOnExogenous {
                    variable: var.to_string(),
                });
            }
            continue;
        }
        let Some(e) = scm.endogenous(var) else {
            if reported.insert(var.clone()) {
                out.push(Finding::AtomOnUnknown {
                    variable: var.to_string(),
                });
            }
            continue;
        };
        for v in values {
            if !e.domain.contains(v) {
                out.push(Finding::AtomValueOutOfDomain {
                    variable: var.to_string(),
                    value: v.to_string(),
                });
            }
        }
    }
    for (set, missing) in scm.interventions.closure_violations() {
        out.push(Finding::ClosureViolation {
            set: set.to_string(),
            missing: missing.iter().map(InterventionSet::to_string).collect(),
        });
    }
}

/// Elementary dependency cycles among endogenous variables, one witness per
/// strongly connected component.
fn find_cycles(scm: &Scm) -> Vec<Vec<String>> {
    let n = scm.endogenous.len();
    let index: BTreeMap<&VarRef, usize> = scm
        .endogenous
        .iter()
        .enumerate()
        .map(|(i, e)| (&e.var, i))
        .collect();
    // adjacency: parent -> child
    let mut succ = vec![vec![]; n];
    for (i, e) in scm.endogenous.iter().enumerate() {
        for r in e.eq.free_refs() {
            if let Some(&j) = index.get(&r) {
                succ[j].push(i);
            }
        }
    }
    for s in &mut succ {
        s.sort_unstable();
        s.dedup();
    }
    let mut out = vec![];
    let mut done = vec![false; n];
    for start in 0..n {
        if done[start] {
            continue;
        }
        // search for a path from a successor of `start` back to `start`
        if let Some(path) = path_back(&succ, start) {
            for &v in &path {
                done[v] = true;
            }
            out.push(
                path.iter()
                    .map(|&i| scm.endogenous[i].var.to_string())
                    .collect(),
            );
        }
    }
    out
}

fn path_back(succ: &[Vec<usize>], start: usize) -> Option<Vec<usize>> {
    let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::new();
    for &s in &succ[start] {
        if s == start {
            return Some(vec![start]);
        }
        if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(s) {
            e.insert(start);
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &succ[v] {
            if w == start {
                let mut path = vec![v];
                let mut cur = v;
                while let Some(&p) = prev.get(&cur) {
                    if p == start {
                        break;
                    }
                    path.push(p);
                    cur = p;
                }
                path.push(start);
                path.reverse();
                return Some(path);
            }
            if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(w) {
                e.insert(v);
                queue.push_back(w);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Domain, Expr, Value};
    use crate::scm::{Atom, ExoDistribution};

    fn base() -> Scm {
        let mut m = Scm::new("t");
        m.add_exogenous(
            VarRef::scalar("U"),
            Domain::Boolean,
            ExoDistribution::UniformFinite(vec![Value::Bool(false), Value::Bool(true)]),
        );
        m
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let mut m = base();
        m.add_endogenous(
            VarRef::scalar("A"),
            Domain::Boolean,
            Expr::and(Expr::var("A"), Expr::var("U")),
        );
        let r = validate(&m);
        assert_eq!(
            r.findings,
            vec![Finding::Cycle {
                path: vec!["A".into()]
            }]
        );
    }

    #[test]
    fn two_cycle_has_a_witness() {
        let mut m = base();
        m.add_endogenous(VarRef::scalar("A"), Domain::Boolean, Expr::var("B"));
        m.add_endogenous(VarRef::scalar("B"), Domain::Boolean, Expr::var("A"));
        let r = validate(&m);
        assert_eq!(
            r.findings,
            vec![Finding::Cycle {
                path: vec!["A".into(), "B".into()]
            }]
        );
    }

    #[test]
    fn reports_references_atoms_and_types() {
        let mut m = base();
        m.add_endogenous(VarRef::scalar("A"), Domain::Boolean, Expr::var("Z"));
        m.add_endogenous(
            VarRef::scalar("B"),
            Domain::FiniteInt { lo: 0, hi: 3 },
            Expr::var("U"),
        );
        m.add_endogenous(VarRef::scalar("C"), Domain::Boolean, Expr::var("D"));
        m.add_endogenous(VarRef::scalar("D"), Domain::Boolean, Expr::var("U"));
        m.interventions = InterventionSpace::PowerSet(vec![
            Atom::new(VarRef::scalar("U"), vec![Value::Bool(true)]),
            Atom::new(VarRef::scalar("B"), vec![Value::Int(9)]),
        ]);
        let r = validate(&m);
        for kind in [
            "UnresolvedRef",
            "TypeError",
            "OrderViolation",
            "AtomOnExogenous",
            "AtomValueOutOfDomain",
        ] {
            assert!(r.has(kind), "missing {kind} in {r}");
        }
    }

    #[test]
    fn duplicate_display_names_clash() {
        let mut m = base();
        m.add_endogenous(VarRef::indexed("S", 1), Domain::Boolean, Expr::var("U"));
        m.add_endogenous(VarRef::scalar("S_1"), Domain::Boolean, Expr::var("U"));
        assert!(validate(&m).has("DuplicateVariable"));
    }
}
