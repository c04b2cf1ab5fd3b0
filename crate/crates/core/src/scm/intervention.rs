// SPDX-License-Identifier: Apache-2.0

//! Intervention sets and the families of sets a model allows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;

use crate::expr::{Value, VarRef};

/// A concrete set of perfect interventions `do(V = v)`, at most one per
/// variable.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InterventionSet(BTreeMap<VarRef, Value>);

impl InterventionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(var: VarRef, value: Value) -> Self {
        let mut s = Self::new();
        s.insert(var, value);
        s
    }

    /// Inserts an atom, returning the value it replaced.
    pub fn insert(&mut self, var: VarRef, value: Value) -> Option<Value> {
        self.0.insert(var, value)
    }

    pub fn get(&self, var: &VarRef) -> Option<&Value> {
        self.0.get(var)
    }

    pub fn contains_var(&self, var: &VarRef) -> bool {
        self.0.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarRef, &Value)> {
        self.0.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarRef> {
        self.0.keys()
    }

    /// Keeps the atoms whose variable satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&VarRef) -> bool) -> Self {
        InterventionSet(
            self.0
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }

    /// Projection onto a cluster of variables.
    pub fn restrict(&self, cluster: &BTreeSet<VarRef>) -> Self {
        self.filter(|v| cluster.contains(v))
    }

    pub fn is_subset_of(&self, other: &InterventionSet) -> bool {
        self.0.iter().all(|(k, v)| other.0.get(k) == Some(v))
    }

    /// Every subset, the empty set first and `self` last.
    pub fn subsets(&self) -> Vec<InterventionSet> {
        let atoms: Vec<_> = self.0.iter().collect();
        let n = atoms.len();
        let mut out = Vec::with_capacity(1 << n.min(20));
        for mask in 0u64..(1u64 << n) {
            out.push(InterventionSet(
                atoms
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, (k, v))| ((*k).clone(), (*v).clone()))
                    .collect(),
            ));
        }
        out
    }
}

impl FromIterator<(VarRef, Value)> for InterventionSet {
    fn from_iter<T: IntoIterator<Item = (VarRef, Value)>>(iter: T) -> Self {
        InterventionSet(iter.into_iter().collect())
    }
}

impl fmt::Display for InterventionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "do({k}={v})")?;
        }
        f.write_str("}")
    }
}

/// An intervenable variable together with the values it may be set to.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub var: VarRef,
    pub values: Vec<Value>,
}

impl Atom {
    pub fn new(var: VarRef, values: Vec<Value>) -> Self {
        Atom { var, values }
    }
}

/// The allowed intervention family. Generator modes describe the family
/// intensionally; explicit mode lists every set.
#[derive(Clone, Debug, PartialEq)]
pub enum InterventionSpace {
    /// Every combination of at most one value per atom variable.
    PowerSet(Vec<Atom>),
    /// The empty set plus every single atom.
    Singleton(Vec<Atom>),
    /// Exactly the listed sets.
    Explicit(Vec<InterventionSet>),
}

impl Default for InterventionSpace {
    fn default() -> Self {
        InterventionSpace::PowerSet(vec![])
    }
}

impl InterventionSpace {
    pub fn mode_name(&self) -> &'static str {
        match self {
            InterventionSpace::PowerSet(_) => "powerset",
            InterventionSpace::Singleton(_) => "singleton",
            InterventionSpace::Explicit(_) => "explicit",
        }
    }

    pub fn contains(&self, set: &InterventionSet) -> bool {
        match self {
            InterventionSpace::PowerSet(atoms) => set
                .iter()
                .all(|(k, v)| atoms.iter().any(|a| &a.var == k && a.values.contains(v))),
            InterventionSpace::Singleton(atoms) => {
                set.len() <= 1
                    && set
                        .iter()
                        .all(|(k, v)| atoms.iter().any(|a| &a.var == k && a.values.contains(v)))
            }
            InterventionSpace::Explicit(sets) => sets.contains(set),
        }
    }

    /// Number of realizable sets, `None` when it does not fit in a `u128`.
    pub fn count(&self) -> Option<u128> {
        match self {
            InterventionSpace::PowerSet(atoms) => atoms
                .iter()
                .try_fold(1u128, |acc, a| acc.checked_mul(1 + a.values.len() as u128)),
            InterventionSpace::Singleton(atoms) => {
                Some(1 + atoms.iter().map(|a| a.values.len() as u128).sum::<u128>())
            }
            InterventionSpace::Explicit(sets) => {
                Some(sets.iter().collect::<BTreeSet<_>>().len() as u128)
            }
        }
    }

    /// All realizable sets in a deterministic order (empty set first for the
    /// generator modes), or `None` if there are more than `budget`.
    pub fn enumerate(&self, budget: usize) -> Option<Vec<InterventionSet>> {
        if self.count()? > budget as u128 {
            return None;
        }
        Some(match self {
            InterventionSpace::PowerSet(atoms) => {
                let mut out = vec![InterventionSet::new()];
                for a in atoms.iter().rev() {
                    let mut next = Vec::with_capacity(out.len() * (1 + a.values.len()));
                    next.extend(out.iter().cloned());
                    for v in &a.values {
                        for s in &out {
                            let mut s = s.clone();
                            s.insert(a.var.clone(), v.clone());
                            next.push(s);
                        }
                    }
                    out = next;
                }
                out.sort_by_key(|s| s.len());
                out
            }
            InterventionSpace::Singleton(atoms) => std::iter::once(InterventionSet::new())
                .chain(atoms.iter().flat_map(|a| {
                    a.values
                        .iter()
                        .map(|v| InterventionSet::single(a.var.clone(), v.clone()))
                }))
                .collect(),
            InterventionSpace::Explicit(sets) => {
                let mut seen = BTreeSet::new();
                sets.iter().filter(|s| seen.insert(*s)).cloned().collect()
            }
        })
    }

    /// Draws one realizable set uniformly per atom (power-set mode) or
    /// uniformly over the listed/generated sets.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> InterventionSet {
        match self {
            InterventionSpace::PowerSet(atoms) => {
                let mut s = InterventionSet::new();
                for a in atoms {
                    let k = rng.gen_range(0..=a.values.len());
                    if k > 0 {
                        s.insert(a.var.clone(), a.values[k - 1].clone());
                    }
                }
                s
            }
            InterventionSpace::Singleton(atoms) => {
                let total: usize = atoms.iter().map(|a| a.values.len()).sum();
                let mut k = rng.gen_range(0..=total);
                if k == 0 {
                    return InterventionSet::new();
                }
                k -= 1;
                for a in atoms {
                    if k < a.values.len() {
                        return InterventionSet::single(a.var.clone(), a.values[k].clone());
                    }
                    k -= a.values.len();
                }
                unreachable!()
            }
            InterventionSpace::Explicit(sets) => {
                if sets.is_empty() {
                    InterventionSet::new()
                } else {
                    sets[rng.gen_range(0..sets.len())].clone()
                }
            }
        }
    }

    /// Values `var` can be set to by some realizable set.
    pub fn atom_values(&self, var: &VarRef) -> BTreeSet<Value> {
        match self {
            InterventionSpace::PowerSet(atoms) | InterventionSpace::Singleton(atoms) => atoms
                .iter()
                .filter(|a| &a.var == var)
                .flat_map(|a| a.values.iter().cloned())
                .collect(),
            InterventionSpace::Explicit(sets) => {
                sets.iter().filter_map(|s| s.get(var).cloned()).collect()
            }
        }
    }

    pub fn intervenable_vars(&self) -> BTreeSet<VarRef> {
        match self {
            InterventionSpace::PowerSet(atoms) | InterventionSpace::Singleton(atoms) => atoms
                .iter()
                .filter(|a| !a.values.is_empty())
                .map(|a| a.var.clone())
                .collect(),
            InterventionSpace::Explicit(sets) => {
                sets.iter().flat_map(|s| s.vars().cloned()).collect()
            }
        }
    }

    pub fn is_intervenable(&self, var: &VarRef) -> bool {
        !self.atom_values(var).is_empty()
    }

    /// Image of the space under removal of every atom whose variable fails
    /// `keep`. For explicit spaces duplicates are merged, keeping the first
    /// occurrence.
    pub fn filter_vars(&self, mut keep: impl FnMut(&VarRef) -> bool) -> InterventionSpace {
        match self {
            InterventionSpace::PowerSet(atoms) => InterventionSpace::PowerSet(
                atoms.iter().filter(|a| keep(&a.var)).cloned().collect(),
            ),
            InterventionSpace::Singleton(atoms) => InterventionSpace::Singleton(
                atoms.iter().filter(|a| keep(&a.var)).cloned().collect(),
            ),
            InterventionSpace::Explicit(sets) => {
                let mut seen = BTreeSet::new();
                let mut out = vec![];
                for s in sets {
                    let r = s.filter(&mut keep);
                    if seen.insert(r.clone()) {
                        out.push(r);
                    }
                }
                InterventionSpace::Explicit(out)
            }
        }
    }

    /// Image of the space under projection onto `cluster`.
    pub fn restrict(&self, cluster: &BTreeSet<VarRef>) -> InterventionSpace {
        self.filter_vars(|v| cluster.contains(v))
    }

    /// For explicit spaces: each listed set together with the subsets of it
    /// that are not listed. Generator modes are closed by construction.
    pub fn closure_violations(&self) -> Vec<(InterventionSet, Vec<InterventionSet>)> {
        let InterventionSpace::Explicit(sets) = self else {
            return vec![];
        };
        let listed: BTreeSet<_> = sets.iter().collect();
        let mut out = vec![];
        for s in sets {
            if s.len() > 20 {
                continue;
            }
            let missing: Vec<_> = s
                .subsets()
                .into_iter()
                .filter(|sub| !listed.contains(sub))
                .collect();
            if !missing.is_empty() {
                out.push((s.clone(), missing));
            }
        }
        out
    }

    /// Atoms mentioned by the space, in declaration order, for reporting.
    pub fn atoms(&self) -> Vec<(VarRef, Value)> {
        match self {
            InterventionSpace::PowerSet(atoms) | InterventionSpace::Singleton(atoms) => atoms
                .iter()
                .flat_map(|a| a.values.iter().map(|v| (a.var.clone(), v.clone())))
                .collect(),
            InterventionSpace::Explicit(sets) => {
                let mut seen = BTreeSet::new();
                sets.iter()
                    .flat_map(|s| s.iter().map(|(k, v)| (k.clone(), v.clone())))
                    .filter(|a| seen.insert(a.clone()))
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> VarRef {
        VarRef::scalar(name)
    }

    fn set(atoms: &[(&str, Value)]) -> InterventionSet {
        atoms.iter().map(|(n, x)| (v(n), x.clone())).collect()
    }

    #[test]
    fn powerset_enumeration_counts() {
        let space = InterventionSpace::PowerSet(vec![
            Atom::new(v("A"), vec![Value::Int(0)]),
            Atom::new(v("B"), vec![Value::Int(0), Value::Int(1)]),
        ]);
        let all = space.enumerate(100).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(space.count(), Some(6));
        assert!(all[0].is_empty());
        assert!(all.iter().all(|s| space.contains(s)));
        let distinct: BTreeSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 6);
        assert!(space.enumerate(5).is_none());
    }

    #[test]
    fn singleton_membership() {
        let space = InterventionSpace::Singleton(vec![
            Atom::new(v("A"), vec![Value::Bool(false), Value::Bool(true)]),
            Atom::new(v("B"), vec![Value::Bool(false)]),
        ]);
        assert_eq!(space.enumerate(10).unwrap().len(), 4);
        assert!(space.contains(&InterventionSet::new()));
        assert!(!space.contains(&set(&[("A", Value::Bool(true)), ("B", Value::Bool(false))])));
        assert!(!space.contains(&set(&[("B", Value::Bool(true))])));
    }

    #[test]
    fn closure_violation_lists_missing_subsets() {
        let both = set(&[("D", Value::Bool(true)), ("G", Value::Bool(false))]);
        let space = InterventionSpace::Explicit(vec![both.clone()]);
        let v = space.closure_violations();
        assert_eq!(v.len(), 1);
        let missing: BTreeSet<_> = v[0].1.iter().cloned().collect();
        let expected: BTreeSet<_> = [
            InterventionSet::new(),
            set(&[("D", Value::Bool(true))]),
            set(&[("G", Value::Bool(false))]),
        ]
        .into_iter()
        .collect();
        assert_eq!(missing, expected);
    }

    #[test]
    fn restriction_merges_duplicates_in_first_occurrence_order() {
        let space = InterventionSpace::Explicit(vec![
            set(&[("D", Value::Bool(true))]),
            set(&[("D", Value::Bool(false))]),
            set(&[("G", Value::Bool(false))]),
            InterventionSet::new(),
        ]);
        let cluster: BTreeSet<_> = ["E", "F", "G"].into_iter().map(v).collect();
        let r = space.restrict(&cluster);
        assert_eq!(
            r,
            InterventionSpace::Explicit(vec![
                InterventionSet::new(),
                set(&[("G", Value::Bool(false))])
            ])
        );
        assert!(r.closure_violations().is_empty());
    }
}
