// SPDX-License-Identifier: Apache-2.0

//! Partitions of the endogenous variables into sub-models.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Domain, Value, VarRef};
use crate::scm::{Endogenous, ExoDistribution, InterventionSet, InterventionSpace, Scm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Partition {
    pub clusters: Vec<BTreeSet<VarRef>>,
}

impl Partition {
    pub fn new(clusters: Vec<BTreeSet<VarRef>>) -> Self {
        Partition { clusters }
    }

    /// Every endogenous variable in its own cluster, in declaration order.
    pub fn singletons(scm: &Scm) -> Self {
        Partition::new(
            scm.endogenous
                .iter()
                .map(|e| [e.var.clone()].into_iter().collect())
                .collect(),
        )
    }

    /// One cluster holding every endogenous variable.
    pub fn whole(scm: &Scm) -> Self {
        Partition::new(vec![scm.endogenous_vars().into_iter().collect()])
    }

    pub fn cluster_of(&self, var: &VarRef) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(var))
    }

    /// The partition restricted to surviving variables; emptied clusters
    /// are dropped.
    pub fn restrict(&self, keep: &BTreeSet<VarRef>) -> Partition {
        Partition::new(
            self.clusters
                .iter()
                .map(|c| c.intersection(keep).cloned().collect::<BTreeSet<_>>())
                .filter(|c| !c.is_empty())
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum PartitionIssue {
    EmptyCluster {
        cluster: usize,
    },
    NotEndogenous {
        variable: String,
    },
    Overlap {
        variable: String,
        clusters: Vec<usize>,
    },
    Missing {
        variable: String,
    },
    /// Cluster indices along a cycle of the quotient graph; the first index
    /// is repeated at the end.
    Cycle {
        clusters: Vec<usize>,
    },
}

impl fmt::Display for PartitionIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionIssue::EmptyCluster { cluster } => write!(f, "cluster {cluster} is empty"),
            PartitionIssue::NotEndogenous { variable } => {
                write!(f, "{variable} is not an endogenous variable")
            }
            PartitionIssue::Overlap { variable, clusters } => {
                write!(f, "{variable} appears in clusters {clusters:?}")
            }
            PartitionIssue::Missing { variable } => write!(f, "{variable} is in no cluster"),
            PartitionIssue::Cycle { clusters } => {
                let s: Vec<String> = clusters.iter().map(|c| c.to_string()).collect();
                write!(f, "cluster cycle {}", s.join(" -> "))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PartitionReport {
    pub issues: Vec<PartitionIssue>,
}

impl PartitionReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn cycle(&self) -> Option<&[usize]> {
        self.issues.iter().find_map(|i| match i {
            PartitionIssue::Cycle { clusters } => Some(clusters.as_slice()),
            _ => None,
        })
    }
}

/// Cluster-level edges `i -> j` induced by base edges crossing clusters.
fn quotient_edges(scm: &Scm, p: &Partition) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for e in &scm.endogenous {
        let Some(to) = p.cluster_of(&e.var) else {
            continue;
        };
        for r in e.eq.free_refs() {
            if let Some(from) = p.cluster_of(&r) {
                if from != to {
                    out.insert((from, to));
                }
            }
        }
    }
    out
}

pub fn check_partition(scm: &Scm, p: &Partition) -> PartitionReport {
    let mut issues = vec![];
    let mut owner: BTreeMap<&VarRef, Vec<usize>> = BTreeMap::new();
    for (i, c) in p.clusters.iter().enumerate() {
        if c.is_empty() {
            issues.push(PartitionIssue::EmptyCluster { cluster: i });
        }
        for v in c {
            owner.entry(v).or_default().push(i);
        }
    }
    for (v, cs) in &owner {
        if !scm.is_endogenous(v) {
            issues.push(PartitionIssue::NotEndogenous {
                variable: v.to_string(),
            });
        } else if cs.len() > 1 {
            issues.push(PartitionIssue::Overlap {
                variable: v.to_string(),
                clusters: cs.clone(),
            });
        }
    }
    for e in &scm.endogenous {
        if !owner.contains_key(&e.var) {
            issues.push(PartitionIssue::Missing {
                variable: e.var.to_string(),
            });
        }
    }
    if issues.is_empty() {
        if let Some(cycle) = quotient_cycle(p.clusters.len(), &quotient_edges(scm, p)) {
            issues.push(PartitionIssue::Cycle { clusters: cycle });
        }
    }
    PartitionReport { issues }
}

fn quotient_cycle(n: usize, edges: &BTreeSet<(usize, usize)>) -> Option<Vec<usize>> {
    let mut succ = vec![vec![]; n];
    for &(a, b) in edges {
        succ[a].push(b);
    }
    // colour-based DFS; 0 = new, 1 = on stack, 2 = done
    let mut colour = vec![0u8; n];
    let mut stack: Vec<usize> = vec![];
    fn dfs(
        v: usize,
        succ: &[Vec<usize>],
        colour: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        colour[v] = 1;
        stack.push(v);
        for &w in &succ[v] {
            if colour[w] == 1 {
                let start = stack.iter().position(|&x| x == w).unwrap();
                let mut cycle = stack[start..].to_vec();
                cycle.push(w);
                return Some(cycle);
            }
            if colour[w] == 0 {
                if let Some(c) = dfs(w, succ, colour, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        colour[v] = 2;
        None
    }
    for v in 0..n {
        if colour[v] == 0 {
            if let Some(c) = dfs(v, &succ, &mut colour, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

/// Keeps the atoms of `i` that act on `cluster`.
pub fn psi_restrict(i: &InterventionSet, cluster: &BTreeSet<VarRef>) -> InterventionSet {
    i.restrict(cluster)
}

/// Where a sub-model input comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    /// A base exogenous variable with its distribution.
    Exogenous(ExoDistribution),
    /// An endogenous variable computed by another cluster.
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalInput {
    pub var: VarRef,
    pub domain: Domain,
    pub source: InputSource,
}

/// One cluster packaged as its own model.
#[derive(Clone, Debug, PartialEq)]
pub struct SubScm {
    pub cluster: BTreeSet<VarRef>,
    /// Parents of the cluster outside it, in base declaration order
    /// (exogenous first).
    pub inputs: Vec<LocalInput>,
    /// Cluster equations in base declaration order.
    pub equations: Vec<Endogenous>,
    pub space: InterventionSpace,
}

impl SubScm {
    pub fn local_exogenous(&self) -> BTreeSet<VarRef> {
        self.inputs.iter().map(|i| i.var.clone()).collect()
    }

    pub fn domain(&self, var: &VarRef) -> Option<&Domain> {
        self.equations
            .iter()
            .find(|e| &e.var == var)
            .map(|e| &e.domain)
            .or_else(|| {
                self.inputs
                    .iter()
                    .find(|i| &i.var == var)
                    .map(|i| &i.domain)
            })
    }

    /// The sub-model as a standalone model. Boundary inputs become
    /// exogenous variables whose distribution spreads over their domain.
    pub fn to_scm(&self, name: &str) -> Scm {
        let mut m = Scm::new(name);
        for i in &self.inputs {
            let dist = match &i.source {
                InputSource::Exogenous(d) => d.clone(),
                InputSource::Boundary => boundary_distribution(&i.domain),
            };
            m.add_exogenous(i.var.clone(), i.domain.clone(), dist);
        }
        m.endogenous = self.equations.clone();
        m.interventions = self.space.clone();
        m
    }
}

/// Proxy distribution for an input whose law is induced by another cluster.
pub fn boundary_distribution(domain: &Domain) -> ExoDistribution {
    match domain {
        Domain::Real {
            bounds: Some((lo, hi)),
        } => ExoDistribution::UniformReal { lo: *lo, hi: *hi },
        Domain::Real { bounds: None } => ExoDistribution::Normal {
            mean: 0.0,
            variance: 100.0,
        },
        d => match d.values() {
            Some(vs) => ExoDistribution::UniformFinite(vs),
            None => {
                let Domain::FiniteInt { lo, .. } = d else {
                    unreachable!()
                };
                ExoDistribution::PointMass(Value::Int(*lo))
            }
        },
    }
}

pub fn extract_sub_scm(scm: &Scm, cluster: &BTreeSet<VarRef>) -> Result<SubScm, PartitionError> {
    for v in cluster {
        if !scm.is_endogenous(v) {
            return Err(PartitionError::UnknownVariable(v.to_string()));
        }
    }
    let equations: Vec<Endogenous> = scm
        .endogenous
        .iter()
        .filter(|e| cluster.contains(&e.var))
        .cloned()
        .collect();
    let parents: BTreeSet<VarRef> = equations
        .iter()
        .flat_map(|e| e.eq.free_refs())
        .filter(|r| !cluster.contains(r))
        .collect();
    let mut inputs = vec![];
    for x in &scm.exogenous {
        if parents.contains(&x.var) {
            inputs.push(LocalInput {
                var: x.var.clone(),
                domain: x.domain.clone(),
                source: InputSource::Exogenous(x.dist.clone()),
            });
        }
    }
    for e in &scm.endogenous {
        if parents.contains(&e.var) {
            inputs.push(LocalInput {
                var: e.var.clone(),
                domain: e.domain.clone(),
                source: InputSource::Boundary,
            });
        }
    }
    Ok(SubScm {
        cluster: cluster.clone(),
        inputs,
        equations,
        space: scm.interventions.restrict(cluster),
    })
}

/// A linear extension of the quotient order; ties go to the smallest
/// cluster index.
pub fn order_clusters(scm: &Scm, p: &Partition) -> Result<Vec<usize>, PartitionError> {
    let report = check_partition(scm, p);
    if !report.is_valid() {
        let msg: Vec<String> = report.issues.iter().map(|i| i.to_string()).collect();
        return Err(PartitionError::InvalidPartition(msg.join("; ")));
    }
    let n = p.clusters.len();
    let mut indeg = vec![0usize; n];
    let mut succ = vec![vec![]; n];
    for (a, b) in quotient_edges(scm, p) {
        succ[a].push(b);
        indeg[b] += 1;
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        out.push(i);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.push(Reverse(j));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn set(names: &[&str]) -> BTreeSet<VarRef> {
        names.iter().map(|n| VarRef::scalar(*n)).collect()
    }

    fn chain() -> Scm {
        let mut m = Scm::new("chain");
        m.add_exogenous(
            VarRef::scalar("U"),
            Domain::Boolean,
            ExoDistribution::PointMass(Value::Bool(true)),
        );
        m.add_endogenous(VarRef::scalar("X"), Domain::Boolean, Expr::var("U"));
        m.add_endogenous(VarRef::scalar("Y"), Domain::Boolean, Expr::var("X"));
        m.add_endogenous(VarRef::scalar("Z"), Domain::Boolean, Expr::var("Y"));
        m
    }

    #[test]
    fn exit_and_reenter_is_a_cycle() {
        let p = Partition::new(vec![set(&["X", "Z"]), set(&["Y"])]);
        let r = check_partition(&chain(), &p);
        assert_eq!(r.cycle(), Some(&[0, 1, 0][..]));
        assert!(order_clusters(&chain(), &p).is_err());
    }

    #[test]
    fn membership_issues() {
        let p = Partition::new(vec![set(&["X", "Y"]), set(&["Y", "U"]), set(&[])]);
        let r = check_partition(&chain(), &p);
        let kinds: Vec<String> = r.issues.iter().map(|i| format!("{i:?}")).collect();
        assert!(kinds.iter().any(|k| k.starts_with("EmptyCluster")));
        assert!(kinds.iter().any(|k| k.starts_with("NotEndogenous")));
        assert!(kinds.iter().any(|k| k.starts_with("Overlap")));
        assert!(kinds.iter().any(|k| k.starts_with("Missing")));
    }

    #[test]
    fn independent_clusters_keep_input_order() {
        let mut m = Scm::new("two");
        for n in ["P", "Q"] {
            m.add_endogenous(VarRef::scalar(n), Domain::Boolean, Expr::bool(true));
        }
        let p = Partition::new(vec![set(&["Q"]), set(&["P"])]);
        assert_eq!(order_clusters(&m, &p).unwrap(), vec![0, 1]);
    }

    #[test]
    fn psi_keeps_only_cluster_atoms() {
        let cluster = set(&["E", "F", "G"]);
        let d = InterventionSet::single(VarRef::scalar("D"), Value::Bool(true));
        let g = InterventionSet::single(VarRef::scalar("G"), Value::Bool(false));
        assert!(psi_restrict(&d, &cluster).is_empty());
        assert_eq!(psi_restrict(&g, &cluster), g);
        assert!(psi_restrict(&InterventionSet::new(), &cluster).is_empty());
    }

    #[test]
    fn sub_model_inputs() {
        let sub = extract_sub_scm(&chain(), &set(&["Y", "Z"])).unwrap();
        assert_eq!(sub.local_exogenous(), set(&["X"]));
        assert_eq!(sub.inputs[0].source, InputSource::Boundary);
        assert!(extract_sub_scm(&chain(), &set(&["W"])).is_err());
    }
}
