// SPDX-License-Identifier: Apache-2.0

//! Structural causal models: variables, equations, the allowed
//! intervention family and the exogenous distribution.

mod graph;
pub mod intervention;
mod reparam;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use crate::expr::{Domain, Expr, Type, Value, VarRef};

pub use graph::for_each_assignment;
pub use graph::{derive_graph, relatives, Graph, GraphError, GraphMode, Relation};
pub use intervention::{Atom, InterventionSet, InterventionSpace};
pub use reparam::reparameterize;
pub use validate::{validate, Finding, ValidationReport};

/// Largest joint assignment count any enumeration in the crate will walk.
pub const MAX_JOINT_ENUMERATION: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum ExoDistribution {
    PointMass(Value),
    UniformFinite(Vec<Value>),
    Normal { mean: f64, variance: f64 },
    UniformReal { lo: f64, hi: f64 },
    Bernoulli(f64),
}

impl ExoDistribution {
    /// The finite support, if there is one.
    pub fn support(&self) -> Option<Vec<Value>> {
        match self {
            ExoDistribution::PointMass(v) => Some(vec![v.clone()]),
            ExoDistribution::UniformFinite(vs) => {
                let set: BTreeSet<_> = vs.iter().cloned().collect();
                Some(set.into_iter().collect())
            }
            ExoDistribution::Bernoulli(_) => Some(vec![Value::Bool(false), Value::Bool(true)]),
            ExoDistribution::Normal { .. } | ExoDistribution::UniformReal { .. } => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ExoDistribution::PointMass(_) => "point_mass",
            ExoDistribution::UniformFinite(_) => "uniform_finite",
            ExoDistribution::Normal { .. } => "normal",
            ExoDistribution::UniformReal { .. } => "uniform_real",
            ExoDistribution::Bernoulli(_) => "bernoulli",
        }
    }

    /// Checks the parameters against the variable's domain.
    pub fn check(&self, domain: &Domain) -> Result<(), String> {
        let member = |v: &Value| {
            if domain.coerce(v.clone()).is_some() {
                Ok(())
            } else {
                Err(format!("{v} is not in {domain}"))
            }
        };
        match self {
            ExoDistribution::PointMass(v) => member(v),
            ExoDistribution::UniformFinite(vs) => {
                if vs.is_empty() {
                    return Err("uniform over an empty set".into());
                }
                vs.iter().try_for_each(member)
            }
            ExoDistribution::Normal { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || *variance < 0.0 {
                    return Err(format!("invalid normal({mean}, {variance})"));
                }
                match domain {
                    Domain::Real { bounds: None } => Ok(()),
                    _ => Err(format!(
                        "normal distribution needs an unbounded real domain, not {domain}"
                    )),
                }
            }
            ExoDistribution::UniformReal { lo, hi } => {
                if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(format!("invalid uniform({lo}, {hi})"));
                }
                member(&Value::Real(*lo))?;
                member(&Value::Real(*hi))
            }
            ExoDistribution::Bernoulli(p) => {
                if !(0.0..=1.0).contains(p) {
                    return Err(format!("bernoulli parameter {p} outside [0, 1]"));
                }
                if *domain != Domain::Boolean {
                    return Err(format!("bernoulli needs a boolean domain, not {domain}"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exogenous {
    pub var: VarRef,
    pub domain: Domain,
    pub dist: ExoDistribution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Endogenous {
    pub var: VarRef,
    pub domain: Domain,
    pub eq: Expr,
}

/// A declared inverse pair: `inverse` applied to `forward` is the identity.
/// Both are templates over the hole variable `_`.
#[derive(Clone, Debug, PartialEq)]
pub struct InversePair {
    pub forward: Expr,
    pub inverse: Expr,
}

impl InversePair {
    pub const HOLE: &'static str = "_";

    pub fn hole() -> VarRef {
        VarRef::scalar(Self::HOLE)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scm {
    pub name: String,
    pub exogenous: Vec<Exogenous>,
    pub endogenous: Vec<Endogenous>,
    pub interventions: InterventionSpace,
    pub inverse_pairs: Vec<InversePair>,
}

impl Scm {
    pub fn new(name: impl Into<String>) -> Self {
        Scm {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_exogenous(&mut self, var: VarRef, domain: Domain, dist: ExoDistribution) {
        self.exogenous.push(Exogenous { var, domain, dist });
    }

    pub fn add_endogenous(&mut self, var: VarRef, domain: Domain, eq: Expr) {
        self.endogenous.push(Endogenous { var, domain, eq });
    }

    pub fn endogenous_vars(&self) -> Vec<VarRef> {
        self.endogenous.iter().map(|e| e.var.clone()).collect()
    }

    pub fn exogenous_vars(&self) -> Vec<VarRef> {
        self.exogenous.iter().map(|e| e.var.clone()).collect()
    }

    pub fn endogenous(&self, var: &VarRef) -> Option<&Endogenous> {
        self.endogenous.iter().find(|e| &e.var == var)
    }

    pub fn exogenous(&self, var: &VarRef) -> Option<&Exogenous> {
        self.exogenous.iter().find(|e| &e.var == var)
    }

    pub fn is_endogenous(&self, var: &VarRef) -> bool {
        self.endogenous(var).is_some()
    }

    pub fn is_exogenous(&self, var: &VarRef) -> bool {
        self.exogenous(var).is_some()
    }

    pub fn domain(&self, var: &VarRef) -> Option<&Domain> {
        self.endogenous(var)
            .map(|e| &e.domain)
            .or_else(|| self.exogenous(var).map(|e| &e.domain))
    }

    pub fn type_of(&self, var: &VarRef) -> Option<Type> {
        self.domain(var).map(Domain::ty)
    }

    /// Finds a variable by its display name (`S_3`, `target_coin`).
    pub fn resolve(&self, display: &str) -> Option<VarRef> {
        self.exogenous
            .iter()
            .map(|e| &e.var)
            .chain(self.endogenous.iter().map(|e| &e.var))
            .find(|v| v.to_string() == display)
            .cloned()
    }

    /// Whether any equation still contains a random draw.
    pub fn is_stochastic(&self) -> bool {
        self.endogenous.iter().any(|e| e.eq.is_stochastic())
    }

    /// Keeps only the endogenous variables in `keep`, dropping intervention
    /// atoms on removed variables.
    pub fn retain_endogenous(&self, keep: &BTreeSet<VarRef>) -> Scm {
        Scm {
            name: self.name.clone(),
            exogenous: self.exogenous.clone(),
            endogenous: self
                .endogenous
                .iter()
                .filter(|e| keep.contains(&e.var))
                .cloned()
                .collect(),
            interventions: self.interventions.filter_vars(|v| keep.contains(v)),
            inverse_pairs: self.inverse_pairs.clone(),
        }
    }

    /// Map from variable to equation.
    pub fn equations(&self) -> BTreeMap<VarRef, &Expr> {
        self.endogenous
            .iter()
            .map(|e| (e.var.clone(), &e.eq))
            .collect()
    }
}
