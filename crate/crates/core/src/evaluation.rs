// SPDX-License-Identifier: Apache-2.0

//! Evaluation of models, partitioned models and exogenous sampling.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::expr::{eval_expr, eval_expr_with_rng, EvalError, Expr, Value, VarRef};
use crate::partition::{extract_sub_scm, order_clusters, Partition, PartitionError, SubScm};
use crate::scm::{Endogenous, ExoDistribution, InterventionSet, InterventionSpace, Scm};

/// Values for a set of variables.
pub type Assignment = BTreeMap<VarRef, Value>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalScmError {
    #[error("intervention set {0} is not allowed")]
    InterventionNotAllowed(InterventionSet),
    #[error("no value bound for exogenous {0}")]
    MissingExogenous(VarRef),
    #[error("{var}: {source}")]
    Equation { var: VarRef, source: EvalError },
    #[error("{var} = {value} is outside its domain")]
    OutOfDomain { var: VarRef, value: Value },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("model contains random draws; reparameterize it first")]
    NonDeterministicModel,
}

/// The generator behind every seeded stream in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_allowed(space: &InterventionSpace, i: &InterventionSet) -> Result<(), EvalScmError> {
    if space.contains(i) {
        Ok(())
    } else {
        Err(EvalScmError::InterventionNotAllowed(i.clone()))
    }
}

/// Exogenous values coerced into their domains.
fn bind_exogenous(scm: &Scm, u: &Assignment) -> Result<Assignment, EvalScmError> {
    let mut env = Assignment::new();
    for x in &scm.exogenous {
        let v = u
            .get(&x.var)
            .ok_or_else(|| EvalScmError::MissingExogenous(x.var.clone()))?;
        let v = x
            .domain
            .coerce(v.clone())
            .ok_or_else(|| EvalScmError::OutOfDomain {
                var: x.var.clone(),
                value: v.clone(),
            })?;
        env.insert(x.var.clone(), v);
    }
    Ok(env)
}

/// Evaluates `equations` in order on top of `env`, honouring `i`. Values
/// land in `env`.
fn run_equations(
    equations: &[Endogenous],
    env: &mut Assignment,
    i: &InterventionSet,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<(), EvalScmError> {
    for e in equations {
        let raw = match i.get(&e.var) {
            Some(v) => v.clone(),
            None => {
                let r = match rng.as_deref_mut() {
                    Some(rng) => eval_expr_with_rng(&e.eq, &*env, i, rng),
                    None => eval_expr(&e.eq, &*env, i),
                };
                r.map_err(|source| match source {
                    EvalError::NonDeterministic => EvalScmError::NonDeterministicModel,
                    source => EvalScmError::Equation {
                        var: e.var.clone(),
                        source,
                    },
                })?
            }
        };
        let v = e
            .domain
            .coerce(raw.clone())
            .ok_or_else(|| EvalScmError::OutOfDomain {
                var: e.var.clone(),
                value: raw,
            })?;
        env.insert(e.var.clone(), v);
    }
    Ok(())
}

fn endogenous_only(scm: &Scm, env: Assignment) -> Assignment {
    env.into_iter()
        .filter(|(k, _)| scm.is_endogenous(k))
        .collect()
}

/// Evaluates every endogenous variable under `i`.
pub fn eval_scm(
    scm: &Scm,
    u: &Assignment,
    i: &InterventionSet,
) -> Result<Assignment, EvalScmError> {
    check_allowed(&scm.interventions, i)?;
    let mut env = bind_exogenous(scm, u)?;
    run_equations(&scm.endogenous, &mut env, i, None)?;
    Ok(endogenous_only(scm, env))
}

/// As [`eval_scm`], drawing any random equations from `rng`.
pub fn eval_scm_with_rng(
    scm: &Scm,
    u: &Assignment,
    i: &InterventionSet,
    rng: &mut dyn RngCore,
) -> Result<Assignment, EvalScmError> {
    check_allowed(&scm.interventions, i)?;
    let mut env = bind_exogenous(scm, u)?;
    run_equations(&scm.endogenous, &mut env, i, Some(rng))?;
    Ok(endogenous_only(scm, env))
}

/// Evaluates one sub-model. `inputs` must bind its local exogenous
/// variables; `i` is restricted to the cluster first.
pub fn eval_sub_scm(
    sub: &SubScm,
    inputs: &Assignment,
    i: &InterventionSet,
) -> Result<Assignment, EvalScmError> {
    let local_i = i.restrict(&sub.cluster);
    let mut env = Assignment::new();
    for x in &sub.inputs {
        let v = inputs
            .get(&x.var)
            .ok_or_else(|| EvalScmError::MissingExogenous(x.var.clone()))?;
        env.insert(x.var.clone(), v.clone());
    }
    run_equations(&sub.equations, &mut env, &local_i, None)?;
    Ok(env
        .into_iter()
        .filter(|(k, _)| sub.cluster.contains(k))
        .collect())
}

/// Evaluates cluster by cluster in quotient order.
pub fn eval_partitioned(
    scm: &Scm,
    partition: &Partition,
    u: &Assignment,
    i: &InterventionSet,
) -> Result<Assignment, EvalScmError> {
    check_allowed(&scm.interventions, i)?;
    let order = order_clusters(scm, partition)?;
    let mut env = bind_exogenous(scm, u)?;
    for c in order {
        let sub = extract_sub_scm(scm, &partition.clusters[c])?;
        let local_u: Assignment = sub
            .inputs
            .iter()
            .filter_map(|x| env.get(&x.var).map(|v| (x.var.clone(), v.clone())))
            .collect();
        let values = eval_sub_scm(&sub, &local_u, i)?;
        env.extend(values);
    }
    Ok(endogenous_only(scm, env))
}

/// Draws one value from a distribution.
pub fn draw(dist: &ExoDistribution, rng: &mut dyn RngCore) -> Value {
    match dist {
        ExoDistribution::PointMass(v) => v.clone(),
        ExoDistribution::UniformFinite(vs) => vs[rng.gen_range(0..vs.len())].clone(),
        ExoDistribution::Normal { mean, variance } => {
            let n = Normal::new(*mean, variance.sqrt()).expect("checked normal parameters");
            Value::Real(n.sample(rng))
        }
        ExoDistribution::UniformReal { lo, hi } => {
            if lo == hi {
                Value::Real(*lo)
            } else {
                Value::Real(rng.gen_range(*lo..=*hi))
            }
        }
        ExoDistribution::Bernoulli(p) => Value::Bool(rng.gen_bool(*p)),
    }
}

/// `count` independent joint draws of the exogenous variables, reproducible
/// from `seed`. With `strict`, models whose equations still contain random
/// draws are rejected.
pub fn sample_exogenous(
    scm: &Scm,
    seed: u64,
    count: usize,
    strict: bool,
) -> Result<Vec<Assignment>, EvalScmError> {
    if strict && scm.is_stochastic() {
        return Err(EvalScmError::NonDeterministicModel);
    }
    let mut rng = seeded_rng(seed);
    Ok((0..count)
        .map(|_| {
            scm.exogenous
                .iter()
                .map(|x| (x.var.clone(), draw(&x.dist, &mut rng)))
                .collect()
        })
        .collect())
}

/// Evaluates a free-standing expression on an assignment.
pub fn eval_on(expr: &Expr, env: &Assignment, i: &InterventionSet) -> Result<Value, EvalError> {
    eval_expr(expr, env, i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Domain;

    fn coin() -> Scm {
        let mut m = Scm::new("coin");
        m.add_exogenous(
            VarRef::scalar("U"),
            Domain::Boolean,
            ExoDistribution::UniformFinite(vec![Value::Bool(false), Value::Bool(true)]),
        );
        m.add_exogenous(
            VarRef::scalar("N"),
            Domain::real(),
            ExoDistribution::Normal {
                mean: 0.5,
                variance: 0.0025,
            },
        );
        m.add_exogenous(
            VarRef::scalar("P"),
            Domain::real(),
            ExoDistribution::PointMass(Value::Real(0.5)),
        );
        m
    }

    #[test]
    fn point_mass_and_determinism() {
        let m = coin();
        let a = sample_exogenous(&m, 7, 3, true).unwrap();
        for d in &a {
            assert_eq!(d[&VarRef::scalar("P")], Value::Real(0.5));
        }
        assert_eq!(a, sample_exogenous(&m, 7, 3, true).unwrap());
    }

    #[test]
    fn uniform_finite_mean_concentrates() {
        let draws = sample_exogenous(&coin(), 11, 10_000, true).unwrap();
        let ones = draws
            .iter()
            .filter(|d| d[&VarRef::scalar("U")] == Value::Bool(true))
            .count();
        let mean = ones as f64 / 10_000.0;
        // Hoeffding: P(|mean - 0.5| > 0.02) <= 2 exp(-2 n 0.02^2) ~ 7e-4
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn intervention_overwrites_and_space_is_enforced() {
        let mut m = coin();
        m.add_endogenous(VarRef::scalar("X"), Domain::Boolean, Expr::var("U"));
        let u: Assignment = [
            (VarRef::scalar("U"), Value::Bool(true)),
            (VarRef::scalar("N"), Value::Real(0.0)),
            (VarRef::scalar("P"), Value::Real(0.5)),
        ]
        .into_iter()
        .collect();
        let i = InterventionSet::single(VarRef::scalar("X"), Value::Bool(false));
        assert!(matches!(
            eval_scm(&m, &u, &i),
            Err(EvalScmError::InterventionNotAllowed(_))
        ));
        m.interventions = InterventionSpace::PowerSet(vec![crate::scm::Atom::new(
            VarRef::scalar("X"),
            vec![Value::Bool(false)],
        )]);
        assert_eq!(
            eval_scm(&m, &u, &i).unwrap()[&VarRef::scalar("X")],
            Value::Bool(false)
        );
        let mut short = u.clone();
        short.remove(&VarRef::scalar("N"));
        assert!(matches!(
            eval_scm(&m, &short, &InterventionSet::new()),
            Err(EvalScmError::MissingExogenous(_))
        ));
    }

    #[test]
    fn strict_sampling_rejects_random_equations() {
        let mut m = coin();
        m.add_endogenous(
            VarRef::scalar("B"),
            Domain::Boolean,
            Expr::Bernoulli(Box::new(Expr::var("P"))),
        );
        assert_eq!(
            sample_exogenous(&m, 1, 1, true),
            Err(EvalScmError::NonDeterministicModel)
        );
        assert!(sample_exogenous(&m, 1, 1, false).is_ok());
    }
}
