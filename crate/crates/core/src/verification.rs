// SPDX-License-Identifier: Apache-2.0

//! Checking that two models agree on their targets under every allowed
//! intervention.
//!
//! Cases are visited intervention set first, exogenous assignment second,
//! targets in variable order; the first disagreement is reported. A case
//! where the reference side fails to evaluate is skipped.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::consolidation::{eval_consolidated, ConsolidatedScm};
use crate::evaluation::{draw, eval_scm, Assignment};
use crate::expr::{value_to_json, Domain, Value, VarRef, EPS_VAL};
use crate::scm::for_each_assignment;
use crate::scm::{ExoDistribution, InterventionSet, InterventionSpace, Scm, MAX_JOINT_ENUMERATION};

/// Number of intervention sets drawn when a space is too large to list.
pub const SAMPLED_INTERVENTION_SETS: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceStrategy {
    pub mode: Mode,
    pub eps: f64,
    pub intervention_budget: usize,
    /// Fixed intervention sets to check instead of the whole space.
    pub schedule: Option<Vec<InterventionSet>>,
}

impl EquivalenceStrategy {
    pub fn exhaustive() -> Self {
        EquivalenceStrategy {
            mode: Mode::Exhaustive,
            eps: EPS_VAL,
            intervention_budget: 4096,
            schedule: None,
        }
    }

    pub fn sampled(count: usize, seed: u64) -> Self {
        EquivalenceStrategy {
            mode: Mode::Sampled { count, seed },
            ..Self::exhaustive()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterExample {
    pub u: Assignment,
    pub interventions: InterventionSet,
    pub variable: VarRef,
    pub expected: Value,
    /// The other side's value, or its evaluation error.
    pub actual: Result<Value, String>,
}

impl CounterExample {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "exogenous": self.u.iter().map(|(k, v)| (k.to_string(), value_to_json(v))).collect::<serde_json::Map<_, _>>(),
            "interventions": self.interventions.iter().map(|(k, v)| serde_json::json!({"variable": k.to_string(), "value": value_to_json(v)})).collect::<Vec<_>>(),
            "variable": self.variable.to_string(),
            "expected": value_to_json(&self.expected),
            "actual": match &self.actual {
                Ok(v) => value_to_json(v),
                Err(e) => serde_json::json!({"error": e}),
            },
        })
    }
}

impl std::fmt::Display for CounterExample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let u: Vec<String> = self.u.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(
            f,
            "u=[{}] I={} {}: expected {}, got ",
            u.join(", "),
            self.interventions,
            self.variable,
            self.expected
        )?;
        match &self.actual {
            Ok(v) => write!(f, "{v}"),
            Err(e) => write!(f, "error ({e})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Equal,
    CounterExample(Box<CounterExample>),
    Inconclusive(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub verdict: Verdict,
    pub interventions_checked: usize,
    pub cases_checked: u64,
    /// Cases where the reference failed to evaluate.
    pub skipped: u64,
    pub max_deviation: f64,
    /// Whether exogenous values were sampled rather than enumerated.
    pub sampled: bool,
}

impl EquivalenceReport {
    pub fn is_equal(&self) -> bool {
        self.verdict == Verdict::Equal
    }

    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Equal => 0,
            Verdict::CounterExample(_) => 1,
            Verdict::Inconclusive(_) => 2,
        }
    }

    pub fn verdict_name(&self) -> &'static str {
        match self.verdict {
            Verdict::Equal => "Equal",
            Verdict::CounterExample(_) => "CounterExample",
            Verdict::Inconclusive(_) => "Inconclusive",
        }
    }

    pub fn inconclusive(why: String) -> Self {
        EquivalenceReport {
            verdict: Verdict::Inconclusive(why),
            interventions_checked: 0,
            cases_checked: 0,
            skipped: 0,
            max_deviation: 0.0,
            sampled: false,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut j = serde_json::json!({
            "verdict": self.verdict_name(),
            "interventions_checked": self.interventions_checked,
            "cases_checked": self.cases_checked,
            "skipped": self.skipped,
            "max_deviation": self.max_deviation,
            "sampled": self.sampled,
        });
        match &self.verdict {
            Verdict::CounterExample(c) => j["counterexample"] = c.to_json(),
            Verdict::Inconclusive(why) => j["reason"] = serde_json::json!(why),
            Verdict::Equal => {}
        }
        j
    }
}

/// An input of the models being compared.
#[derive(Clone, Debug)]
pub struct InputSpec {
    pub var: VarRef,
    pub domain: Domain,
    pub dist: ExoDistribution,
}

enum Draws {
    Grid(Vec<(VarRef, Vec<Value>)>),
    List(Vec<Assignment>),
}

fn draws_for(inputs: &[InputSpec], mode: &Mode) -> Result<Draws, String> {
    match mode {
        Mode::Exhaustive => {
            let mut grid = vec![];
            let mut total: u128 = 1;
            for i in inputs {
                let support = i
                    .dist
                    .support()
                    .ok_or_else(|| format!("{} has infinite support", i.var))?;
                let vals: Vec<Value> = support
                    .into_iter()
                    .filter_map(|v| i.domain.coerce(v))
                    .collect();
                total = total.saturating_mul(vals.len() as u128);
                grid.push((i.var.clone(), vals));
            }
            if total > MAX_JOINT_ENUMERATION {
                return Err(format!(
                    "{total} exogenous assignments exceed the enumeration limit"
                ));
            }
            Ok(Draws::Grid(grid))
        }
        Mode::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(Draws::List(
                (0..*count)
                    .map(|_| {
                        inputs
                            .iter()
                            .map(|i| {
                                let v = draw(&i.dist, &mut rng);
                                (i.var.clone(), i.domain.coerce(v.clone()).unwrap_or(v))
                            })
                            .collect()
                    })
                    .collect(),
            ))
        }
    }
}

/// The intervention sets a strategy checks on `space`.
pub fn intervention_sets(
    space: &InterventionSpace,
    strategy: &EquivalenceStrategy,
) -> Result<Vec<InterventionSet>, String> {
    if let Some(s) = &strategy.schedule {
        return Ok(s.clone());
    }
    if let Some(all) = space.enumerate(strategy.intervention_budget) {
        return Ok(all);
    }
    match strategy.mode {
        Mode::Exhaustive => Err(format!(
            "intervention space exceeds the budget of {}",
            strategy.intervention_budget
        )),
        Mode::Sampled { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1417);
            let mut seen = BTreeSet::new();
            let mut out = vec![InterventionSet::new()];
            seen.insert(InterventionSet::new());
            for _ in 0..SAMPLED_INTERVENTION_SETS * 4 {
                if out.len() >= SAMPLED_INTERVENTION_SETS {
                    break;
                }
                let s = space.sample(&mut rng);
                if seen.insert(s.clone()) {
                    out.push(s);
                }
            }
            Ok(out)
        }
    }
}

pub type Side<'a> = dyn Fn(&Assignment, &InterventionSet) -> Result<Assignment, String> + 'a;

/// Compares `reference` against `other` on every (I, u) case.
pub fn compare(
    inputs: &[InputSpec],
    sets: &[InterventionSet],
    targets: &[VarRef],
    strategy: &EquivalenceStrategy,
    reference: &Side,
    other: &Side,
) -> EquivalenceReport {
    let draws = match draws_for(inputs, &strategy.mode) {
        Ok(d) => d,
        Err(why) => return EquivalenceReport::inconclusive(why),
    };
    let mut report = EquivalenceReport {
        verdict: Verdict::Equal,
        interventions_checked: 0,
        cases_checked: 0,
        skipped: 0,
        max_deviation: 0.0,
        sampled: matches!(draws, Draws::List(_)),
    };
    for i in sets {
        report.interventions_checked += 1;
        let mut check = |u: &Assignment| -> bool {
            report.cases_checked += 1;
            let Ok(want) = reference(u, i) else {
                report.skipped += 1;
                return true;
            };
            let got = other(u, i);
            for t in targets {
                let Some(w) = want.get(t) else { continue };
                let g = match &got {
                    Ok(vals) => vals
                        .get(t)
                        .cloned()
                        .ok_or_else(|| format!("{t} not computed")),
                    Err(e) => Err(e.clone()),
                };
                let ok = match &g {
                    Ok(g) => {
                        let (same, dev) = w.close_to(g, strategy.eps);
                        if let Some(d) = dev {
                            report.max_deviation = report.max_deviation.max(d);
                        }
                        same
                    }
                    Err(_) => false,
                };
                if !ok {
                    report.verdict = Verdict::CounterExample(Box::new(CounterExample {
                        u: u.clone(),
                        interventions: i.clone(),
                        variable: t.clone(),
                        expected: w.clone(),
                        actual: g,
                    }));
                    return false;
                }
            }
            true
        };
        let finished = match &draws {
            Draws::Grid(g) => {
                let mut all = true;
                for_each_assignment(g, &mut |u| {
                    all = check(u);
                    all
                });
                all
            }
            Draws::List(l) => l.iter().all(check),
        };
        if !finished {
            break;
        }
    }
    report
}

fn base_inputs(scm: &Scm) -> Vec<InputSpec> {
    scm.exogenous
        .iter()
        .map(|x| InputSpec {
            var: x.var.clone(),
            domain: x.domain.clone(),
            dist: x.dist.clone(),
        })
        .collect()
}

/// Endogenous values plus the exogenous inputs, so exogenous targets can be
/// compared as well.
fn with_inputs(u: &Assignment, mut vals: Assignment) -> Assignment {
    for (k, v) in u {
        vals.entry(k.clone()).or_insert_with(|| v.clone());
    }
    vals
}

/// Checks a consolidated model against its base on the consolidated
/// targets. Base intervention sets are mapped onto the consolidated space
/// by dropping atoms it no longer carries.
pub fn verify_equivalence(
    base: &Scm,
    cons: &ConsolidatedScm,
    strategy: &EquivalenceStrategy,
) -> EquivalenceReport {
    let sets = match intervention_sets(&base.interventions, strategy) {
        Ok(s) => s,
        Err(why) => return EquivalenceReport::inconclusive(why),
    };
    let targets: Vec<VarRef> = cons.targets.iter().cloned().collect();
    let reference = |u: &Assignment, i: &InterventionSet| {
        eval_scm(base, u, i)
            .map(|v| with_inputs(u, v))
            .map_err(|e| e.to_string())
    };
    let other = |u: &Assignment, i: &InterventionSet| {
        let mapped = i.filter(|v| cons.space.is_intervenable(v));
        eval_consolidated(cons, u, &mapped).map_err(|e| e.to_string())
    };
    compare(
        &base_inputs(base),
        &sets,
        &targets,
        strategy,
        &reference,
        &other,
    )
}

/// Checks two plain models against each other on `targets`, over the
/// first model's exogenous distributions and intervention space.
pub fn verify_models(
    reference: &Scm,
    other: &Scm,
    targets: &[VarRef],
    strategy: &EquivalenceStrategy,
) -> EquivalenceReport {
    let sets = match intervention_sets(&reference.interventions, strategy) {
        Ok(s) => s,
        Err(why) => return EquivalenceReport::inconclusive(why),
    };
    let r = |u: &Assignment, i: &InterventionSet| {
        eval_scm(reference, u, i)
            .map(|v| with_inputs(u, v))
            .map_err(|e| e.to_string())
    };
    let o = |u: &Assignment, i: &InterventionSet| {
        eval_scm(other, u, i)
            .map(|v| with_inputs(u, v))
            .map_err(|e| e.to_string())
    };
    compare(&base_inputs(reference), &sets, targets, strategy, &r, &o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::scm::Atom;

    fn pair(flip: bool) -> (Scm, Scm) {
        let mut a = Scm::new("a");
        a.add_exogenous(
            VarRef::scalar("U"),
            Domain::FiniteInt { lo: 0, hi: 3 },
            ExoDistribution::UniformFinite((0..4).map(Value::Int).collect()),
        );
        a.add_endogenous(
            VarRef::scalar("X"),
            Domain::FiniteInt { lo: 0, hi: 6 },
            Expr::add(Expr::var("U"), Expr::int(1)),
        );
        a.add_endogenous(
            VarRef::scalar("Y"),
            Domain::FiniteInt { lo: 0, hi: 12 },
            Expr::mul(Expr::var("X"), Expr::int(2)),
        );
        a.interventions =
            InterventionSpace::PowerSet(vec![Atom::new(VarRef::scalar("X"), vec![Value::Int(0)])]);
        let mut b = a.clone();
        if flip {
            // agrees with a except under do(X=0) when U = 2
            b.endogenous[1].eq = Expr::ite(
                Expr::and(
                    Expr::IsIntervened(VarRef::scalar("X")),
                    Expr::eq(Expr::var("U"), Expr::int(2)),
                ),
                Expr::int(1),
                Expr::mul(Expr::var("X"), Expr::int(2)),
            );
        }
        (a, b)
    }

    #[test]
    fn identical_models_are_equal_exhaustively() {
        let (a, b) = pair(false);
        let r = verify_models(
            &a,
            &b,
            &[VarRef::scalar("Y")],
            &EquivalenceStrategy::exhaustive(),
        );
        assert!(r.is_equal());
        assert_eq!(r.cases_checked, 8);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn first_counterexample_is_reported() {
        let (a, b) = pair(true);
        let r = verify_models(
            &a,
            &b,
            &[VarRef::scalar("Y")],
            &EquivalenceStrategy::exhaustive(),
        );
        let Verdict::CounterExample(c) = &r.verdict else {
            panic!("expected a counterexample")
        };
        assert_eq!(c.u[&VarRef::scalar("U")], Value::Int(2));
        assert_eq!(c.interventions.len(), 1);
        assert_eq!(c.expected, Value::Int(0));
        assert_eq!(c.actual, Ok(Value::Int(1)));
        assert_eq!(r.exit_code(), 1);
        // I = {} checks 4 cases, then U = 0, 1, 2 under do(X=0)
        assert_eq!(r.cases_checked, 7);
    }

    #[test]
    fn infinite_support_is_inconclusive_exhaustively() {
        let (mut a, _) = pair(false);
        a.exogenous[0].domain = Domain::real();
        a.exogenous[0].dist = ExoDistribution::Normal {
            mean: 0.0,
            variance: 1.0,
        };
        a.endogenous[0].domain = Domain::real();
        a.endogenous[1].domain = Domain::real();
        let r = verify_models(
            &a,
            &a,
            &[VarRef::scalar("Y")],
            &EquivalenceStrategy::exhaustive(),
        );
        assert_eq!(r.exit_code(), 2);
        let s = verify_models(
            &a,
            &a,
            &[VarRef::scalar("Y")],
            &EquivalenceStrategy::sampled(50, 3),
        );
        assert!(s.is_equal());
        assert!(s.sampled);
    }
}
