// SPDX-License-Identifier: Apache-2.0

//! Consolidation: replacing a cluster of structural equations by one
//! compressed causal mechanism per required variable.

pub mod image;
pub mod passes;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use thiserror::Error;

use crate::evaluation::{eval_sub_scm, Assignment, EvalScmError};
use crate::expr::{eval_expr, eval_expr_with_rng, Domain, EvalError, Expr, Value, VarRef};
use crate::partition::{
    boundary_distribution, check_partition, extract_sub_scm, order_clusters, InputSource,
    Partition, PartitionError, PartitionReport, SubScm,
};
use crate::scm::for_each_assignment;
use crate::scm::{Exogenous, InterventionSet, InterventionSpace, InversePair, Scm};
use crate::verification::{
    compare, intervention_sets, verify_equivalence, CounterExample, EquivalenceReport,
    EquivalenceStrategy, InputSpec, Mode, Verdict,
};

pub use image::Image;
pub use passes::{apply_pass, PassEnv, PassKind};
pub use report::{ClusterReport, CompressionReport, GuardReport, ImageBound, PassLogEntry};

/// Enumeration limit for the image analysis in the report.
const MAX_REPORT_ENUMERATION: u128 = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsolidationError {
    #[error("invalid partition: {}", describe(.0))]
    InvalidPartition(PartitionReport),
    #[error("invalid target {0}")]
    InvalidTarget(String),
    #[error("cluster {cluster}: passes still changing after {rounds} rounds")]
    PassBudgetExceeded { cluster: usize, rounds: usize },
    #[error("not equivalent: {0}")]
    EquivalenceFailed(Box<CounterExample>),
    #[error("equivalence could not be decided: {0}")]
    EquivalenceInconclusive(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Eval(#[from] EvalScmError),
}

fn describe(r: &PartitionReport) -> String {
    r.issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Which rewrites run and how each is checked.
#[derive(Clone, Debug, PartialEq)]
pub struct PassConfig {
    pub passes: Vec<PassKind>,
    pub max_rounds: usize,
    /// Gate every pass application on an equivalence check.
    pub verify: bool,
    /// Draws used when a pass cannot be checked exhaustively.
    pub samples: usize,
    pub seed: u64,
    pub intervention_budget: usize,
}

impl Default for PassConfig {
    fn default() -> Self {
        PassConfig {
            passes: PassKind::ALL.to_vec(),
            max_rounds: 100,
            verify: true,
            samples: 500,
            seed: 0,
            intervention_budget: 4096,
        }
    }
}

/// The compressed mechanism of one required variable.
#[derive(Clone, Debug, PartialEq)]
pub struct CcvTarget {
    pub var: VarRef,
    pub domain: Domain,
    pub rho: Expr,
}

/// A consolidated cluster: one mechanism per required variable, reading
/// only the cluster's inputs and interventions on the cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Ccv {
    /// Index of the originating cluster in the partition.
    pub cluster_id: usize,
    pub cluster: BTreeSet<VarRef>,
    pub targets: Vec<CcvTarget>,
    pub local_exogenous: Vec<VarRef>,
    /// Interventions the mechanisms can observe.
    pub space: InterventionSpace,
}

impl Ccv {
    pub fn node_count(&self) -> usize {
        self.targets.iter().map(|t| t.rho.node_count()).sum()
    }

    pub fn rho(&self, var: &VarRef) -> Option<&Expr> {
        self.targets.iter().find(|t| &t.var == var).map(|t| &t.rho)
    }

    pub fn target_vars(&self) -> Vec<VarRef> {
        self.targets.iter().map(|t| t.var.clone()).collect()
    }

    fn map_rho(&self, mut f: impl FnMut(&Expr) -> Expr) -> Ccv {
        let mut out = self.clone();
        for t in &mut out.targets {
            t.rho = f(&t.rho);
        }
        out
    }

    pub fn eval(
        &self,
        inputs: &Assignment,
        i: &InterventionSet,
    ) -> Result<Assignment, EvalScmError> {
        self.eval_inner(inputs, i, None)
    }

    pub fn eval_with_rng(
        &self,
        inputs: &Assignment,
        i: &InterventionSet,
        rng: &mut dyn RngCore,
    ) -> Result<Assignment, EvalScmError> {
        self.eval_inner(inputs, i, Some(rng))
    }

    fn eval_inner(
        &self,
        inputs: &Assignment,
        i: &InterventionSet,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<Assignment, EvalScmError> {
        let local = i.filter(|v| self.cluster.contains(v) && self.space.is_intervenable(v));
        let mut out = Assignment::new();
        for t in &self.targets {
            let r = match rng.as_deref_mut() {
                Some(rng) => eval_expr_with_rng(&t.rho, inputs, &local, rng),
                None => eval_expr(&t.rho, inputs, &local),
            };
            let raw = r.map_err(|source| match source {
                EvalError::NonDeterministic => EvalScmError::NonDeterministicModel,
                EvalError::UnboundRef(v) if !inputs.contains_key(&v) => {
                    EvalScmError::MissingExogenous(v)
                }
                source => EvalScmError::Equation {
                    var: t.var.clone(),
                    source,
                },
            })?;
            let v = t
                .domain
                .coerce(raw.clone())
                .ok_or_else(|| EvalScmError::OutOfDomain {
                    var: t.var.clone(),
                    value: raw,
                })?;
            out.insert(t.var.clone(), v);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Component {
    Ccv(Ccv),
    /// A cluster kept as ordinary equations.
    Passthrough {
        cluster_id: usize,
        sub: SubScm,
    },
}

/// A base model with some clusters consolidated.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsolidatedScm {
    pub name: String,
    pub exogenous: Vec<Exogenous>,
    /// Components in evaluation order.
    pub components: Vec<Component>,
    pub targets: BTreeSet<VarRef>,
    pub space: InterventionSpace,
    pub inverse_pairs: Vec<InversePair>,
    pub report: CompressionReport,
}

impl ConsolidatedScm {
    /// A whole model replaced by a single mechanism, used for closed forms.
    pub fn from_ccv(base: &Scm, ccv: Ccv) -> Self {
        ConsolidatedScm {
            name: base.name.clone(),
            exogenous: base.exogenous.clone(),
            targets: ccv.target_vars().into_iter().collect(),
            space: base.interventions.clone(),
            inverse_pairs: base.inverse_pairs.clone(),
            components: vec![Component::Ccv(ccv)],
            report: CompressionReport::default(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.components
            .iter()
            .map(|c| match c {
                Component::Ccv(c) => c.node_count(),
                Component::Passthrough { sub, .. } => {
                    sub.equations.iter().map(|e| e.eq.node_count()).sum()
                }
            })
            .sum()
    }

    pub fn ccvs(&self) -> impl Iterator<Item = &Ccv> {
        self.components.iter().filter_map(|c| match c {
            Component::Ccv(c) => Some(c),
            _ => None,
        })
    }

    pub fn ccv_for(&self, var: &VarRef) -> Option<&Ccv> {
        self.ccvs().find(|c| c.rho(var).is_some())
    }

    /// Domain of any variable the model computes or reads.
    pub fn domain(&self, var: &VarRef) -> Option<&Domain> {
        if let Some(x) = self.exogenous.iter().find(|x| &x.var == var) {
            return Some(&x.domain);
        }
        self.components.iter().find_map(|c| match c {
            Component::Ccv(c) => c.targets.iter().find(|t| &t.var == var).map(|t| &t.domain),
            Component::Passthrough { sub, .. } => sub
                .equations
                .iter()
                .find(|e| &e.var == var)
                .map(|e| &e.domain),
        })
    }
}

pub fn eval_consolidated(
    cons: &ConsolidatedScm,
    u: &Assignment,
    i: &InterventionSet,
) -> Result<Assignment, EvalScmError> {
    eval_consolidated_inner(cons, u, i, None)
}

pub fn eval_consolidated_with_rng(
    cons: &ConsolidatedScm,
    u: &Assignment,
    i: &InterventionSet,
    rng: &mut dyn RngCore,
) -> Result<Assignment, EvalScmError> {
    eval_consolidated_inner(cons, u, i, Some(rng))
}

fn eval_consolidated_inner(
    cons: &ConsolidatedScm,
    u: &Assignment,
    i: &InterventionSet,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<Assignment, EvalScmError> {
    if !cons.space.contains(i) {
        return Err(EvalScmError::InterventionNotAllowed(i.clone()));
    }
    let mut env = Assignment::new();
    for x in &cons.exogenous {
        let v = u
            .get(&x.var)
            .ok_or_else(|| EvalScmError::MissingExogenous(x.var.clone()))?;
        let c = x
            .domain
            .coerce(v.clone())
            .ok_or_else(|| EvalScmError::OutOfDomain {
                var: x.var.clone(),
                value: v.clone(),
            })?;
        env.insert(x.var.clone(), c);
    }
    for comp in &cons.components {
        let vals = match comp {
            Component::Ccv(c) => match rng.as_deref_mut() {
                Some(rng) => c.eval_with_rng(&env, i, rng)?,
                None => c.eval(&env, i)?,
            },
            Component::Passthrough { sub, .. } => eval_sub_scm(sub, &env, i)?,
        };
        env.extend(vals);
    }
    Ok(cons
        .targets
        .iter()
        .filter_map(|t| env.get(t).map(|v| (t.clone(), v.clone())))
        .collect())
}

/// Variables of `cluster` that something outside it needs: targets in the
/// cluster and cluster variables read by equations elsewhere.
pub fn compute_required_set(
    scm: &Scm,
    cluster: &BTreeSet<VarRef>,
    targets: &BTreeSet<VarRef>,
) -> BTreeSet<VarRef> {
    let mut out: BTreeSet<VarRef> = cluster.intersection(targets).cloned().collect();
    for e in &scm.endogenous {
        if cluster.contains(&e.var) {
            continue;
        }
        out.extend(e.eq.free_refs().into_iter().filter(|r| cluster.contains(r)));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruneOutcome {
    pub scm: Scm,
    /// Removed endogenous variables in declaration order.
    pub removed: Vec<VarRef>,
    pub dropped_atoms: Vec<(VarRef, Value)>,
}

/// Removes, repeatedly, endogenous variables outside `keep` that no other
/// equation reads, then drops intervention atoms on variables that are
/// neither kept nor ancestors of kept ones.
pub fn prune_childless(scm: &Scm, keep: &BTreeSet<VarRef>) -> PruneOutcome {
    let mut alive: BTreeSet<VarRef> = scm.endogenous_vars().into_iter().collect();
    loop {
        let read: BTreeSet<VarRef> = scm
            .endogenous
            .iter()
            .filter(|e| alive.contains(&e.var))
            .flat_map(|e| e.eq.free_refs())
            .collect();
        let dead: Vec<VarRef> = alive
            .iter()
            .filter(|v| !keep.contains(*v) && !read.contains(*v))
            .cloned()
            .collect();
        if dead.is_empty() {
            break;
        }
        for v in dead {
            alive.remove(&v);
        }
    }
    let mut relevant: BTreeSet<VarRef> = keep.intersection(&alive).cloned().collect();
    let eqs = scm.equations();
    let mut stack: Vec<VarRef> = relevant.iter().cloned().collect();
    while let Some(v) = stack.pop() {
        if let Some(eq) = eqs.get(&v) {
            for r in eq.free_refs() {
                if alive.contains(&r) && relevant.insert(r.clone()) {
                    stack.push(r);
                }
            }
        }
    }
    let mut out = scm.retain_endogenous(&alive);
    out.interventions = out.interventions.filter_vars(|v| relevant.contains(v));
    let kept: BTreeSet<(VarRef, Value)> = out.interventions.atoms().into_iter().collect();
    PruneOutcome {
        removed: scm
            .endogenous_vars()
            .into_iter()
            .filter(|v| !alive.contains(v))
            .collect(),
        dropped_atoms: scm
            .interventions
            .atoms()
            .into_iter()
            .filter(|a| !kept.contains(a))
            .collect(),
        scm: out,
    }
}

/// Inlines the cluster equations into one mechanism per required variable.
/// Every intervenable variable on the way is wrapped so that an active
/// intervention overrides its value.
pub fn build_rho(sub: &SubScm, required: &BTreeSet<VarRef>, cluster_id: usize) -> Ccv {
    let mut needed = required.clone();
    for e in sub.equations.iter().rev() {
        if needed.contains(&e.var) {
            needed.extend(
                e.eq.free_refs()
                    .into_iter()
                    .filter(|r| sub.cluster.contains(r)),
            );
        }
    }
    let mut inlined: BTreeMap<VarRef, Expr> = BTreeMap::new();
    for e in &sub.equations {
        if !needed.contains(&e.var) {
            continue;
        }
        let mut body = e.eq.substitute(&inlined);
        if sub.space.is_intervenable(&e.var) {
            body = Expr::intervention_value(e.var.clone(), body);
        }
        inlined.insert(e.var.clone(), body);
    }
    let targets: Vec<CcvTarget> = sub
        .equations
        .iter()
        .filter(|e| required.contains(&e.var))
        .map(|e| CcvTarget {
            var: e.var.clone(),
            domain: e.domain.clone(),
            rho: inlined[&e.var].clone(),
        })
        .collect();
    let mut ccv = Ccv {
        cluster_id,
        cluster: sub.cluster.clone(),
        targets,
        local_exogenous: vec![],
        space: sub.space.filter_vars(|v| needed.contains(v)),
    };
    refresh_inputs(&mut ccv, sub);
    ccv
}

/// Local exogenous variables are the sub-model inputs the mechanisms read.
fn refresh_inputs(ccv: &mut Ccv, sub: &SubScm) {
    let refs: BTreeSet<VarRef> = ccv.targets.iter().flat_map(|t| t.rho.free_refs()).collect();
    ccv.local_exogenous = sub
        .inputs
        .iter()
        .map(|i| i.var.clone())
        .filter(|v| refs.contains(v))
        .collect();
}

fn input_image(i: &crate::partition::LocalInput) -> Image {
    match &i.source {
        InputSource::Exogenous(d) => Image::of_distribution(d, &i.domain),
        InputSource::Boundary => Image::of_domain(&i.domain),
    }
}

fn input_specs(sub: &SubScm) -> Vec<InputSpec> {
    sub.inputs
        .iter()
        .map(|i| InputSpec {
            var: i.var.clone(),
            domain: i.domain.clone(),
            dist: match &i.source {
                InputSource::Exogenous(d) => d.clone(),
                InputSource::Boundary => boundary_distribution(&i.domain),
            },
        })
        .collect()
}

/// Checks that two versions of a cluster's mechanisms agree over the
/// cluster's inputs and its local interventions. Falls back to sampling
/// when the inputs cannot be enumerated.
pub fn verify_pass(
    before: &Ccv,
    after: &Ccv,
    sub: &SubScm,
    config: &PassConfig,
) -> EquivalenceReport {
    let inputs = input_specs(sub);
    let targets = before.target_vars();
    let reference =
        |u: &Assignment, i: &InterventionSet| before.eval(u, i).map_err(|e| e.to_string());
    let other = |u: &Assignment, i: &InterventionSet| after.eval(u, i).map_err(|e| e.to_string());
    let exhaustive = EquivalenceStrategy {
        intervention_budget: config.intervention_budget,
        ..EquivalenceStrategy::exhaustive()
    };
    let sampled = EquivalenceStrategy {
        mode: Mode::Sampled {
            count: config.samples,
            seed: config.seed,
        },
        ..exhaustive.clone()
    };
    // Inputs and intervention sets fall back to sampling independently.
    let (sets, sets_sampled) = match intervention_sets(&before.space, &exhaustive) {
        Ok(sets) => (sets, false),
        Err(_) => match intervention_sets(&before.space, &sampled) {
            Ok(sets) => (sets, true),
            Err(why) => return EquivalenceReport::inconclusive(why),
        },
    };
    let mut r = compare(&inputs, &sets, &targets, &exhaustive, &reference, &other);
    if matches!(r.verdict, Verdict::Inconclusive(_)) {
        r = compare(&inputs, &sets, &targets, &sampled, &reference, &other);
    }
    r.sampled |= sets_sampled;
    r
}

/// Applies the configured passes round by round until none changes the
/// mechanisms. An application is kept only if it does not grow the
/// mechanisms and, when checking is on, is verified equal.
pub fn run_passes(
    ccv: &Ccv,
    sub: &SubScm,
    inverse_pairs: &[InversePair],
    config: &PassConfig,
) -> Result<(Ccv, Vec<PassLogEntry>), ConsolidationError> {
    // Rewrites like x & x -> x are unsound once x draws its own noise.
    if ccv.targets.iter().any(|t| t.rho.is_stochastic()) {
        return Ok((ccv.clone(), vec![]));
    }
    let inputs: BTreeMap<VarRef, Image> = sub
        .inputs
        .iter()
        .map(|i| (i.var.clone(), input_image(i)))
        .collect();
    let mut cur = ccv.clone();
    let mut log = vec![];
    for round in 1..=config.max_rounds {
        let mut changed = false;
        for &kind in &config.passes {
            let space = cur.space.clone();
            let env = PassEnv {
                inputs: inputs.clone(),
                space: &space,
                inverse_pairs,
            };
            let mut cand = cur.map_rho(|e| apply_pass(kind, e, &env));
            if cand == cur {
                continue;
            }
            refresh_inputs(&mut cand, sub);
            let (nb, na) = (cur.node_count(), cand.node_count());
            let verdict = if na > nb {
                "Rejected".to_string()
            } else if config.verify {
                verify_pass(&cur, &cand, sub, config)
                    .verdict_name()
                    .to_string()
            } else {
                "Unchecked".to_string()
            };
            let accepted = na <= nb && (verdict == "Equal" || verdict == "Unchecked");
            log.push(PassLogEntry {
                round,
                pass: kind.name().to_string(),
                nodes_before: nb,
                nodes_after: na,
                verdict,
                accepted,
            });
            if accepted {
                cur = cand;
                changed = true;
            }
        }
        if !changed {
            return Ok((cur, log));
        }
    }
    Err(ConsolidationError::PassBudgetExceeded {
        cluster: ccv.cluster_id,
        rounds: config.max_rounds,
    })
}

fn clamp_u64(x: u128) -> u64 {
    x.min(u64::MAX as u128) as u64
}

/// Image bounds and unreachable guards of the cluster at I = {}.
fn analyze_cluster(sub: &SubScm) -> (Vec<ImageBound>, Vec<GuardReport>) {
    let mut value_sets: BTreeMap<VarRef, Option<BTreeSet<Value>>> = BTreeMap::new();
    let mut grid = vec![];
    let mut total: u128 = 1;
    let mut finite = true;
    for i in &sub.inputs {
        let set = input_image(i).finite().cloned();
        match &set {
            Some(s) => {
                total = total.saturating_mul(s.len() as u128);
                grid.push((i.var.clone(), s.iter().cloned().collect::<Vec<_>>()));
            }
            None => finite = false,
        }
        value_sets.insert(i.var.clone(), set);
    }
    let mut effective: BTreeMap<VarRef, BTreeSet<Value>> = BTreeMap::new();
    let exact = finite && total <= MAX_REPORT_ENUMERATION;
    if exact {
        let none = InterventionSet::new();
        let mut ok = true;
        for_each_assignment(&grid, &mut |u| match eval_sub_scm(sub, u, &none) {
            Ok(vals) => {
                for (k, v) in vals {
                    effective.entry(k).or_default().insert(v);
                }
                true
            }
            Err(_) => {
                ok = false;
                false
            }
        });
        if !ok {
            effective.clear();
        }
    }
    for e in &sub.equations {
        value_sets.insert(e.var.clone(), effective.get(&e.var).cloned());
    }

    let mut bounds = vec![];
    let mut guards = vec![];
    for e in &sub.equations {
        let parents = e.eq.free_refs();
        let domain_size = e.domain.size().map(clamp_u64);
        let function_image =
            image_over(&e.eq, &parents, |p| sub.domain(p).and_then(Domain::values))
                .map(|s| s.len() as u64);
        let mut parent_bound: Option<u128> = Some(1);
        for p in &parents {
            parent_bound = match (parent_bound, value_sets.get(p).cloned().flatten()) {
                (Some(b), Some(s)) => Some(b.saturating_mul(s.len() as u128)),
                _ => None,
            };
        }
        let effective_image = effective.get(&e.var).map(|s| s.len() as u64);
        let bound = [domain_size, function_image, parent_bound.map(clamp_u64)]
            .into_iter()
            .flatten()
            .min();
        bounds.push(ImageBound {
            variable: e.var.to_string(),
            domain_size,
            function_image,
            parent_bound: parent_bound.map(clamp_u64),
            effective_image,
            bound,
        });
        if let Expr::Case(arms, _) = &e.eq {
            let sets = |p: &VarRef| {
                value_sets
                    .get(p)
                    .cloned()
                    .flatten()
                    .map(|s| s.into_iter().collect())
            };
            if let Some(fired) = arms_fired(arms, &parents, sets) {
                guards.push(GuardReport {
                    variable: e.var.to_string(),
                    guards: arms.len() + 1,
                    unreachable: fired.iter().filter(|f| !**f).count(),
                });
            }
        }
    }
    (bounds, guards)
}

fn grid_of(
    parents: &BTreeSet<VarRef>,
    values: impl Fn(&VarRef) -> Option<Vec<Value>>,
) -> Option<Vec<(VarRef, Vec<Value>)>> {
    let mut grid = vec![];
    let mut total: u128 = 1;
    for p in parents {
        let vs = values(p)?;
        total = total.saturating_mul(vs.len() as u128);
        grid.push((p.clone(), vs));
    }
    (total <= MAX_REPORT_ENUMERATION).then_some(grid)
}

fn image_over(
    e: &Expr,
    parents: &BTreeSet<VarRef>,
    values: impl Fn(&VarRef) -> Option<Vec<Value>>,
) -> Option<BTreeSet<Value>> {
    let grid = grid_of(parents, values)?;
    let none = InterventionSet::new();
    let mut out = BTreeSet::new();
    let mut ok = true;
    for_each_assignment(&grid, &mut |env| match eval_expr(e, env, &none) {
        Ok(v) => {
            out.insert(v);
            true
        }
        Err(_) => {
            ok = false;
            false
        }
    });
    ok.then_some(out)
}

/// For each arm and the default, whether some parent assignment selects it.
fn arms_fired(
    arms: &[(Expr, Expr)],
    parents: &BTreeSet<VarRef>,
    values: impl Fn(&VarRef) -> Option<Vec<Value>>,
) -> Option<Vec<bool>> {
    let grid = grid_of(parents, values)?;
    let none = InterventionSet::new();
    let mut fired = vec![false; arms.len() + 1];
    let mut ok = true;
    for_each_assignment(&grid, &mut |env| {
        for (k, (g, _)) in arms.iter().enumerate() {
            match eval_expr(g, env, &none) {
                Ok(Value::Bool(true)) => {
                    fired[k] = true;
                    return true;
                }
                Ok(Value::Bool(false)) => {}
                _ => {
                    ok = false;
                    return false;
                }
            }
        }
        fired[arms.len()] = true;
        true
    });
    ok.then_some(fired)
}

/// Consolidates the selected clusters of `partition` (all when `selected`
/// is `None`) with respect to `targets`.
pub fn consolidate(
    scm: &Scm,
    partition: &Partition,
    targets: &BTreeSet<VarRef>,
    selected: Option<&BTreeSet<usize>>,
    config: &PassConfig,
) -> Result<ConsolidatedScm, ConsolidationError> {
    let check = check_partition(scm, partition);
    if !check.is_valid() {
        return Err(ConsolidationError::InvalidPartition(check));
    }
    for t in targets {
        if !scm.is_endogenous(t) && !scm.is_exogenous(t) {
            return Err(ConsolidationError::InvalidTarget(t.to_string()));
        }
    }
    if let Some(sel) = selected {
        if let Some(bad) = sel.iter().find(|&&c| c >= partition.clusters.len()) {
            return Err(ConsolidationError::InvalidTarget(format!("cluster {bad}")));
        }
    }
    let is_selected = |c: usize| selected.is_none_or(|s| s.contains(&c));
    let mut keep: BTreeSet<VarRef> = targets
        .iter()
        .filter(|t| scm.is_endogenous(t))
        .cloned()
        .collect();
    for (c, vars) in partition.clusters.iter().enumerate() {
        if !is_selected(c) {
            keep.extend(vars.iter().cloned());
        }
    }
    let pruned = prune_childless(scm, &keep);
    let alive: BTreeSet<VarRef> = pruned.scm.endogenous_vars().into_iter().collect();
    let mut ids = vec![];
    let mut clusters = vec![];
    for (c, vars) in partition.clusters.iter().enumerate() {
        let kept: BTreeSet<VarRef> = vars.intersection(&alive).cloned().collect();
        if !kept.is_empty() {
            ids.push(c);
            clusters.push(kept);
        }
    }
    let restricted = Partition::new(clusters);
    let order = order_clusters(&pruned.scm, &restricted)?;

    let mut components = vec![];
    let mut report = CompressionReport {
        clusters: vec![],
        marginalized: pruned.removed.iter().map(VarRef::to_string).collect(),
        dropped_atoms: pruned
            .dropped_atoms
            .iter()
            .map(|(v, x)| format!("do({v}={x})"))
            .collect(),
    };
    for k in order {
        let id = ids[k];
        let cluster = &restricted.clusters[k];
        let sub = extract_sub_scm(&pruned.scm, cluster)?;
        if !is_selected(id) {
            components.push(Component::Passthrough {
                cluster_id: id,
                sub,
            });
            continue;
        }
        let required = compute_required_set(&pruned.scm, cluster, targets);
        if required.is_empty() {
            continue;
        }
        let built = build_rho(&sub, &required, id);
        let (ccv, passes) = run_passes(&built, &sub, &pruned.scm.inverse_pairs, config)?;
        let (image_bounds, guards) = analyze_cluster(&sub);
        report.clusters.push(ClusterReport {
            cluster: id,
            variables: cluster.iter().map(VarRef::to_string).collect(),
            required: required.iter().map(VarRef::to_string).collect(),
            local_exogenous: ccv.local_exogenous.iter().map(VarRef::to_string).collect(),
            atoms_before: sub.space.atoms().len(),
            atoms_after: ccv.space.atoms().len(),
            equation_nodes: sub.equations.iter().map(|e| e.eq.node_count()).sum(),
            nodes_before: built.node_count(),
            nodes_after: ccv.node_count(),
            passes,
            image_bounds,
            guards,
        });
        components.push(Component::Ccv(ccv));
    }
    Ok(ConsolidatedScm {
        name: scm.name.clone(),
        exogenous: scm.exogenous.clone(),
        components,
        targets: targets.clone(),
        space: pruned.scm.interventions,
        inverse_pairs: scm.inverse_pairs.clone(),
        report,
    })
}

/// A closed-form mechanism that passed the equivalence check.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifiedCcv {
    pub ccv: Ccv,
    pub node_count: usize,
    pub report: EquivalenceReport,
}

/// Accepts a hand-written mechanism for a whole model only if it agrees
/// with the model on its targets.
pub fn register_closed_form(
    base: &Scm,
    ccv: Ccv,
    strategy: &EquivalenceStrategy,
) -> Result<VerifiedCcv, ConsolidationError> {
    let cons = ConsolidatedScm::from_ccv(base, ccv.clone());
    let report = verify_equivalence(base, &cons, strategy);
    match report.verdict.clone() {
        Verdict::Equal => Ok(VerifiedCcv {
            node_count: ccv.node_count(),
            ccv,
            report,
        }),
        Verdict::CounterExample(c) => Err(ConsolidationError::EquivalenceFailed(c)),
        Verdict::Inconclusive(why) => Err(ConsolidationError::EquivalenceInconclusive(why)),
    }
}

/// Wraps closed-form mechanisms over every endogenous variable of `base`.
pub fn closed_form_ccv(base: &Scm, targets: Vec<(VarRef, Expr)>) -> Ccv {
    let cluster: BTreeSet<VarRef> = base.endogenous_vars().into_iter().collect();
    let refs: BTreeSet<VarRef> = targets.iter().flat_map(|(_, e)| e.free_refs()).collect();
    Ccv {
        cluster_id: 0,
        cluster,
        targets: targets
            .into_iter()
            .map(|(var, rho)| CcvTarget {
                domain: base.domain(&var).cloned().unwrap_or(Domain::Boolean),
                var,
                rho,
            })
            .collect(),
        local_exogenous: base
            .exogenous_vars()
            .into_iter()
            .filter(|v| refs.contains(v))
            .collect(),
        space: base.interventions.clone(),
    }
}
