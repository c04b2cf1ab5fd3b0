// SPDX-License-Identifier: Apache-2.0

//! Builders for the worked example models, each bundled with a partition,
//! targets and reference closed forms.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::consolidation::{closed_form_ccv, Ccv};
use crate::expr::{BinaryOp, Domain, Expr, IndexRange, Value, VarRef};
use crate::partition::Partition;
use crate::scm::{Atom, ExoDistribution, InterventionSet, InterventionSpace, Scm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZooError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown model {0}")]
    UnknownModel(String),
}

/// Names accepted by [`entry`].
pub const MODELS: [&str; 9] = [
    "dominoes",
    "tool_wear",
    "tool_wear_sampled",
    "firing_squad",
    "step_by_step",
    "platformer",
    "bernoulli_fork",
    "fig2_chain",
    "matrix_chain",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ZooEntry {
    pub scm: Scm,
    pub partition: Partition,
    pub targets: BTreeSet<VarRef>,
    /// Clusters to consolidate; `None` means all of them.
    pub clusters: Option<BTreeSet<usize>>,
    /// Hand-derived mechanisms known to agree with the model.
    pub closed_forms: Vec<Ccv>,
    /// Intervention sets to verify on when the full space is too large.
    pub schedule: Option<Vec<InterventionSet>>,
    pub notes: Vec<String>,
}

/// Builds a model by name with its size parameter (ignored by fixed-size
/// models).
pub fn entry(name: &str, param: Option<i64>) -> Result<ZooEntry, ZooError> {
    match name {
        "dominoes" => dominoes(param.unwrap_or(5)),
        "tool_wear" => tool_wear(param.unwrap_or(36), UMode::Expected),
        "tool_wear_sampled" => tool_wear(param.unwrap_or(36), UMode::Sampled),
        "firing_squad" => firing_squad(param.unwrap_or(5)),
        "step_by_step" => Ok(step_by_step()),
        "platformer" => Ok(platformer()),
        "bernoulli_fork" => Ok(bernoulli_fork()),
        "fig2_chain" => Ok(fig2_chain()),
        "matrix_chain" => Ok(matrix_chain()),
        _ => Err(ZooError::UnknownModel(name.to_string())),
    }
}

fn v(name: &str) -> VarRef {
    VarRef::scalar(name)
}

fn set(vars: impl IntoIterator<Item = VarRef>) -> BTreeSet<VarRef> {
    vars.into_iter().collect()
}

fn bools() -> Vec<Value> {
    vec![Value::Bool(false), Value::Bool(true)]
}

fn whole(scm: &Scm) -> Partition {
    Partition::whole(scm)
}

/// The dominoes mechanism for the last stone. It reads only the push and
/// the interventions, so it is the same tree for every row length.
pub fn dominoes_closed_form() -> Expr {
    let any = |x: bool| Expr::ExistsIntervention {
        family: "S".into(),
        range: IndexRange::ALL,
        value: Some(Value::Bool(x)),
    };
    Expr::ite(
        any(true),
        Expr::bool(true),
        Expr::ite(any(false), Expr::bool(false), Expr::var("push")),
    )
}

pub fn dominoes(n: i64) -> Result<ZooEntry, ZooError> {
    if n < 2 {
        return Err(ZooError::InvalidParameter(format!(
            "dominoes needs n >= 2, got {n}"
        )));
    }
    let mut m = Scm::new(format!("dominoes_{n}"));
    m.add_exogenous(
        v("push"),
        Domain::Boolean,
        ExoDistribution::UniformFinite(bools()),
    );
    for i in 1..=n {
        let prev = if i == 1 {
            Expr::var("push")
        } else {
            Expr::member("S", i - 1)
        };
        m.add_endogenous(VarRef::indexed("S", i), Domain::Boolean, prev);
    }
    m.interventions = InterventionSpace::Singleton(
        (1..=n)
            .map(|i| Atom::new(VarRef::indexed("S", i), bools()))
            .collect(),
    );
    let last = VarRef::indexed("S", n);
    let partition = Partition::new(vec![
        set([VarRef::indexed("S", 1)]),
        (2..=n).map(|i| VarRef::indexed("S", i)).collect(),
    ]);
    let cf = closed_form_ccv(&m, vec![(last.clone(), dominoes_closed_form())]);
    Ok(ZooEntry {
        scm: m,
        partition,
        targets: set([last]),
        clusters: None,
        closed_forms: vec![cf],
        schedule: None,
        notes: vec!["the closed form does not depend on the number of dominoes".into()],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UMode {
    /// Utilization fixed at its mean 0.5.
    Expected,
    /// Utilization drawn from N(0.5, 0.05^2).
    Sampled,
}

/// `0.85^(t - t0)` with t0 the last reset at or before t.
pub fn tool_wear_closed_form(t: i64) -> Expr {
    Expr::pow(
        Expr::real(0.85),
        Expr::sub(
            Expr::int(t),
            Expr::MaxIntervenedIndex {
                family: "S".into(),
                upper: Box::new(Expr::int(t)),
                default: Box::new(Expr::int(0)),
            },
        ),
    )
}

pub fn tool_wear(t_max: i64, mode: UMode) -> Result<ZooEntry, ZooError> {
    if t_max < 1 {
        return Err(ZooError::InvalidParameter(format!(
            "tool wear needs T >= 1, got {t_max}"
        )));
    }
    let name = match mode {
        UMode::Expected => "tool_wear",
        UMode::Sampled => "tool_wear_sampled",
    };
    let mut m = Scm::new(format!("{name}_{t_max}"));
    for t in 1..=t_max {
        let dist = match mode {
            UMode::Expected => ExoDistribution::PointMass(Value::Real(0.5)),
            UMode::Sampled => ExoDistribution::Normal {
                mean: 0.5,
                variance: 0.0025,
            },
        };
        m.add_exogenous(VarRef::indexed("U", t), Domain::real(), dist);
    }
    for t in 1..=t_max {
        let u = Expr::member("U", t);
        let prev = |fam: &str| {
            if t == 1 {
                Expr::real(1.0)
            } else {
                Expr::member(fam, t - 1)
            }
        };
        let decay = |k: f64| Expr::sub(Expr::real(1.0), Expr::mul(Expr::real(k), u.clone()));
        m.add_endogenous(
            VarRef::indexed("L", t),
            Domain::real(),
            Expr::mul(decay(0.002), prev("L")),
        );
        m.add_endogenous(
            VarRef::indexed("S", t),
            Domain::real(),
            Expr::mul(decay(0.3), prev("S")),
        );
        m.add_endogenous(
            VarRef::indexed("A", t),
            Domain::real(),
            Expr::mul(
                Expr::real(0.8),
                Expr::pow(Expr::member("S", t), Expr::int(2)),
            ),
        );
    }
    let mut atoms = vec![];
    for t in 1..=t_max {
        atoms.push(Atom::new(VarRef::indexed("S", t), vec![Value::Real(1.0)]));
        atoms.push(Atom::new(VarRef::indexed("L", t), vec![Value::Real(1.0)]));
    }
    m.interventions = InterventionSpace::PowerSet(atoms);
    let targets: BTreeSet<VarRef> = (1..=t_max).map(|t| VarRef::indexed("S", t)).collect();
    let reset = |ts: &[i64]| -> InterventionSet {
        ts.iter()
            .filter(|&&t| t <= t_max)
            .map(|&t| (VarRef::indexed("S", t), Value::Real(1.0)))
            .collect()
    };
    let schedule = vec![InterventionSet::new(), reset(&[12]), reset(&[12, 24])];
    let closed_forms = match mode {
        UMode::Expected => vec![closed_form_ccv(
            &m,
            (1..=t_max)
                .map(|t| (VarRef::indexed("S", t), tool_wear_closed_form(t)))
                .collect(),
        )],
        UMode::Sampled => vec![],
    };
    Ok(ZooEntry {
        partition: whole(&m),
        scm: m,
        targets,
        clusters: None,
        closed_forms,
        schedule: Some(schedule),
        notes: vec!["S_0 = L_0 = 1.0".into()],
    })
}

pub fn firing_squad_closed_form(n: i64) -> Expr {
    Expr::ite(
        Expr::or(
            Expr::not(Expr::var("C")),
            Expr::ForAllIntervention {
                family: "R".into(),
                range: IndexRange::new(1, n),
                value: Some(Value::Bool(false)),
            },
        ),
        Expr::sym("lives"),
        Expr::sym("dies"),
    )
}

pub fn firing_squad(n: i64) -> Result<ZooEntry, ZooError> {
    if n < 1 {
        return Err(ZooError::InvalidParameter(format!(
            "firing squad needs N >= 1, got {n}"
        )));
    }
    let mut m = Scm::new(format!("firing_squad_{n}"));
    m.add_exogenous(
        v("C"),
        Domain::Boolean,
        ExoDistribution::UniformFinite(bools()),
    );
    for i in 1..=n {
        m.add_endogenous(VarRef::indexed("R", i), Domain::Boolean, Expr::var("C"));
    }
    let shots = (2..=n).fold(Expr::member("R", 1), |acc, i| {
        Expr::or(acc, Expr::member("R", i))
    });
    m.add_endogenous(
        v("P"),
        Domain::symbols(&["lives", "dies"]),
        Expr::ite(shots, Expr::sym("dies"), Expr::sym("lives")),
    );
    m.interventions = InterventionSpace::PowerSet(
        (1..=n)
            .map(|i| Atom::new(VarRef::indexed("R", i), vec![Value::Bool(false)]))
            .collect(),
    );
    let cf = closed_form_ccv(
        &m,
        vec![
            (v("C"), Expr::var("C")),
            (v("P"), firing_squad_closed_form(n)),
        ],
    );
    Ok(ZooEntry {
        partition: whole(&m),
        scm: m,
        targets: set([v("C"), v("P")]),
        clusters: None,
        closed_forms: vec![cf],
        schedule: None,
        notes: vec![],
    })
}

fn mod_is_zero(k: i64) -> Expr {
    Expr::eq(Expr::modulo(Expr::var("A"), Expr::int(k)), Expr::int(0))
}

/// Hand-simplified mechanisms of the step-by-step example, per variable.
pub fn step_by_step_reference() -> Vec<(VarRef, Expr)> {
    vec![
        (v("F"), mod_is_zero(10)),
        (
            v("G"),
            Expr::and(mod_is_zero(10), Expr::not(Expr::IsIntervened(v("G")))),
        ),
        (v("C"), Expr::le(Expr::var("A"), Expr::int(5))),
        (v("H"), Expr::or(Expr::var("C"), Expr::var("G"))),
    ]
}

pub fn step_by_step() -> ZooEntry {
    let mut m = Scm::new("step_by_step");
    m.add_exogenous(
        v("A"),
        Domain::FiniteInt { lo: 0, hi: 20 },
        ExoDistribution::UniformFinite((0..=20).map(Value::Int).collect()),
    );
    m.add_endogenous(
        v("B"),
        Domain::FiniteInt { lo: -20, hi: 20 },
        Expr::ite(
            Expr::le(Expr::var("A"), Expr::int(5)),
            Expr::int(0),
            Expr::int(1),
        ),
    );
    m.add_endogenous(
        v("C"),
        Domain::Boolean,
        Expr::case(
            vec![
                (Expr::eq(Expr::var("B"), Expr::int(0)), Expr::bool(true)),
                (
                    Expr::and(
                        Expr::le(Expr::int(0), Expr::var("B")),
                        Expr::le(Expr::var("B"), Expr::int(10)),
                    ),
                    Expr::bool(false),
                ),
            ],
            Expr::bool(true),
        ),
    );
    m.add_endogenous(v("D"), Domain::Boolean, Expr::not(Expr::var("C")));
    m.add_endogenous(v("E"), Domain::Boolean, mod_is_zero(5));
    m.add_endogenous(v("F"), Domain::Boolean, mod_is_zero(10));
    m.add_endogenous(
        v("G"),
        Domain::Boolean,
        Expr::and(Expr::var("E"), Expr::var("F")),
    );
    m.add_endogenous(
        v("H"),
        Domain::Boolean,
        Expr::or(Expr::var("C"), Expr::var("G")),
    );
    m.interventions = InterventionSpace::Explicit(vec![
        InterventionSet::new(),
        InterventionSet::single(v("D"), Value::Bool(true)),
        InterventionSet::single(v("D"), Value::Bool(false)),
        InterventionSet::single(v("G"), Value::Bool(false)),
    ]);
    let partition = Partition::new(vec![
        set([v("E"), v("F"), v("G")]),
        set([v("B"), v("C")]),
        set([v("D"), v("H")]),
    ]);
    ZooEntry {
        scm: m,
        partition,
        targets: set([v("C"), v("F"), v("H")]),
        clusters: None,
        closed_forms: vec![],
        schedule: None,
        notes: vec!["G := E and F".into()],
    }
}

const ENTITIES: [&str; 4] = ["coin", "powerup", "enemy", "flag"];

fn reward(x: &str) -> Expr {
    Expr::var(&format!("{x}_reward"))
}

/// `max { X_reward | target_X }` over `among`, with 0 for the empty set.
fn max_targeted_reward(among: &[&str]) -> Expr {
    among
        .iter()
        .map(|x| Expr::ite(Expr::var(&format!("target_{x}")), reward(x), Expr::int(0)))
        .reduce(Expr::max)
        .expect("non-empty entity list")
}

/// `x in {ps_1 .. ps_{i-1}}`.
fn planned_before(i: i64, x: &str) -> Expr {
    (1..i)
        .map(|j| Expr::eq(Expr::member("planning_sequence", j), Expr::sym(x)))
        .reduce(Expr::or)
        .unwrap_or(Expr::bool(false))
}

fn planned_anywhere(x: &str) -> Expr {
    planned_before(5, x)
}

/// Default level layout: (x, y) for the player and each entity.
pub const PLATFORMER_LAYOUT: [(&str, f64, f64); 5] = [
    ("player_position", 0.1, 0.1),
    ("position_coin", 0.3, 0.2),
    ("position_powerup", 0.5, 0.6),
    ("position_enemy", 0.7, 0.3),
    ("position_flag", 0.95, 0.9),
];

pub fn planning_symbols() -> Domain {
    Domain::symbols(&["finished", "coin", "powerup", "enemy", "flag"])
}

pub fn platformer() -> ZooEntry {
    let mut m = Scm::new("platformer");
    for (name, x, y) in PLATFORMER_LAYOUT {
        for (axis, val) in [("x", x), ("y", y)] {
            m.add_exogenous(
                v(&format!("{name}_{axis}")),
                Domain::interval(0.0, 1.0),
                ExoDistribution::PointMass(Value::Real(val)),
            );
        }
    }
    for (x, r) in [("coin", 3), ("powerup", 1), ("enemy", 9), ("flag", 2)] {
        m.add_exogenous(
            v(&format!("{x}_reward")),
            Domain::FiniteInt { lo: 0, hi: 20 },
            ExoDistribution::PointMass(Value::Int(r)),
        );
    }
    m.add_exogenous(
        v("target_flag"),
        Domain::Boolean,
        ExoDistribution::PointMass(Value::Bool(true)),
    );
    m.add_exogenous(
        v("time_taken"),
        Domain::real(),
        ExoDistribution::PointMass(Value::Real(10.0)),
    );

    for x in ENTITIES {
        let d = |axis: &str| {
            Expr::sub(
                Expr::var(&format!("position_{x}_{axis}")),
                Expr::var(&format!("player_position_{axis}")),
            )
        };
        let sq = |e: Expr| Expr::mul(e.clone(), e);
        m.add_endogenous(
            v(&format!("distance_{x}")),
            Domain::interval(0.0, 1.5),
            Expr::pow(Expr::add(sq(d("x")), sq(d("y"))), Expr::real(0.5)),
        );
    }
    for x in ENTITIES {
        let dist = Expr::var(&format!("distance_{x}"));
        m.add_endogenous(
            v(&format!("near_{x}")),
            Domain::Boolean,
            Expr::lt(dist.clone(), Expr::real(3.0)),
        );
        m.add_endogenous(
            v(&format!("targeting_cost_{x}")),
            Domain::interval(1.0, 1.75),
            Expr::add(Expr::real(1.0), Expr::mul(Expr::real(0.5), dist)),
        );
    }
    let cost = |x: &str| Expr::var(&format!("targeting_cost_{x}"));
    m.add_endogenous(
        v("target_coin"),
        Domain::Boolean,
        Expr::lt(cost("coin"), reward("enemy")),
    );
    m.add_endogenous(
        v("target_powerup"),
        Domain::Boolean,
        Expr::lt(cost("powerup"), reward("powerup")),
    );
    m.add_endogenous(
        v("powered_up"),
        Domain::Boolean,
        Expr::var("target_powerup"),
    );
    m.add_endogenous(
        v("target_enemy"),
        Domain::Boolean,
        Expr::and(
            Expr::lt(cost("enemy"), reward("enemy")),
            Expr::var("powered_up"),
        ),
    );
    let towards = |x: &str, among: &[&str]| {
        Expr::and(
            Expr::var(&format!("target_{x}")),
            Expr::lt(max_targeted_reward(among), reward(x)),
        )
    };
    m.add_endogenous(
        v("towards_coin"),
        Domain::Boolean,
        towards("coin", &["powerup", "enemy", "flag"]),
    );
    m.add_endogenous(
        v("towards_powerup"),
        Domain::Boolean,
        towards("powerup", &["coin", "enemy", "flag"]),
    );
    m.add_endogenous(
        v("towards_enemy"),
        Domain::Boolean,
        towards("enemy", &["enemy", "powerup", "flag"]),
    );
    m.add_endogenous(
        v("towards_flag"),
        Domain::Boolean,
        towards("flag", &["coin", "powerup", "enemy"]),
    );
    m.add_endogenous(
        v("jump"),
        Domain::Boolean,
        Expr::and(Expr::var("near_enemy"), Expr::not(Expr::var("powered_up"))),
    );
    for i in 1..=4 {
        let towards = |x: &str| Expr::var(&format!("towards_{x}"));
        let fresh = |x: &str| Expr::and(towards(x), Expr::not(planned_before(i, x)));
        m.add_endogenous(
            VarRef::indexed("planning_sequence", i),
            planning_symbols(),
            Expr::case(
                vec![
                    (
                        Expr::and(towards("flag"), planned_before(i, "flag")),
                        Expr::sym("finished"),
                    ),
                    (fresh("coin"), Expr::sym("coin")),
                    (fresh("powerup"), Expr::sym("powerup")),
                    (fresh("enemy"), Expr::sym("enemy")),
                    (fresh("flag"), Expr::sym("flag")),
                ],
                Expr::sym("finished"),
            ),
        );
    }
    let bonus = |cond: Expr, x: &str| Expr::ite(cond, reward(x), Expr::int(0));
    let score = [
        bonus(planned_anywhere("coin"), "coin"),
        bonus(planned_anywhere("powerup"), "powerup"),
        bonus(
            Expr::and(planned_anywhere("enemy"), planned_anywhere("powerup")),
            "enemy",
        ),
        bonus(planned_anywhere("flag"), "flag"),
    ]
    .into_iter()
    .fold(
        Expr::sub(Expr::real(20.0), Expr::var("time_taken")),
        Expr::add,
    );
    m.add_endogenous(v("score"), Domain::real(), score);
    m.interventions = InterventionSpace::PowerSet(
        ["target_coin", "target_enemy", "target_powerup"]
            .iter()
            .map(|x| Atom::new(v(x), vec![Value::Bool(false)]))
            .collect(),
    );

    let distances: BTreeSet<VarRef> = ENTITIES
        .iter()
        .map(|x| v(&format!("distance_{x}")))
        .collect();
    let rest: BTreeSet<VarRef> = m
        .endogenous_vars()
        .into_iter()
        .filter(|x| !distances.contains(x))
        .collect();
    let mut targets = distances.clone();
    targets.extend((1..=4).map(|i| VarRef::indexed("planning_sequence", i)));
    let oracle = closed_form_ccv(&m, platformer_forms(&m, false));
    ZooEntry {
        partition: Partition::new(vec![distances, rest]),
        scm: m,
        targets,
        clusters: Some([1].into_iter().collect()),
        closed_forms: vec![oracle],
        schedule: None,
        notes: vec![
            "target_coin compares against enemy_reward as written".into(),
            "the second planning step is 'finished' under do(target_coin=0) by evaluation".into(),
        ],
    }
}

/// Closed forms for the planning sequence, with the distances spelled out.
/// `as_printed` reproduces the printed second step, which disagrees with
/// evaluation of the model under `do(target_coin=0)`.
pub fn platformer_forms(m: &Scm, as_printed: bool) -> Vec<(VarRef, Expr)> {
    let mut out: Vec<(VarRef, Expr)> = ENTITIES
        .iter()
        .map(|x| {
            let var = v(&format!("distance_{x}"));
            let eq = m.endogenous(&var).expect("distance variable").eq.clone();
            (var, eq)
        })
        .collect();
    let free = Expr::not(Expr::IsIntervened(v("target_coin")));
    out.push((
        VarRef::indexed("planning_sequence", 1),
        Expr::ite(free.clone(), Expr::sym("coin"), Expr::sym("flag")),
    ));
    let second = if as_printed {
        Expr::ite(free, Expr::sym("finished"), Expr::sym("flag"))
    } else {
        Expr::sym("finished")
    };
    out.push((VarRef::indexed("planning_sequence", 2), second));
    for i in 3..=4 {
        out.push((
            VarRef::indexed("planning_sequence", i),
            Expr::sym("finished"),
        ));
    }
    out
}

/// The printed planning-sequence forms as a mechanism over the model.
pub fn platformer_printed_ccv(m: &Scm) -> Ccv {
    closed_form_ccv(m, platformer_forms(m, true))
}

/// B := Bern(A); C := B; D := B.
pub fn bernoulli_fork() -> ZooEntry {
    let mut m = Scm::new("bernoulli_fork");
    m.add_exogenous(
        v("A"),
        Domain::interval(0.0, 1.0),
        ExoDistribution::PointMass(Value::Real(0.5)),
    );
    m.add_endogenous(
        v("B"),
        Domain::Boolean,
        Expr::Bernoulli(Box::new(Expr::var("A"))),
    );
    m.add_endogenous(v("C"), Domain::Boolean, Expr::var("B"));
    m.add_endogenous(v("D"), Domain::Boolean, Expr::var("B"));
    ZooEntry {
        partition: whole(&m),
        scm: m,
        targets: set([v("C"), v("D")]),
        clusters: None,
        closed_forms: vec![],
        schedule: None,
        notes: vec!["reparameterize before consolidating".into()],
    }
}

/// Five-variable model split into {A}, {B, D}, {C, E}.
pub fn fig2_chain() -> ZooEntry {
    let mut m = Scm::new("fig2_chain");
    m.add_exogenous(
        v("X"),
        Domain::FiniteInt { lo: 0, hi: 3 },
        ExoDistribution::UniformFinite((0..=3).map(Value::Int).collect()),
    );
    m.add_exogenous(
        v("N"),
        Domain::FiniteInt { lo: 0, hi: 1 },
        ExoDistribution::UniformFinite((0..=1).map(Value::Int).collect()),
    );
    let int = Domain::FiniteInt { lo: -100, hi: 100 };
    m.add_endogenous(v("A"), int.clone(), Expr::add(Expr::var("X"), Expr::int(1)));
    m.add_endogenous(v("B"), int.clone(), Expr::mul(Expr::int(2), Expr::var("A")));
    m.add_endogenous(
        v("D"),
        int.clone(),
        Expr::add(Expr::var("A"), Expr::var("B")),
    );
    m.add_endogenous(
        v("C"),
        int.clone(),
        Expr::add(Expr::var("B"), Expr::var("D")),
    );
    m.add_endogenous(v("E"), int, Expr::add(Expr::var("C"), Expr::var("N")));
    m.interventions = InterventionSpace::PowerSet(vec![
        Atom::new(v("A"), vec![Value::Int(0)]),
        Atom::new(v("B"), vec![Value::Int(0), Value::Int(5)]),
        Atom::new(v("C"), vec![Value::Int(1)]),
    ]);
    let partition = Partition::new(vec![
        set([v("A")]),
        set([v("B"), v("D")]),
        set([v("C"), v("E")]),
    ]);
    ZooEntry {
        scm: m,
        partition,
        targets: set([v("E")]),
        clusters: None,
        closed_forms: vec![],
        schedule: None,
        notes: vec![],
    }
}

/// Coefficient matrices of the linear-map example: Y = B X, Z = A Y.
pub const MATRIX_A: [[i64; 2]; 3] = [[0, 1], [0, 1], [0, 1]];
pub const MATRIX_B: [[i64; 3]; 2] = [[0, 0, 0], [0, 1, 1]];

/// Linear combination `sum_j row[j] * family_j`, zeros written out.
fn linear_row(row: &[i64], family: &str) -> Expr {
    row.iter()
        .enumerate()
        .map(|(j, c)| Expr::mul(Expr::real(*c as f64), Expr::member(family, j as i64 + 1)))
        .reduce(Expr::add)
        .expect("non-empty row")
}

pub fn matrix_chain() -> ZooEntry {
    let mut m = Scm::new("matrix_chain");
    for j in 1..=3 {
        m.add_exogenous(
            VarRef::indexed("X", j),
            Domain::FiniteInt { lo: 0, hi: 1 },
            ExoDistribution::UniformFinite(vec![Value::Int(0), Value::Int(1)]),
        );
    }
    for (i, row) in MATRIX_B.iter().enumerate() {
        m.add_endogenous(
            VarRef::indexed("Y", i as i64 + 1),
            Domain::real(),
            linear_row(row, "X"),
        );
    }
    for (i, row) in MATRIX_A.iter().enumerate() {
        m.add_endogenous(
            VarRef::indexed("Z", i as i64 + 1),
            Domain::real(),
            linear_row(row, "Y"),
        );
    }
    let targets: BTreeSet<VarRef> = (1..=3).map(|i| VarRef::indexed("Z", i)).collect();
    ZooEntry {
        partition: whole(&m),
        scm: m,
        targets,
        clusters: None,
        closed_forms: vec![],
        schedule: None,
        notes: vec![],
    }
}

/// Operator precedence helper for documentation output.
pub fn is_linear_op(op: BinaryOp) -> bool {
    matches!(op, BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul)
}
