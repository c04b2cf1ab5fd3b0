// SPDX-License-Identifier: Apache-2.0

//! Random finite models for property tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scmc::evaluation::Assignment;
use scmc::expr::{Domain, Expr, Value, VarRef};
use scmc::partition::{check_partition, Partition};
use scmc::scm::{Atom, ExoDistribution, InterventionSet, InterventionSpace, Scm};

pub struct Random {
    pub scm: Scm,
    pub partition: Partition,
    pub rng: ChaCha8Rng,
}

fn values(d: &Domain) -> Vec<Value> {
    d.values().expect("finite domain")
}

fn random_domain(rng: &mut ChaCha8Rng) -> Domain {
    if rng.gen_bool(0.4) {
        Domain::Boolean
    } else {
        Domain::FiniteInt {
            lo: 0,
            hi: rng.gen_range(1..=3),
        }
    }
}

fn int_leaf(rng: &mut ChaCha8Rng, ints: &[VarRef], bools: &[VarRef]) -> Expr {
    match rng.gen_range(0..4) {
        0 if !bools.is_empty() => {
            let b = bools.choose(rng).unwrap();
            Expr::ite(
                Expr::Ref(b.clone()),
                Expr::int(rng.gen_range(0..4)),
                Expr::int(rng.gen_range(0..4)),
            )
        }
        1 | 2 if !ints.is_empty() => Expr::Ref(ints.choose(rng).unwrap().clone()),
        _ => Expr::int(rng.gen_range(0..4)),
    }
}

fn int_expr(rng: &mut ChaCha8Rng, depth: u32, ints: &[VarRef], bools: &[VarRef]) -> Expr {
    if depth == 0 || rng.gen_bool(0.3) {
        return int_leaf(rng, ints, bools);
    }
    let a = int_expr(rng, depth - 1, ints, bools);
    let b = int_expr(rng, depth - 1, ints, bools);
    match rng.gen_range(0..6) {
        0 => Expr::add(a, b),
        1 => Expr::mul(a, b),
        2 => Expr::max(a, b),
        3 => Expr::min(a, b),
        4 => Expr::ite(bool_expr(rng, depth - 1, ints, bools), a, b),
        _ => Expr::sub(a, b),
    }
}

fn bool_expr(rng: &mut ChaCha8Rng, depth: u32, ints: &[VarRef], bools: &[VarRef]) -> Expr {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..3) {
            0 if !bools.is_empty() => Expr::Ref(bools.choose(rng).unwrap().clone()),
            1 => Expr::le(int_leaf(rng, ints, bools), Expr::int(rng.gen_range(0..3))),
            _ => Expr::bool(rng.gen()),
        };
    }
    match rng.gen_range(0..6) {
        0 => Expr::and(
            bool_expr(rng, depth - 1, ints, bools),
            bool_expr(rng, depth - 1, ints, bools),
        ),
        1 => Expr::or(
            bool_expr(rng, depth - 1, ints, bools),
            bool_expr(rng, depth - 1, ints, bools),
        ),
        2 => Expr::not(bool_expr(rng, depth - 1, ints, bools)),
        3 => Expr::eq(
            int_expr(rng, depth - 1, ints, bools),
            int_expr(rng, depth - 1, ints, bools),
        ),
        4 => Expr::lt(
            int_expr(rng, depth - 1, ints, bools),
            int_expr(rng, depth - 1, ints, bools),
        ),
        _ => Expr::case(
            vec![(
                bool_expr(rng, depth - 1, ints, bools),
                bool_expr(rng, depth - 1, ints, bools),
            )],
            bool_expr(rng, depth - 1, ints, bools),
        ),
    }
}

/// A random model with up to `max_endo` endogenous variables over finite
/// domains of at most four values, plus a random valid partition.
pub fn random_model(seed: u64, max_endo: usize) -> Random {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scm = Scm::new(format!("random_{seed}"));
    let (mut ints, mut bools) = (vec![], vec![]);
    let push = |v: VarRef, d: &Domain, ints: &mut Vec<VarRef>, bools: &mut Vec<VarRef>| match d {
        Domain::Boolean => bools.push(v),
        _ => ints.push(v),
    };
    for k in 0..rng.gen_range(1..=3) {
        let d = random_domain(&mut rng);
        let v = VarRef::indexed("U", k);
        scm.add_exogenous(
            v.clone(),
            d.clone(),
            ExoDistribution::UniformFinite(values(&d)),
        );
        push(v, &d, &mut ints, &mut bools);
    }
    let n = rng.gen_range(1..=max_endo);
    for k in 0..n {
        let d = random_domain(&mut rng);
        let v = VarRef::indexed("X", k as i64);
        let depth = rng.gen_range(1..=3);
        let eq = match &d {
            Domain::Boolean => bool_expr(&mut rng, depth, &ints, &bools),
            Domain::FiniteInt { hi, .. } => {
                Expr::modulo(int_expr(&mut rng, depth, &ints, &bools), Expr::int(hi + 1))
            }
            _ => unreachable!(),
        };
        scm.add_endogenous(v.clone(), d.clone(), eq);
        push(v, &d, &mut ints, &mut bools);
    }
    let mut atoms = vec![];
    for e in &scm.endogenous {
        if rng.gen_bool(0.4) {
            let mut vals = values(&e.domain);
            vals.shuffle(&mut rng);
            vals.truncate(rng.gen_range(1..=2));
            atoms.push(Atom::new(e.var.clone(), vals));
        }
    }
    scm.interventions = if rng.gen_bool(0.7) {
        InterventionSpace::PowerSet(atoms)
    } else {
        InterventionSpace::Singleton(atoms)
    };
    let partition = random_partition(&scm, &mut rng);
    Random {
        scm,
        partition,
        rng,
    }
}

/// Random cluster labels when they happen to form a valid partition,
/// otherwise contiguous runs of the declaration order, which always do.
pub fn random_partition(scm: &Scm, rng: &mut ChaCha8Rng) -> Partition {
    let vars = scm.endogenous_vars();
    let k = rng.gen_range(1..=vars.len().min(4));
    for _ in 0..5 {
        let mut clusters = vec![BTreeSet::new(); k];
        for v in &vars {
            clusters[rng.gen_range(0..k)].insert(v.clone());
        }
        clusters.retain(|c| !c.is_empty());
        let p = Partition::new(clusters);
        if check_partition(scm, &p).is_valid() {
            return p;
        }
    }
    let mut cuts: Vec<usize> = (1..vars.len()).collect();
    cuts.shuffle(rng);
    cuts.truncate(k - 1);
    cuts.sort();
    let mut clusters = vec![];
    let mut start = 0;
    for c in cuts.into_iter().chain([vars.len()]) {
        clusters.push(vars[start..c].iter().cloned().collect());
        start = c;
    }
    Partition::new(clusters)
}

pub fn random_u(scm: &Scm, rng: &mut ChaCha8Rng) -> Assignment {
    scm.exogenous
        .iter()
        .map(|x| {
            (
                x.var.clone(),
                values(&x.domain).choose(rng).unwrap().clone(),
            )
        })
        .collect()
}

pub fn random_i(scm: &Scm, rng: &mut ChaCha8Rng) -> InterventionSet {
    scm.interventions.sample(rng)
}
