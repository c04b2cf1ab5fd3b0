// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::Rng;

use common::{random_i, random_model, random_u};
use scmc::consolidation::{
    apply_pass, build_rho, consolidate, Ccv, Image, PassConfig, PassEnv, PassKind,
};
use scmc::document::{model_from_str, model_to_string, partition_from_str, partition_to_string};
use scmc::evaluation::{eval_partitioned, eval_scm, Assignment};
use scmc::expr::VarRef;
use scmc::partition::{check_partition, extract_sub_scm, Partition};
use scmc::scm::{for_each_assignment, validate, InterventionSet, Scm};
use scmc::verification::{verify_equivalence, EquivalenceStrategy, Verdict};

fn all_u(scm: &Scm) -> Vec<Assignment> {
    let grid: Vec<_> = scm
        .exogenous
        .iter()
        .map(|x| (x.var.clone(), x.domain.values().unwrap()))
        .collect();
    let mut out = vec![];
    for_each_assignment(&grid, &mut |u| {
        out.push(u.clone());
        true
    });
    out
}

fn all_i(scm: &Scm) -> Vec<InterventionSet> {
    scm.interventions
        .enumerate(4096)
        .unwrap_or_else(|| vec![InterventionSet::new()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_models_are_valid(seed in any::<u64>()) {
        let r = random_model(seed, 12);
        prop_assert!(validate(&r.scm).is_valid(), "{}", validate(&r.scm));
        prop_assert!(check_partition(&r.scm, &r.partition).is_valid());
    }

    #[test]
    fn partitioned_evaluation_agrees(seed in any::<u64>()) {
        let mut r = random_model(seed, 12);
        for _ in 0..5 {
            let u = random_u(&r.scm, &mut r.rng);
            let i = random_i(&r.scm, &mut r.rng);
            prop_assert_eq!(
                eval_partitioned(&r.scm, &r.partition, &u, &i).unwrap(),
                eval_scm(&r.scm, &u, &i).unwrap()
            );
        }
    }

    #[test]
    fn singleton_and_whole_partitions_agree(seed in any::<u64>()) {
        let mut r = random_model(seed, 8);
        let u = random_u(&r.scm, &mut r.rng);
        let i = random_i(&r.scm, &mut r.rng);
        let want = eval_scm(&r.scm, &u, &i).unwrap();
        for p in [Partition::singletons(&r.scm), Partition::whole(&r.scm)] {
            prop_assert_eq!(&eval_partitioned(&r.scm, &p, &u, &i).unwrap(), &want);
        }
    }

    #[test]
    fn documents_round_trip(seed in any::<u64>()) {
        let r = random_model(seed, 12);
        let text = model_to_string(&r.scm);
        let back = model_from_str(&text).unwrap();
        prop_assert_eq!(&back, &r.scm);
        prop_assert_eq!(model_to_string(&back), text);
        let p = partition_to_string(&r.partition);
        prop_assert_eq!(partition_to_string(&partition_from_str(&p, &back).unwrap()), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Consolidation keeps the targets' values under every allowed
    /// intervention and never grows the representation.
    #[test]
    fn consolidation_is_sound_and_compresses(seed in any::<u64>()) {
        let mut r = random_model(seed, 8);
        let vars = r.scm.endogenous_vars();
        let mut targets: BTreeSet<VarRef> =
            vars.iter().filter(|_| r.rng.gen_bool(0.4)).cloned().collect();
        targets.insert(vars.last().unwrap().clone());
        let c = consolidate(&r.scm, &r.partition, &targets, None, &PassConfig::default()).unwrap();
        prop_assert!(c.report.nodes_after() <= c.report.nodes_before());
        for cl in &c.report.clusters {
            prop_assert!(cl.nodes_after <= cl.nodes_before);
            for p in cl.passes.iter().filter(|p| p.accepted) {
                prop_assert_eq!(p.verdict.as_str(), "Equal");
                prop_assert!(p.nodes_after <= p.nodes_before);
            }
        }
        let report = verify_equivalence(&r.scm, &c, &EquivalenceStrategy::sampled(50, seed));
        prop_assert!(
            !matches!(report.verdict, Verdict::CounterExample(_)),
            "{:?}", report.verdict
        );
        // independent replay through the base evaluator
        for u in all_u(&r.scm).into_iter().take(16) {
            for i in all_i(&r.scm).into_iter().take(16) {
                if !c.space.contains(&i) {
                    // only atoms on non-targets may be dropped
                    prop_assert!(i.vars().any(|v| !targets.contains(v)), "{} dropped", i);
                    continue;
                }
                let base = eval_scm(&r.scm, &u, &i).unwrap();
                let got = scmc::consolidation::eval_consolidated(&c, &u, &i).unwrap();
                for t in &targets {
                    prop_assert_eq!(&got[t], &base[t], "{} under {}", t, i);
                }
            }
        }
    }

    /// Each rewrite pass, applied ungated to the inlined mechanisms of a
    /// whole model, keeps their values and does not add nodes.
    #[test]
    fn passes_preserve_values_and_size(seed in any::<u64>()) {
        let r = random_model(seed, 6);
        let cluster: BTreeSet<VarRef> = r.scm.endogenous_vars().into_iter().collect();
        let sub = extract_sub_scm(&r.scm, &cluster).unwrap();
        let ccv = build_rho(&sub, &cluster, 0);
        let inputs: BTreeMap<VarRef, Image> = r
            .scm
            .exogenous
            .iter()
            .map(|x| (x.var.clone(), Image::of_domain(&x.domain)))
            .collect();
        let env = PassEnv { inputs, space: &ccv.space, inverse_pairs: &[] };
        let us = all_u(&r.scm);
        let is = all_i(&r.scm);
        for kind in PassKind::ALL {
            let after = Ccv {
                targets: ccv
                    .targets
                    .iter()
                    .map(|t| {
                        let mut t = t.clone();
                        t.rho = apply_pass(kind, &t.rho, &env);
                        t
                    })
                    .collect(),
                ..ccv.clone()
            };
            for (a, b) in ccv.targets.iter().zip(&after.targets) {
                prop_assert!(b.rho.node_count() <= a.rho.node_count(), "{:?} grew {}", kind, a.var);
            }
            for u in &us {
                for i in &is {
                    let base = eval_scm(&r.scm, u, i).unwrap();
                    let got = after.eval(u, i).unwrap();
                    for t in &after.targets {
                        prop_assert_eq!(&got[&t.var], &base[&t.var], "{:?} on {} under {}", kind, t.var, i);
                    }
                }
            }
        }
    }
}
