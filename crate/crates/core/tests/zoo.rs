// SPDX-License-Identifier: Apache-2.0

use scmc::consolidation::register_closed_form;
use scmc::evaluation::{eval_scm, Assignment};
use scmc::expr::{Value, VarRef};
use scmc::partition::check_partition;
use scmc::scm::{validate, InterventionSet};
use scmc::verification::EquivalenceStrategy;
use scmc::zoo::{self, ZooError};

#[test]
fn every_entry_is_consistent() {
    for name in zoo::MODELS {
        let e = zoo::entry(name, None).unwrap();
        assert!(validate(&e.scm).is_valid(), "{name}: {}", validate(&e.scm));
        assert!(check_partition(&e.scm, &e.partition).is_valid(), "{name}");
        for t in &e.targets {
            assert!(
                e.scm.is_endogenous(t) || e.scm.is_exogenous(t),
                "{name}: {t}"
            );
        }
        if let Some(c) = &e.clusters {
            assert!(c.iter().all(|&k| k < e.partition.clusters.len()), "{name}");
        }
    }
}

#[test]
fn bad_parameters_are_rejected() {
    assert!(matches!(
        zoo::entry("dominoes", Some(1)),
        Err(ZooError::InvalidParameter(_))
    ));
    assert!(matches!(
        zoo::entry("tool_wear", Some(0)),
        Err(ZooError::InvalidParameter(_))
    ));
    assert!(matches!(
        zoo::entry("firing_squad", Some(0)),
        Err(ZooError::InvalidParameter(_))
    ));
    assert!(matches!(
        zoo::entry("nope", None),
        Err(ZooError::UnknownModel(_))
    ));
}

#[test]
fn small_closed_forms_register() {
    for (name, param) in [("dominoes", 3), ("firing_squad", 3), ("tool_wear", 6)] {
        let e = zoo::entry(name, Some(param)).unwrap();
        let mut strategy = EquivalenceStrategy::exhaustive();
        if name == "tool_wear" {
            // 2^12 sets, all enumerable at this size
            strategy.intervention_budget = 1 << 12;
        }
        for cf in &e.closed_forms {
            let r = register_closed_form(&e.scm, cf.clone(), &strategy).unwrap();
            assert!(r.report.is_equal(), "{name}");
        }
    }
}

#[test]
fn tool_wear_resets_restart_decay() {
    let e = zoo::tool_wear(5, zoo::UMode::Expected).unwrap();
    let u: Assignment = (1..=5)
        .map(|t| (VarRef::indexed("U", t), Value::Real(0.5)))
        .collect();
    let i = InterventionSet::single(VarRef::indexed("S", 3), Value::Real(1.0));
    let x = eval_scm(&e.scm, &u, &i).unwrap();
    let s = |t| x[&VarRef::indexed("S", t)].as_f64().unwrap();
    assert!((s(2) - 0.85f64.powi(2)).abs() < 1e-12);
    assert_eq!(s(3), 1.0);
    assert!((s(5) - 0.85f64.powi(2)).abs() < 1e-12);
    // L decays at 0.999 per step and A = 0.8 S^2
    assert!((x[&VarRef::indexed("L", 5)].as_f64().unwrap() - 0.999f64.powi(5)).abs() < 1e-12);
    assert!((x[&VarRef::indexed("A", 4)].as_f64().unwrap() - 0.8 * s(4) * s(4)).abs() < 1e-12);
}

#[test]
fn matrix_chain_uses_the_bundled_matrices() {
    let e = zoo::matrix_chain();
    let u: Assignment = (1..=3)
        .map(|j| (VarRef::indexed("X", j), Value::Int(1)))
        .collect();
    let x = eval_scm(&e.scm, &u, &InterventionSet::new()).unwrap();
    for (i, row) in zoo::MATRIX_B.iter().enumerate() {
        let want: i64 = row.iter().sum();
        assert_eq!(
            x[&VarRef::indexed("Y", i as i64 + 1)].as_f64().unwrap(),
            want as f64
        );
    }
    // Z = A B 1 with A B = [[0, 1, 1]; 3]
    for i in 1..=3 {
        assert_eq!(x[&VarRef::indexed("Z", i)].as_f64().unwrap(), 2.0);
    }
}
