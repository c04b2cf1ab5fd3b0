// SPDX-License-Identifier: Apache-2.0

//! Representation size of models: expression node counts and, for linear
//! equations between indexed families, coefficient matrices.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::consolidation::{Component, ConsolidatedScm};
use crate::expr::{BinaryOp, Expr, UnaryOp, VarRef};
use crate::scm::Scm;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquationSize {
    pub variable: String,
    pub nodes: usize,
}

/// `output = matrix x input` for two indexed families.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearMap {
    pub output: String,
    pub input: String,
    pub composed: bool,
    pub matrix: Vec<Vec<f64>>,
    pub nnz: usize,
}

impl LinearMap {
    fn new(output: &str, input: &str, composed: bool, matrix: Vec<Vec<f64>>) -> Self {
        let nnz = matrix.iter().flatten().filter(|x| **x != 0.0).count();
        LinearMap {
            output: output.to_string(),
            input: input.to_string(),
            composed,
            matrix,
            nnz,
        }
    }

    pub fn label(&self) -> String {
        format!("{}<-{}", self.output, self.input)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub equations: Vec<EquationSize>,
    pub total_nodes: usize,
    pub linear_maps: Vec<LinearMap>,
}

pub fn model_metrics(scm: &Scm) -> Metrics {
    let eqs: Vec<(VarRef, &Expr)> = scm
        .endogenous
        .iter()
        .map(|e| (e.var.clone(), &e.eq))
        .collect();
    let declared: Vec<VarRef> = scm
        .exogenous_vars()
        .into_iter()
        .chain(scm.endogenous_vars())
        .collect();
    metrics_of(&eqs, &declared)
}

pub fn consolidated_metrics(c: &ConsolidatedScm) -> Metrics {
    let mut eqs: Vec<(VarRef, &Expr)> = vec![];
    let mut declared: Vec<VarRef> = c.exogenous.iter().map(|e| e.var.clone()).collect();
    for comp in &c.components {
        match comp {
            Component::Ccv(ccv) => {
                for t in &ccv.targets {
                    eqs.push((t.var.clone(), &t.rho));
                }
                declared.extend(ccv.cluster.iter().cloned());
            }
            Component::Passthrough { sub, .. } => {
                for e in &sub.equations {
                    eqs.push((e.var.clone(), &e.eq));
                    declared.push(e.var.clone());
                }
            }
        }
    }
    metrics_of(&eqs, &declared)
}

fn metrics_of(eqs: &[(VarRef, &Expr)], declared: &[VarRef]) -> Metrics {
    let equations: Vec<EquationSize> = eqs
        .iter()
        .map(|(v, e)| EquationSize {
            variable: v.to_string(),
            nodes: e.node_count(),
        })
        .collect();
    Metrics {
        total_nodes: equations.iter().map(|e| e.nodes).sum(),
        equations,
        linear_maps: linear_maps(eqs, declared),
    }
}

type Linear = (BTreeMap<VarRef, f64>, f64);

/// Coefficients and offset of `e` if it is affine in its references.
pub fn linear_form(e: &Expr) -> Option<Linear> {
    match e {
        Expr::Const(v) => Some((BTreeMap::new(), v.as_f64()?)),
        Expr::Ref(v) => Some(([(v.clone(), 1.0)].into_iter().collect(), 0.0)),
        Expr::Unary(UnaryOp::Neg, a) => Some(scale(linear_form(a)?, -1.0)),
        Expr::Binary(op @ (BinaryOp::Add | BinaryOp::Sub), a, b) => {
            let sign = if *op == BinaryOp::Add { 1.0 } else { -1.0 };
            let (mut ca, ka) = linear_form(a)?;
            let (cb, kb) = linear_form(b)?;
            for (v, c) in cb {
                *ca.entry(v).or_insert(0.0) += sign * c;
            }
            Some((ca, ka + sign * kb))
        }
        Expr::Binary(BinaryOp::Mul, a, b) => {
            let (la, lb) = (linear_form(a)?, linear_form(b)?);
            if la.0.is_empty() {
                Some(scale(lb, la.1))
            } else if lb.0.is_empty() {
                Some(scale(la, lb.1))
            } else {
                None
            }
        }
        _ => None,
    }
}

fn scale((coeffs, k): Linear, by: f64) -> Linear {
    (
        coeffs.into_iter().map(|(v, c)| (v, c * by)).collect(),
        k * by,
    )
}

/// Indexed members of each family in index order.
fn families(vars: &[VarRef]) -> BTreeMap<String, Vec<VarRef>> {
    let mut out: BTreeMap<String, BTreeSet<VarRef>> = BTreeMap::new();
    for v in vars.iter().filter(|v| v.index.is_some()) {
        out.entry(v.name.clone()).or_default().insert(v.clone());
    }
    out.into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

fn direct_map(
    out_members: &[VarRef],
    forms: &BTreeMap<VarRef, Linear>,
    fams: &BTreeMap<String, Vec<VarRef>>,
) -> Option<(String, Vec<Vec<f64>>)> {
    let mut input: Option<String> = None;
    for m in out_members {
        let (coeffs, k) = forms.get(m)?;
        if *k != 0.0 {
            return None;
        }
        for v in coeffs.keys() {
            v.index?;
            match &input {
                None => input = Some(v.name.clone()),
                Some(f) if *f == v.name => {}
                Some(_) => return None,
            }
        }
    }
    let input = input?;
    let cols = fams.get(&input)?;
    let matrix = out_members
        .iter()
        .map(|m| {
            let coeffs = &forms[m].0;
            cols.iter()
                .map(|c| coeffs.get(c).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();
    Some((input, matrix))
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..b.first().map_or(0, Vec::len))
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

/// Linear maps between families; each map whose input family is itself
/// linear is followed by that map and by their composition.
fn linear_maps(eqs: &[(VarRef, &Expr)], declared: &[VarRef]) -> Vec<LinearMap> {
    let forms: BTreeMap<VarRef, Linear> = eqs
        .iter()
        .filter_map(|(v, e)| Some((v.clone(), linear_form(e)?)))
        .collect();
    let fams = families(declared);
    let outputs = families(&eqs.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>());
    let mut direct: BTreeMap<String, (String, Vec<Vec<f64>>)> = BTreeMap::new();
    for (name, members) in &outputs {
        if fams.get(name).map(Vec::len) != Some(members.len()) {
            continue;
        }
        if let Some(m) = direct_map(members, &forms, &fams) {
            direct.insert(name.clone(), m);
        }
    }
    // outputs nobody else reads come first
    let inputs: BTreeSet<&String> = direct.values().map(|(i, _)| i).collect();
    let mut order: Vec<&String> = direct.keys().filter(|k| !inputs.contains(k)).collect();
    order.extend(direct.keys().filter(|k| inputs.contains(k)));
    let mut out = vec![];
    let mut emitted = BTreeSet::new();
    for f in order {
        let (g, a) = &direct[f];
        if emitted.insert(f.clone()) {
            out.push(LinearMap::new(f, g, false, a.clone()));
        }
        if let Some((h, b)) = direct.get(g) {
            if emitted.insert(g.clone()) {
                out.push(LinearMap::new(g, h, false, b.clone()));
            }
            out.push(LinearMap::new(f, h, true, matmul(a, b)));
        }
    }
    out
}

/// Plain-text table for the command line.
pub fn render_table(m: &Metrics) -> String {
    let width = m
        .equations
        .iter()
        .map(|e| e.variable.len())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut s = format!("{:<width$}  nodes\n", "variable");
    for e in &m.equations {
        s.push_str(&format!("{:<width$}  {}\n", e.variable, e.nodes));
    }
    s.push_str(&format!("{:<width$}  {}\n", "total", m.total_nodes));
    for l in &m.linear_maps {
        let rows = l.matrix.len();
        let cols = l.matrix.first().map_or(0, Vec::len);
        let kind = if l.composed { "composed" } else { "direct" };
        s.push_str(&format!(
            "linear {} {rows}x{cols} nnz {} ({kind})\n",
            l.label(),
            l.nnz
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn linear_forms() {
        let e = Expr::add(
            Expr::mul(Expr::real(2.0), Expr::member("X", 1)),
            Expr::sub(Expr::member("X", 2), Expr::neg(Expr::member("X", 1))),
        );
        let (c, k) = linear_form(&e).unwrap();
        assert_eq!(c[&VarRef::indexed("X", 1)], 3.0);
        assert_eq!(c[&VarRef::indexed("X", 2)], 1.0);
        assert_eq!(k, 0.0);
        let sq = Expr::mul(Expr::member("X", 1), Expr::member("X", 1));
        assert!(linear_form(&sq).is_none());
    }

    #[test]
    fn matrix_chain_counts() {
        let m = model_metrics(&zoo::matrix_chain().scm);
        let nnz: Vec<(String, usize)> = m.linear_maps.iter().map(|l| (l.label(), l.nnz)).collect();
        assert_eq!(
            nnz,
            vec![("Z<-Y".into(), 3), ("Y<-X".into(), 2), ("Z<-X".into(), 6)]
        );
        // C = A x B by hand
        let c = &m.linear_maps[2].matrix;
        assert_eq!(c, &vec![vec![0.0, 1.0, 1.0]; 3]);
    }

    #[test]
    fn single_constant_model() {
        let mut s = Scm::new("k");
        s.add_endogenous(
            VarRef::scalar("K"),
            crate::expr::Domain::Boolean,
            Expr::bool(true),
        );
        assert_eq!(model_metrics(&s).total_nodes, 1);
    }
}
