// SPDX-License-Identifier: Apache-2.0

//! JSON documents for models, partitions and consolidated models.
//!
//! Writing is deterministic (pretty-printed, trailing newline), so a
//! document that was loaded and written again is byte-identical.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::consolidation::{Ccv, CcvTarget, Component, CompressionReport, ConsolidatedScm};
use crate::expr::{
    expr_from_json, expr_to_json, value_from_json, value_to_json, Domain, JsonError, Value, VarRef,
};
use crate::partition::{InputSource, LocalInput, Partition, SubScm};
use crate::scm::{
    Atom, Endogenous, ExoDistribution, Exogenous, InterventionSet, InterventionSpace, InversePair,
    Scm,
};

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: JsonError,
    },
    #[error("{0}")]
    Invalid(String),
}

impl From<serde_json::Error> for DocumentError {
    fn from(e: serde_json::Error) -> Self {
        DocumentError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> DocumentError {
    DocumentError::Invalid(msg.into())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum DomainDoc {
    Boolean,
    Int {
        lo: i64,
        hi: i64,
    },
    Symbolic {
        symbols: Vec<String>,
    },
    Real {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
}

impl DomainDoc {
    fn from_domain(d: &Domain) -> Self {
        match d {
            Domain::Boolean => DomainDoc::Boolean,
            Domain::FiniteInt { lo, hi } => DomainDoc::Int { lo: *lo, hi: *hi },
            Domain::Symbolic(s) => DomainDoc::Symbolic { symbols: s.clone() },
            Domain::Real { bounds } => DomainDoc::Real {
                lo: bounds.map(|b| b.0),
                hi: bounds.map(|b| b.1),
            },
        }
    }

    fn to_domain(&self) -> Result<Domain, DocumentError> {
        Ok(match self {
            DomainDoc::Boolean => Domain::Boolean,
            DomainDoc::Int { lo, hi } => Domain::FiniteInt { lo: *lo, hi: *hi },
            DomainDoc::Symbolic { symbols } => Domain::Symbolic(symbols.clone()),
            DomainDoc::Real { lo: None, hi: None } => Domain::real(),
            DomainDoc::Real {
                lo: Some(lo),
                hi: Some(hi),
            } => Domain::interval(*lo, *hi),
            DomainDoc::Real { .. } => {
                return Err(invalid("a real interval needs both 'lo' and 'hi'"))
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DistDoc {
    PointMass { value: Json },
    UniformFinite { values: Vec<Json> },
    Normal { mean: f64, variance: f64 },
    UniformReal { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
}

fn value_in(j: &Json, domain: Option<&Domain>, ctx: &str) -> Result<Value, DocumentError> {
    let v = value_from_json(j).map_err(|source| DocumentError::Expr {
        context: ctx.to_string(),
        source,
    })?;
    // an integer literal may stand for a real; the domain restores the type
    Ok(domain.and_then(|d| d.coerce(v.clone())).unwrap_or(v))
}

impl DistDoc {
    fn from_dist(d: &ExoDistribution) -> Self {
        match d {
            ExoDistribution::PointMass(v) => DistDoc::PointMass {
                value: value_to_json(v),
            },
            ExoDistribution::UniformFinite(vs) => DistDoc::UniformFinite {
                values: vs.iter().map(value_to_json).collect(),
            },
            ExoDistribution::Normal { mean, variance } => DistDoc::Normal {
                mean: *mean,
                variance: *variance,
            },
            ExoDistribution::UniformReal { lo, hi } => DistDoc::UniformReal { lo: *lo, hi: *hi },
            ExoDistribution::Bernoulli(p) => DistDoc::Bernoulli { p: *p },
        }
    }

    fn to_dist(&self, domain: &Domain, ctx: &str) -> Result<ExoDistribution, DocumentError> {
        Ok(match self {
            DistDoc::PointMass { value } => {
                ExoDistribution::PointMass(value_in(value, Some(domain), ctx)?)
            }
            DistDoc::UniformFinite { values } => ExoDistribution::UniformFinite(
                values
                    .iter()
                    .map(|v| value_in(v, Some(domain), ctx))
                    .collect::<Result<_, _>>()?,
            ),
            DistDoc::Normal { mean, variance } => ExoDistribution::Normal {
                mean: *mean,
                variance: *variance,
            },
            DistDoc::UniformReal { lo, hi } => ExoDistribution::UniformReal { lo: *lo, hi: *hi },
            DistDoc::Bernoulli { p } => ExoDistribution::Bernoulli(*p),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExoDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<i64>,
    domain: DomainDoc,
    dist: DistDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndoDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<i64>,
    domain: DomainDoc,
    eq: Json,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomDoc {
    var: String,
    values: Vec<Json>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
enum SpaceDoc {
    Powerset { atoms: Vec<AtomDoc> },
    Singleton { atoms: Vec<AtomDoc> },
    Explicit { sets: Vec<BTreeMap<String, Json>> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InversePairDoc {
    forward: Json,
    inverse: Json,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    name: String,
    exogenous: Vec<ExoDoc>,
    endogenous: Vec<EndoDoc>,
    interventions: SpaceDoc,
    #[serde(default)]
    inverse_pairs: Vec<InversePairDoc>,
}

/// Resolves display names against the variables a document declares.
struct Names {
    known: BTreeMap<String, (VarRef, Domain)>,
}

impl Names {
    fn new() -> Self {
        Names {
            known: BTreeMap::new(),
        }
    }

    fn declare(&mut self, var: &VarRef, domain: &Domain) {
        self.known
            .insert(var.to_string(), (var.clone(), domain.clone()));
    }

    fn var(&self, name: &str) -> VarRef {
        self.known
            .get(name)
            .map(|(v, _)| v.clone())
            .unwrap_or_else(|| VarRef::parse(name))
    }

    fn domain(&self, name: &str) -> Option<&Domain> {
        self.known.get(name).map(|(_, d)| d)
    }
}

fn var_of(name: &str, index: Option<i64>) -> VarRef {
    VarRef {
        name: name.to_string(),
        index,
    }
}

fn expr_in(j: &Json, ctx: impl Into<String>) -> Result<crate::expr::Expr, DocumentError> {
    expr_from_json(j).map_err(|source| DocumentError::Expr {
        context: ctx.into(),
        source,
    })
}

fn exo_to_doc(e: &Exogenous) -> ExoDoc {
    ExoDoc {
        name: e.var.name.clone(),
        index: e.var.index,
        domain: DomainDoc::from_domain(&e.domain),
        dist: DistDoc::from_dist(&e.dist),
    }
}

fn exo_from_doc(d: &ExoDoc) -> Result<Exogenous, DocumentError> {
    let var = var_of(&d.name, d.index);
    let domain = d.domain.to_domain()?;
    let dist = d.dist.to_dist(&domain, &var.to_string())?;
    Ok(Exogenous { var, domain, dist })
}

fn endo_to_doc(e: &Endogenous) -> EndoDoc {
    EndoDoc {
        name: e.var.name.clone(),
        index: e.var.index,
        domain: DomainDoc::from_domain(&e.domain),
        eq: expr_to_json(&e.eq),
    }
}

fn endo_from_doc(d: &EndoDoc) -> Result<Endogenous, DocumentError> {
    let var = var_of(&d.name, d.index);
    Ok(Endogenous {
        domain: d.domain.to_domain()?,
        eq: expr_in(&d.eq, format!("equation of {var}"))?,
        var,
    })
}

fn atoms_to_doc(atoms: &[Atom]) -> Vec<AtomDoc> {
    atoms
        .iter()
        .map(|a| AtomDoc {
            var: a.var.to_string(),
            values: a.values.iter().map(value_to_json).collect(),
        })
        .collect()
}

fn space_to_doc(s: &InterventionSpace) -> SpaceDoc {
    match s {
        InterventionSpace::PowerSet(a) => SpaceDoc::Powerset {
            atoms: atoms_to_doc(a),
        },
        InterventionSpace::Singleton(a) => SpaceDoc::Singleton {
            atoms: atoms_to_doc(a),
        },
        InterventionSpace::Explicit(sets) => SpaceDoc::Explicit {
            sets: sets
                .iter()
                .map(|i| {
                    i.iter()
                        .map(|(v, x)| (v.to_string(), value_to_json(x)))
                        .collect()
                })
                .collect(),
        },
    }
}

fn space_from_doc(d: &SpaceDoc, names: &Names) -> Result<InterventionSpace, DocumentError> {
    let atoms = |a: &[AtomDoc]| -> Result<Vec<Atom>, DocumentError> {
        a.iter()
            .map(|a| {
                let domain = names.domain(&a.var);
                let values = a
                    .values
                    .iter()
                    .map(|v| value_in(v, domain, &a.var))
                    .collect::<Result<_, _>>()?;
                Ok(Atom::new(names.var(&a.var), values))
            })
            .collect()
    };
    Ok(match d {
        SpaceDoc::Powerset { atoms: a } => InterventionSpace::PowerSet(atoms(a)?),
        SpaceDoc::Singleton { atoms: a } => InterventionSpace::Singleton(atoms(a)?),
        SpaceDoc::Explicit { sets } => InterventionSpace::Explicit(
            sets.iter()
                .map(|set| {
                    let mut i = InterventionSet::new();
                    for (k, v) in set {
                        i.insert(names.var(k), value_in(v, names.domain(k), k)?);
                    }
                    Ok(i)
                })
                .collect::<Result<_, DocumentError>>()?,
        ),
    })
}

fn pairs_to_doc(p: &[InversePair]) -> Vec<InversePairDoc> {
    p.iter()
        .map(|p| InversePairDoc {
            forward: expr_to_json(&p.forward),
            inverse: expr_to_json(&p.inverse),
        })
        .collect()
}

fn pairs_from_doc(p: &[InversePairDoc]) -> Result<Vec<InversePair>, DocumentError> {
    p.iter()
        .map(|p| {
            Ok(InversePair {
                forward: expr_in(&p.forward, "inverse pair")?,
                inverse: expr_in(&p.inverse, "inverse pair")?,
            })
        })
        .collect()
}

/// Parses without serde_json's nesting limit; inlined mechanisms nest
/// deeply.
fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, DocumentError> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let v = T::deserialize(&mut de)?;
    de.end()?;
    Ok(v)
}

fn render<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

pub fn model_to_string(scm: &Scm) -> String {
    render(&ModelDoc {
        name: scm.name.clone(),
        exogenous: scm.exogenous.iter().map(exo_to_doc).collect(),
        endogenous: scm.endogenous.iter().map(endo_to_doc).collect(),
        interventions: space_to_doc(&scm.interventions),
        inverse_pairs: pairs_to_doc(&scm.inverse_pairs),
    })
}

/// Parses a model document. The model is not validated.
pub fn model_from_str(text: &str) -> Result<Scm, DocumentError> {
    let doc: ModelDoc = parse(text)?;
    let mut scm = Scm::new(doc.name);
    let mut names = Names::new();
    for x in &doc.exogenous {
        let e = exo_from_doc(x)?;
        names.declare(&e.var, &e.domain);
        scm.exogenous.push(e);
    }
    for x in &doc.endogenous {
        let e = endo_from_doc(x)?;
        names.declare(&e.var, &e.domain);
        scm.endogenous.push(e);
    }
    scm.interventions = space_from_doc(&doc.interventions, &names)?;
    scm.inverse_pairs = pairs_from_doc(&doc.inverse_pairs)?;
    Ok(scm)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionDoc {
    clusters: Vec<Vec<String>>,
}

pub fn partition_to_string(p: &Partition) -> String {
    render(&PartitionDoc {
        clusters: p
            .clusters
            .iter()
            .map(|c| c.iter().map(VarRef::to_string).collect())
            .collect(),
    })
}

/// Parses a partition document, resolving names against `scm`.
pub fn partition_from_str(text: &str, scm: &Scm) -> Result<Partition, DocumentError> {
    let doc: PartitionDoc = parse(text)?;
    Ok(Partition::new(
        doc.clusters
            .iter()
            .map(|c| {
                c.iter()
                    .map(|n| scm.resolve(n).unwrap_or_else(|| VarRef::parse(n)))
                    .collect()
            })
            .collect(),
    ))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<i64>,
    domain: DomainDoc,
    rho: Json,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<i64>,
    domain: DomainDoc,
    /// Absent for inputs computed by another cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dist: Option<DistDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ComponentDoc {
    Ccv {
        cluster_id: usize,
        cluster: Vec<String>,
        local_exogenous: Vec<String>,
        interventions: SpaceDoc,
        targets: Vec<TargetDoc>,
    },
    Passthrough {
        cluster_id: usize,
        inputs: Vec<InputDoc>,
        equations: Vec<EndoDoc>,
        interventions: SpaceDoc,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsolidatedDoc {
    name: String,
    exogenous: Vec<ExoDoc>,
    interventions: SpaceDoc,
    #[serde(default)]
    inverse_pairs: Vec<InversePairDoc>,
    targets: Vec<String>,
    components: Vec<ComponentDoc>,
    report: CompressionReport,
}

fn names_of<'a>(vs: impl IntoIterator<Item = &'a VarRef>) -> Vec<String> {
    vs.into_iter().map(VarRef::to_string).collect()
}

fn component_to_doc(c: &Component) -> ComponentDoc {
    match c {
        Component::Ccv(ccv) => ComponentDoc::Ccv {
            cluster_id: ccv.cluster_id,
            cluster: names_of(&ccv.cluster),
            local_exogenous: names_of(&ccv.local_exogenous),
            interventions: space_to_doc(&ccv.space),
            targets: ccv
                .targets
                .iter()
                .map(|t| TargetDoc {
                    name: t.var.name.clone(),
                    index: t.var.index,
                    domain: DomainDoc::from_domain(&t.domain),
                    rho: expr_to_json(&t.rho),
                })
                .collect(),
        },
        Component::Passthrough { cluster_id, sub } => ComponentDoc::Passthrough {
            cluster_id: *cluster_id,
            inputs: sub
                .inputs
                .iter()
                .map(|i| InputDoc {
                    name: i.var.name.clone(),
                    index: i.var.index,
                    domain: DomainDoc::from_domain(&i.domain),
                    dist: match &i.source {
                        InputSource::Exogenous(d) => Some(DistDoc::from_dist(d)),
                        InputSource::Boundary => None,
                    },
                })
                .collect(),
            equations: sub.equations.iter().map(endo_to_doc).collect(),
            interventions: space_to_doc(&sub.space),
        },
    }
}

pub fn consolidated_to_string(c: &ConsolidatedScm) -> String {
    render(&ConsolidatedDoc {
        name: c.name.clone(),
        exogenous: c.exogenous.iter().map(exo_to_doc).collect(),
        interventions: space_to_doc(&c.space),
        inverse_pairs: pairs_to_doc(&c.inverse_pairs),
        targets: names_of(&c.targets),
        components: c.components.iter().map(component_to_doc).collect(),
        report: c.report.clone(),
    })
}

pub fn consolidated_from_str(text: &str) -> Result<ConsolidatedScm, DocumentError> {
    let doc: ConsolidatedDoc = parse(text)?;
    let mut names = Names::new();
    let exogenous = doc
        .exogenous
        .iter()
        .map(exo_from_doc)
        .collect::<Result<Vec<_>, _>>()?;
    for e in &exogenous {
        names.declare(&e.var, &e.domain);
    }
    // declare every variable first so spaces can be resolved afterwards
    for c in &doc.components {
        match c {
            ComponentDoc::Ccv { targets, .. } => {
                for t in targets {
                    names.declare(&var_of(&t.name, t.index), &t.domain.to_domain()?);
                }
            }
            ComponentDoc::Passthrough {
                inputs, equations, ..
            } => {
                for i in inputs {
                    names.declare(&var_of(&i.name, i.index), &i.domain.to_domain()?);
                }
                for e in equations {
                    names.declare(&var_of(&e.name, e.index), &e.domain.to_domain()?);
                }
            }
        }
    }
    let mut components = vec![];
    for c in &doc.components {
        components.push(match c {
            ComponentDoc::Ccv {
                cluster_id,
                cluster,
                local_exogenous,
                interventions,
                targets,
            } => Component::Ccv(Ccv {
                cluster_id: *cluster_id,
                cluster: cluster.iter().map(|n| names.var(n)).collect(),
                local_exogenous: local_exogenous.iter().map(|n| names.var(n)).collect(),
                space: space_from_doc(interventions, &names)?,
                targets: targets
                    .iter()
                    .map(|t| {
                        let var = var_of(&t.name, t.index);
                        Ok(CcvTarget {
                            domain: t.domain.to_domain()?,
                            rho: expr_in(&t.rho, format!("mechanism of {var}"))?,
                            var,
                        })
                    })
                    .collect::<Result<_, DocumentError>>()?,
            }),
            ComponentDoc::Passthrough {
                cluster_id,
                inputs,
                equations,
                interventions,
            } => {
                let equations = equations
                    .iter()
                    .map(endo_from_doc)
                    .collect::<Result<Vec<_>, _>>()?;
                let inputs = inputs
                    .iter()
                    .map(|i| {
                        let var = var_of(&i.name, i.index);
                        let domain = i.domain.to_domain()?;
                        let source = match &i.dist {
                            Some(d) => {
                                InputSource::Exogenous(d.to_dist(&domain, &var.to_string())?)
                            }
                            None => InputSource::Boundary,
                        };
                        Ok(LocalInput {
                            var,
                            domain,
                            source,
                        })
                    })
                    .collect::<Result<_, DocumentError>>()?;
                Component::Passthrough {
                    cluster_id: *cluster_id,
                    sub: SubScm {
                        cluster: equations
                            .iter()
                            .map(|e| e.var.clone())
                            .collect::<BTreeSet<_>>(),
                        inputs,
                        equations,
                        space: space_from_doc(interventions, &names)?,
                    },
                }
            }
        });
    }
    Ok(ConsolidatedScm {
        name: doc.name,
        exogenous,
        components,
        targets: doc.targets.iter().map(|n| names.var(n)).collect(),
        space: space_from_doc(&doc.interventions, &names)?,
        inverse_pairs: pairs_from_doc(&doc.inverse_pairs)?,
        report: doc.report,
    })
}

/// Whether a JSON document looks like a consolidated model.
pub fn is_consolidated(text: &str) -> bool {
    parse::<Json>(text)
        .ok()
        .and_then(|j| j.get("components").map(|_| ()))
        .is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consolidation::{consolidate, PassConfig};
    use crate::zoo;

    #[test]
    fn zoo_models_round_trip() {
        for name in zoo::MODELS {
            let e = zoo::entry(name, None).unwrap();
            let text = model_to_string(&e.scm);
            let back = model_from_str(&text).unwrap();
            assert_eq!(back, e.scm, "{name}");
            assert_eq!(model_to_string(&back), text, "{name}");
            let p = partition_to_string(&e.partition);
            let pb = partition_from_str(&p, &back).unwrap();
            assert_eq!(pb, e.partition, "{name}");
            assert_eq!(partition_to_string(&pb), p);
        }
    }

    #[test]
    fn consolidated_round_trip() {
        for name in ["step_by_step", "platformer", "fig2_chain"] {
            let e = zoo::entry(name, None).unwrap();
            let c = consolidate(
                &e.scm,
                &e.partition,
                &e.targets,
                e.clusters.as_ref(),
                &PassConfig::default(),
            )
            .unwrap();
            let text = consolidated_to_string(&c);
            assert!(is_consolidated(&text));
            let back = consolidated_from_str(&text).unwrap();
            assert_eq!(back, c, "{name}");
            assert_eq!(consolidated_to_string(&back), text);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = model_to_string(&zoo::step_by_step().scm).replacen("\"name\"", "\"nmae\"", 1);
        assert!(matches!(
            model_from_str(&text),
            Err(DocumentError::Parse { .. })
        ));
        let err = model_from_str("{\n  \"name\": 3\n}").unwrap_err();
        let DocumentError::Parse { line, .. } = err else {
            panic!()
        };
        assert_eq!(line, 2);
    }
}
