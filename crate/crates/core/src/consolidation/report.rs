// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

/// One attempted pass application.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassLogEntry {
    pub round: usize,
    pub pass: String,
    pub nodes_before: usize,
    pub nodes_after: usize,
    /// Equal, CounterExample, Inconclusive or Unchecked.
    pub verdict: String,
    pub accepted: bool,
}

/// How far the values of a variable are bounded at I = {}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageBound {
    pub variable: String,
    pub domain_size: Option<u64>,
    /// Size of the image of the structural function over its parents'
    /// declared domains.
    pub function_image: Option<u64>,
    /// Product of the effective image sizes of the parents.
    pub parent_bound: Option<u64>,
    /// Exact number of values taken, by enumeration.
    pub effective_image: Option<u64>,
    /// Minimum of the three bounds above.
    pub bound: Option<u64>,
}

/// Guards of a top-level case analysis that no parent value reaches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardReport {
    pub variable: String,
    /// Arms plus the default.
    pub guards: usize,
    pub unreachable: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterReport {
    pub cluster: usize,
    pub variables: Vec<String>,
    pub required: Vec<String>,
    pub local_exogenous: Vec<String>,
    pub atoms_before: usize,
    pub atoms_after: usize,
    /// Total size of the cluster's structural functions.
    pub equation_nodes: usize,
    /// Size of the inlined mechanism before any pass.
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub passes: Vec<PassLogEntry>,
    pub image_bounds: Vec<ImageBound>,
    pub guards: Vec<GuardReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionReport {
    pub clusters: Vec<ClusterReport>,
    /// Variables removed before consolidation because nothing needs them.
    pub marginalized: Vec<String>,
    /// Intervention atoms removed with them, as `do(V=v)`.
    pub dropped_atoms: Vec<String>,
}

impl CompressionReport {
    pub fn nodes_before(&self) -> usize {
        self.clusters.iter().map(|c| c.nodes_before).sum()
    }

    pub fn nodes_after(&self) -> usize {
        self.clusters.iter().map(|c| c.nodes_after).sum()
    }

    pub fn guards_eliminated(&self, variable: &str) -> usize {
        self.clusters
            .iter()
            .flat_map(|c| &c.guards)
            .filter(|g| g.variable == variable)
            .map(|g| g.unreachable)
            .sum()
    }
}
