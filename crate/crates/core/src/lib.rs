// SPDX-License-Identifier: Apache-2.0

//! Consolidation of structural causal models under perfect interventions.

// `!(lo <= hi)` is meant to be true for NaN bounds.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod consolidation;
pub mod document;
pub mod dot;
pub mod evaluation;
pub mod expr;
pub mod metrics;
pub mod partition;
pub mod scm;
pub mod verification;
pub mod zoo;
