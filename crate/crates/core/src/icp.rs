//! Non-linear invariant causal prediction by exhaustive subset search.
//!
//! Every conditioning set `S` (the empty set included) is tested for
//! `Y ⊥ E | S` with the conditional G-test; the estimate is the intersection
//! of all accepted sets.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::icscm::{conditional_pvalue, validate_alpha};
use crate::stats::DofRule;

/// Largest number of conditional tests a fit will run.
pub const MAX_TESTS: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpConfig {
    pub alpha: f64,
    /// Only subsets up to this size are tested.
    pub max_subset_size: Option<usize>,
    /// Degrees-of-freedom convention of the conditional G-test. The full
    /// product is the default; it is what makes large, sparse conditioning
    /// sets lose power.
    #[serde(default = "full_dof")]
    pub dof_rule: DofRule,
}

fn full_dof() -> DofRule {
    DofRule::Full
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_subset_size: None,
            dof_rule: DofRule::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpReport {
    pub selected: BTreeSet<usize>,
    /// Accepted subsets with their p-values, in enumeration order.
    pub accepted: Vec<(Vec<usize>, f64)>,
    pub n_tests: u64,
}

/// Number of subsets of `d` features with at most `cap` elements.
pub fn subset_count(d: usize, cap: Option<usize>) -> u64 {
    let cap = cap.unwrap_or(d).min(d);
    let mut total = 0u64;
    let mut binom = 1u64;
    for k in 0..=cap {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul((d - k) as u64) / (k as u64 + 1);
    }
    total
}

/// Subsets of `0..d` ordered by size, then lexicographically.
pub fn enumerate_subsets(d: usize, cap: Option<usize>) -> Vec<Vec<usize>> {
    let cap = cap.unwrap_or(d).min(d);
    let mut out = Vec::new();
    for k in 0..=cap {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.clone());
            // advance to the next k-combination
            let Some(pos) = (0..k).rev().find(|&i| idx[i] < d - k + i) else {
                break;
            };
            idx[pos] += 1;
            for i in pos + 1..k {
                idx[i] = idx[i - 1] + 1;
            }
        }
    }
    out
}

pub fn icp_fit(data: &Dataset, config: &IcpConfig) -> Result<IcpReport> {
    validate_alpha(config.alpha)?;
    if data.distinct_envs() < 2 {
        return Err(Error::Config(
            "invariance cannot be tested with fewer than two environments".into(),
        ));
    }
    let d = data.n_features();
    let n_tests = subset_count(d, config.max_subset_size);
    if n_tests > MAX_TESTS {
        return Err(Error::Infeasible(format!(
            "ICP over {d} features needs {n_tests} conditional tests (limit {MAX_TESTS}); set a subset-size cap"
        )));
    }
    let subsets = enumerate_subsets(d, config.max_subset_size);
    let pvalues: Vec<f64> = subsets
        .par_iter()
        .map(|s| conditional_pvalue(data, s, config.dof_rule))
        .collect();
    let accepted: Vec<(Vec<usize>, f64)> = subsets
        .into_iter()
        .zip(pvalues)
        .filter(|(_, p)| *p > config.alpha)
        .collect();
    let selected = intersect(accepted.iter().map(|(s, _)| s.as_slice()));
    Ok(IcpReport {
        selected,
        accepted,
        n_tests,
    })
}

/// Intersection of the given sets; empty when there are none.
fn intersect<'a>(mut sets: impl Iterator<Item = &'a [usize]>) -> BTreeSet<usize> {
    let Some(first) = sets.next() else {
        return BTreeSet::new();
    };
    let mut acc: BTreeSet<usize> = first.iter().copied().collect();
    for s in sets {
        acc.retain(|f| s.contains(f));
    }
    acc
}
