//! Invariant Causal Set Covering Machine.
//!
//! The greedy loop of [`crate::scm`] with two changes:
//!
//! * a candidate is only eligible when `Y` and `E` look independent in the
//!   negative leaf it would create (the negatives it covers plus the
//!   positives it misclassifies);
//! * rules keep being added until `Y` and `E` look independent on the
//!   samples that reach the positive leaf.
//!
//! [`prune`] then drops every selected feature whose removal still leaves
//! `Y ⊥ E` given the remaining selected features. Such a feature cannot be a
//! causal parent of `Y`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Conjunction, Dataset, FitReport, IterationLog, Rule, StopReason};
use crate::error::{Error, Result};
use crate::scm::{argmax, check_rules, into_disjunction, RuleScan, Unsettled};
use crate::stats::{stratified_gtest, DofRule, TestMethod, DEFAULT_MIN_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcscmConfig {
    pub p: f64,
    pub max_rules: usize,
    /// Independence threshold shared by leaf tests, the stopping test and pruning.
    pub alpha: f64,
    /// Leaves with fewer samples are not tested (`p = 1`).
    pub min_leaf: usize,
    /// Test used for the leaf and stopping criteria. Pruning always uses the
    /// conditional G-test.
    pub test_method: TestMethod,
    pub prune: bool,
}

impl Default for IcscmConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            max_rules: 10,
            alpha: 0.05,
            min_leaf: DEFAULT_MIN_SAMPLES,
            test_method: TestMethod::Chi2,
            prune: true,
        }
    }
}

impl IcscmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(Error::Config(format!(
                "p must be a positive real, got {}",
                self.p
            )));
        }
        if self.max_rules == 0 {
            return Err(Error::Config("max_rules must be at least 1".into()));
        }
        validate_alpha(self.alpha)
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// p-value of `Y ⊥ E` over the samples `rule` would send to its negative
/// leaf, i.e. `negatives` and `positives` on which the rule is 0. Leaves
/// smaller than `min_leaf` return 1.
pub fn leaf_invariance_pvalue(
    data: &Dataset,
    rule: &Rule,
    negatives: &[usize],
    positives: &[usize],
    method: TestMethod,
    min_leaf: usize,
) -> f64 {
    let state = Unsettled {
        negatives: negatives.to_vec(),
        positives: positives.to_vec(),
    };
    scan_with_leaf(&state, data, rule, method, min_leaf).1
}

/// `(scan, leaf p-value)` for one candidate.
fn scan_with_leaf(
    state: &Unsettled,
    data: &Dataset,
    rule: &Rule,
    method: TestMethod,
    min_leaf: usize,
) -> (RuleScan, f64) {
    let scan = state.scan(data, rule, true);
    let leaf = scan.leaf.as_ref().expect("leaf requested");
    let p = if (leaf.total() as usize) < min_leaf {
        1.0
    } else {
        leaf.test(method).p_value
    };
    (scan, p)
}

pub fn icscm_fit(data: &Dataset, config: &IcscmConfig, rules: &[Rule]) -> Result<FitReport> {
    config.validate()?;
    if rules.is_empty() {
        return Err(Error::Config("candidate rule set is empty".into()));
    }
    check_rules(data, rules)?;
    if data.distinct_envs() < 2 {
        return Err(Error::Config(
            "invariance cannot be tested with fewer than two environments".into(),
        ));
    }

    let mut state = Unsettled::all(data);
    let mut used = vec![false; rules.len()];
    let mut model = Vec::new();
    let mut log: Vec<IterationLog> = Vec::new();
    // No test has run yet: dependence is assumed until the positive leaf
    // passes the stopping test.
    let mut gamma = 0.0;
    let stop = loop {
        if gamma > config.alpha {
            break StopReason::InvarianceReached;
        }
        if state.negatives.is_empty() {
            break StopReason::NoNegativesLeft;
        }
        if model.len() >= config.max_rules {
            break StopReason::MaxRules;
        }
        let scored: Vec<Option<(f64, f64)>> = rules
            .par_iter()
            .zip(used.par_iter())
            .map(|(rule, &u)| {
                if u {
                    return None;
                }
                let (scan, pi) =
                    scan_with_leaf(&state, data, rule, config.test_method, config.min_leaf);
                Some((scan.utility(config.p), pi))
            })
            .collect();
        let eligible: Vec<Option<f64>> = scored
            .iter()
            .map(|s| s.and_then(|(u, pi)| (pi > config.alpha).then_some(u)))
            .collect();
        let Some(best) = argmax(&eligible) else {
            break StopReason::NoValidRule;
        };
        let rule = rules[best];
        let (utility, pi) = scored[best].expect("eligible rule was scored");
        used[best] = true;
        state.apply(data, &rule);
        model.push(rule);
        gamma = if state.len() < config.min_leaf {
            1.0
        } else {
            state.table(data).test(config.test_method).p_value
        };
        log.push(IterationLog {
            rule,
            utility,
            leaf_p_value: Some(pi),
            remaining_p_value: Some(gamma),
        });
    };

    let mut report = FitReport::new(Conjunction::new(model), log, stop);
    if config.prune && !report.model.is_empty() {
        let pruned = prune(&report.model, data, config.alpha)?;
        report.pruned = report
            .model
            .rules
            .iter()
            .filter(|r| !pruned.rules.contains(r))
            .copied()
            .collect();
        report.selected_features = pruned.features();
        report.model = pruned;
    }
    Ok(report)
}

/// Fits a disjunction: the invariant learner on negated labels, with the
/// resulting rules negated. Independence of `Y` and `E` is unaffected by
/// relabelling, so every test sees the same evidence.
pub fn icscm_fit_disjunction(
    data: &Dataset,
    config: &IcscmConfig,
    rules: &[Rule],
) -> Result<FitReport> {
    icscm_fit(&data.with_negated_labels(), config, rules).map(into_disjunction)
}

/// Removes rules on features `f` for which `Y ⊥ E | (selected \ f)` is not
/// rejected at level `alpha` by the conditional G-test on all of `data`.
///
/// Features are examined in model order; after each removal the scan
/// restarts, since the conditioning sets have changed. Stops at a full pass
/// without removals.
pub fn prune(model: &Conjunction, data: &Dataset, alpha: f64) -> Result<Conjunction> {
    validate_alpha(alpha)?;
    check_rules(data, &model.rules)?;
    let mut rules = model.rules.clone();
    'scan: loop {
        let mut features: Vec<usize> = Vec::new();
        for r in &rules {
            if !features.contains(&r.feature_index) {
                features.push(r.feature_index);
            }
        }
        for &f in &features {
            let rest: Vec<usize> = features.iter().copied().filter(|&g| g != f).collect();
            if removal_pvalue(data, &rest) > alpha {
                rules.retain(|r| r.feature_index != f);
                continue 'scan;
            }
        }
        break;
    }
    Ok(Conjunction {
        rules,
        disjunction: model.disjunction,
    })
}

/// p-value of `Y ⊥ E | conditioning`.
pub(crate) fn removal_pvalue(data: &Dataset, conditioning: &[usize]) -> f64 {
    conditional_pvalue(data, conditioning, DofRule::Observed)
}

pub(crate) fn conditional_pvalue(data: &Dataset, conditioning: &[usize], rule: DofRule) -> f64 {
    let (ids, n_slots) = data.strata(conditioning);
    let possible = 1u64
        .checked_shl(conditioning.len() as u32)
        .unwrap_or(u64::MAX);
    stratified_gtest(
        data.labels(),
        data.envs(),
        data.n_envs() as usize,
        n_slots,
        |i| ids[i],
        rule,
        possible,
    )
    .p_value
}
