//! Greedy Set Covering Machine for conjunctions of binary rules.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Conjunction, Dataset, FitReport, IterationLog, Rule, StopReason};
use crate::error::{Error, Result};
use crate::stats::ContingencyTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScmConfig {
    /// Weight of a misclassified positive against a covered negative.
    pub p: f64,
    /// Maximum number of rules in the conjunction.
    pub max_rules: usize,
}

impl Default for ScmConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            max_rules: 10,
        }
    }
}

impl ScmConfig {
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
        Ok(())
    }
}

/// Outcome of evaluating one rule on the still-unsettled samples.
#[derive(Debug, Clone)]
pub(crate) struct RuleScan {
    /// Negatives the rule sends to its negative leaf.
    pub covered: usize,
    /// Positives the rule sends to its negative leaf.
    pub errors: usize,
    /// `(y, e)` counts in the negative leaf, when requested.
    pub leaf: Option<ContingencyTable>,
}

impl RuleScan {
    pub fn utility(&self, p: f64) -> f64 {
        self.covered as f64 - p * self.errors as f64
    }
}

/// Negatives and positives whose prediction is not settled yet.
#[derive(Debug, Clone)]
pub(crate) struct Unsettled {
    pub negatives: Vec<usize>,
    pub positives: Vec<usize>,
}

impl Unsettled {
    pub fn all(data: &Dataset) -> Self {
        let (mut negatives, mut positives) = (Vec::new(), Vec::new());
        for (i, &y) in data.labels().iter().enumerate() {
            if y == 0 {
                negatives.push(i);
            } else {
                positives.push(i);
            }
        }
        Self {
            negatives,
            positives,
        }
    }

    pub fn scan(&self, data: &Dataset, rule: &Rule, with_leaf: bool) -> RuleScan {
        let col = data.column(rule.feature_index);
        let hit = |i: &&usize| col[**i] != rule.expected_value;
        let mut leaf = with_leaf.then(|| ContingencyTable::new(data.n_envs() as usize));
        let covered = self
            .negatives
            .iter()
            .filter(hit)
            .inspect(|&&i| add(&mut leaf, 0, data.envs()[i]))
            .count();
        let errors = self
            .positives
            .iter()
            .filter(hit)
            .inspect(|&&i| add(&mut leaf, 1, data.envs()[i]))
            .count();
        RuleScan {
            covered,
            errors,
            leaf,
        }
    }

    /// Drops the samples the rule settles as negative predictions.
    pub fn apply(&mut self, data: &Dataset, rule: &Rule) {
        let col = data.column(rule.feature_index);
        self.negatives.retain(|&i| col[i] == rule.expected_value);
        self.positives.retain(|&i| col[i] == rule.expected_value);
    }

    /// `(y, e)` counts over every unsettled sample.
    pub fn table(&self, data: &Dataset) -> ContingencyTable {
        let mut t = ContingencyTable::new(data.n_envs() as usize);
        let envs = data.envs();
        self.negatives.iter().for_each(|&i| t.add(0, envs[i]));
        self.positives.iter().for_each(|&i| t.add(1, envs[i]));
        t
    }

    pub fn len(&self) -> usize {
        self.negatives.len() + self.positives.len()
    }
}

#[inline]
fn add(leaf: &mut Option<ContingencyTable>, y: u8, e: u32) {
    if let Some(t) = leaf {
        t.add(y, e);
    }
}

/// Index of the maximum over `Some` scores; the lowest index wins ties.
pub(crate) fn argmax(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores.iter().enumerate() {
        if let Some(u) = *s {
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((k, u));
            }
        }
    }
    best.map(|(k, _)| k)
}

/// `|A| - p|B|` where `A` are the negatives and `B` the positives on which
/// `rule` evaluates to 0.
pub fn utility(
    data: &Dataset,
    rule: &Rule,
    negatives: &[usize],
    positives: &[usize],
    p: f64,
) -> f64 {
    let col = data.column(rule.feature_index);
    let covered = negatives
        .iter()
        .filter(|&&i| col[i] != rule.expected_value)
        .count();
    let errors = positives
        .iter()
        .filter(|&&i| col[i] != rule.expected_value)
        .count();
    covered as f64 - p * errors as f64
}

/// Greedy conjunction learner.
///
/// Each round appends the unused candidate of highest utility on the
/// unsettled samples, even when that utility is not positive, until no
/// negatives remain or `max_rules` rules are chosen.
pub fn scm_fit(data: &Dataset, config: &ScmConfig, rules: &[Rule]) -> Result<FitReport> {
    config.validate()?;
    if rules.is_empty() {
        return Err(Error::Config("candidate rule set is empty".into()));
    }
    check_rules(data, rules)?;
    let mut state = Unsettled::all(data);
    let mut used = vec![false; rules.len()];
    let mut model = Vec::new();
    let mut log = Vec::new();
    let stop = loop {
        if state.negatives.is_empty() {
            break StopReason::NoNegativesLeft;
        }
        if model.len() >= config.max_rules {
            break StopReason::MaxRules;
        }
        let scores: Vec<Option<f64>> = rules
            .par_iter()
            .zip(used.par_iter())
            .map(|(rule, &u)| (!u).then(|| state.scan(data, rule, false).utility(config.p)))
            .collect();
        let Some(best) = argmax(&scores) else {
            break StopReason::NoValidRule;
        };
        let rule = rules[best];
        used[best] = true;
        state.apply(data, &rule);
        model.push(rule);
        log.push(IterationLog {
            rule,
            utility: scores[best].unwrap_or_default(),
            leaf_p_value: None,
            remaining_p_value: None,
        });
    };
    Ok(FitReport::new(Conjunction::new(model), log, stop))
}

/// Learns a disjunction by fitting a conjunction to the negated labels and
/// negating its rules.
pub fn scm_fit_disjunction(
    data: &Dataset,
    config: &ScmConfig,
    rules: &[Rule],
) -> Result<FitReport> {
    scm_fit(&data.with_negated_labels(), config, rules).map(into_disjunction)
}

/// Converts a conjunction fitted on negated labels into the equivalent
/// disjunction on the original labels.
pub fn into_disjunction(mut report: FitReport) -> FitReport {
    let rules = report.model.rules.iter().map(Rule::negated).collect();
    report.model = Conjunction::disjunction(rules);
    report.pruned = report.pruned.iter().map(Rule::negated).collect();
    for it in &mut report.iterations {
        it.rule = it.rule.negated();
    }
    report
}

pub(crate) fn check_rules(data: &Dataset, rules: &[Rule]) -> Result<()> {
    match rules
        .iter()
        .find(|r| r.feature_index >= data.n_features() || r.expected_value > 1)
    {
        Some(r) => Err(Error::Input(format!(
            "candidate rule {r} does not fit a dataset of {} features",
            data.n_features()
        ))),
        None => Ok(()),
    }
}
