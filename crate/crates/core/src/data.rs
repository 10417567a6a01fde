//! Datasets of binary features, equality rules, and conjunction/disjunction models.
//!
//! Features are stored column-major: every rule evaluation in the greedy
//! learners scans one feature column over a subset of sample indices.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary feature matrix with binary labels and environment ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    columns: Vec<Vec<u8>>,
    labels: Vec<u8>,
    envs: Vec<u32>,
    feature_names: Vec<String>,
    n_envs: u32,
}

impl Dataset {
    /// Builds a dataset from feature columns (`columns[j][i]` is feature `j`
    /// of sample `i`). Feature names default to `x0..x{d-1}`.
    pub fn from_columns(columns: Vec<Vec<u8>>, labels: Vec<u8>, envs: Vec<u32>) -> Result<Self> {
        let names = (0..columns.len()).map(|j| format!("x{j}")).collect();
        Self::with_names(columns, labels, envs, names)
    }

    pub fn with_names(
        columns: Vec<Vec<u8>>,
        labels: Vec<u8>,
        envs: Vec<u32>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let m = labels.len();
        if m == 0 {
            return Err(Error::Input("dataset needs at least one sample".into()));
        }
        if columns.is_empty() {
            return Err(Error::Input("dataset needs at least one feature".into()));
        }
        if feature_names.len() != columns.len() {
            return Err(Error::Input(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        if envs.len() != m {
            return Err(Error::Input(format!(
                "{} env ids for {m} labels",
                envs.len()
            )));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != m {
                return Err(Error::Input(format!(
                    "column {j} has {} rows, expected {m}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|&v| v > 1) {
                return Err(Error::Data {
                    row: i,
                    column: j,
                    message: format!("feature value {} is not 0/1", col[i]),
                });
            }
        }
        if let Some(i) = labels.iter().position(|&v| v > 1) {
            return Err(Error::Data {
                row: i,
                column: columns.len(),
                message: format!("label {} is not 0/1", labels[i]),
            });
        }
        let n_envs = envs.iter().copied().max().unwrap_or(0) + 1;
        Ok(Self {
            columns,
            labels,
            envs,
            feature_names,
            n_envs,
        })
    }

    /// Number of samples.
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    /// Number of features.
    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// One more than the largest environment id present.
    pub fn n_envs(&self) -> u32 {
        self.n_envs
    }

    /// Number of environment ids actually observed.
    pub fn distinct_envs(&self) -> usize {
        self.envs.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn column(&self, j: usize) -> &[u8] {
        &self.columns[j]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn envs(&self) -> &[u32] {
        &self.envs
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Copies out the feature row of sample `i`.
    pub fn row(&self, i: usize) -> Vec<u8> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Dense stratum index per sample for the joint value of `features`, and
    /// the number of strata indices in use (some may be empty).
    pub fn strata(&self, features: &[usize]) -> (Vec<usize>, usize) {
        let m = self.n_samples();
        if features.len() <= 16 {
            let mut ids = vec![0usize; m];
            for (bit, &j) in features.iter().enumerate() {
                for (id, &v) in ids.iter_mut().zip(&self.columns[j]) {
                    *id |= (v as usize) << bit;
                }
            }
            return (ids, 1 << features.len());
        }
        let mut index: std::collections::HashMap<Vec<u8>, usize> = std::collections::HashMap::new();
        let ids = (0..m)
            .map(|i| {
                let key: Vec<u8> = features.iter().map(|&j| self.columns[j][i]).collect();
                let next = index.len();
                *index.entry(key).or_insert(next)
            })
            .collect();
        (ids, index.len())
    }

    /// Same features and environments with every label flipped.
    pub fn with_negated_labels(&self) -> Self {
        Self {
            labels: self.labels.iter().map(|&y| 1 - y).collect(),
            ..self.clone()
        }
    }

    /// Reads the `x0,...,x{d-1},y,e` CSV format. Header cells other than the
    /// trailing `y,e` become feature names.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let width = header.len();
        if width < 3 || &header[width - 2] != "y" || &header[width - 1] != "e" {
            return Err(Error::Data {
                row: 0,
                column: width.saturating_sub(1),
                message: "header must end with `y,e` after at least one feature column".into(),
            });
        }
        let d = width - 2;
        let names: Vec<String> = header.iter().take(d).map(str::to_owned).collect();
        let mut columns = vec![Vec::new(); d];
        let mut labels = Vec::new();
        let mut envs = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            // header is line 1
            let row = r + 2;
            let record = record?;
            if record.len() != width {
                return Err(Error::Data {
                    row,
                    column: record.len().min(width),
                    message: format!("expected {width} fields, found {}", record.len()),
                });
            }
            for (j, field) in record.iter().enumerate() {
                if j == d + 1 {
                    let e: u32 = field.trim().parse().map_err(|_| Error::Data {
                        row,
                        column: j,
                        message: format!("environment id `{field}` is not a non-negative integer"),
                    })?;
                    envs.push(e);
                    continue;
                }
                let v = match field.trim() {
                    "0" => 0u8,
                    "1" => 1u8,
                    other => {
                        return Err(Error::Data {
                            row,
                            column: j,
                            message: format!("value `{other}` is not 0 or 1"),
                        })
                    }
                };
                if j == d {
                    labels.push(v);
                } else {
                    columns[j].push(v);
                }
            }
        }
        if labels.is_empty() {
            return Err(Error::Data {
                row: 2,
                column: 0,
                message: "no data rows".into(),
            });
        }
        Self::with_names(columns, labels, envs, names)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header: Vec<String> = self.feature_names.clone();
        header.push("y".into());
        header.push("e".into());
        w.write_record(&header)?;
        let mut line: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n_samples() {
            line.clear();
            line.extend(self.columns.iter().map(|c| c[i].to_string()));
            line.push(self.labels[i].to_string());
            line.push(self.envs[i].to_string());
            w.write_record(&line)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
        Self::read_csv(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// `x[feature_index] == expected_value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    pub feature_index: usize,
    pub expected_value: u8,
}

impl Rule {
    pub fn new(feature_index: usize, expected_value: u8) -> Self {
        debug_assert!(expected_value <= 1);
        Self {
            feature_index,
            expected_value,
        }
    }

    #[inline]
    pub fn evaluate(&self, x: &[u8]) -> u8 {
        u8::from(x[self.feature_index] == self.expected_value)
    }

    /// Value of the rule on sample `i` of `data`.
    #[inline]
    pub fn evaluate_at(&self, data: &Dataset, i: usize) -> u8 {
        u8::from(data.columns[self.feature_index][i] == self.expected_value)
    }

    /// Truth vector over every sample of `data`.
    pub fn evaluate_all(&self, data: &Dataset) -> Vec<u8> {
        data.column(self.feature_index)
            .iter()
            .map(|&v| u8::from(v == self.expected_value))
            .collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            feature_index: self.feature_index,
            expected_value: 1 - self.expected_value,
        }
    }

    pub fn display_with(&self, names: &[String]) -> String {
        match names.get(self.feature_index) {
            Some(name) => format!("{name}=={}", self.expected_value),
            None => self.to_string(),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}=={}", self.feature_index, self.expected_value)
    }
}

/// All equality rules `x_j == 1` and `x_j == 0`, skipping features that are
/// constant on `data` (their truth vectors cannot separate anything).
///
/// Order is `(x0==1, x0==0, x1==1, x1==0, ...)`; the greedy learners break
/// utility ties by this index.
pub fn candidate_rules(data: &Dataset) -> Vec<Rule> {
    let mut rules = Vec::with_capacity(2 * data.n_features());
    for j in 0..data.n_features() {
        let col = data.column(j);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            continue;
        }
        rules.push(Rule::new(j, 1));
        rules.push(Rule::new(j, 0));
    }
    rules
}

/// Ordered rules combined with AND, or with OR when `disjunction` is set.
///
/// The disjunction of `r_1..r_d` is stored as those rules and evaluated as
/// `NOT(AND of NOT r_i)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conjunction {
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub disjunction: bool,
}

impl Conjunction {
    pub fn new(rules: Vec<Rule>) -> Self {
        Self {
            rules,
            disjunction: false,
        }
    }

    pub fn disjunction(rules: Vec<Rule>) -> Self {
        Self {
            rules,
            disjunction: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn predict(&self, x: &[u8]) -> Result<u8> {
        if let Some(r) = self.rules.iter().find(|r| r.feature_index >= x.len()) {
            return Err(Error::Input(format!(
                "rule on feature {} applied to a row of {} features",
                r.feature_index,
                x.len()
            )));
        }
        if let Some(v) = x.iter().find(|&&v| v > 1) {
            return Err(Error::Input(format!("feature value {v} is not 0/1")));
        }
        Ok(self.predict_unchecked(|r| r.evaluate(x)))
    }

    fn predict_unchecked(&self, eval: impl Fn(&Rule) -> u8) -> u8 {
        if self.disjunction {
            1 - u8::from(self.rules.iter().all(|r| eval(&r.negated()) == 1))
        } else {
            u8::from(self.rules.iter().all(|r| eval(r) == 1))
        }
    }

    /// Predictions for every sample of `data`.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<u8>> {
        if let Some(r) = self
            .rules
            .iter()
            .find(|r| r.feature_index >= data.n_features())
        {
            return Err(Error::Input(format!(
                "rule on feature {} applied to a dataset of {} features",
                r.feature_index,
                data.n_features()
            )));
        }
        Ok((0..data.n_samples())
            .map(|i| self.predict_unchecked(|r| r.evaluate_at(data, i)))
            .collect())
    }

    /// Fraction of samples whose prediction differs from the label.
    pub fn training_error(&self, data: &Dataset) -> Result<f64> {
        let preds = self.predict_dataset(data)?;
        let wrong = preds
            .iter()
            .zip(data.labels())
            .filter(|(p, y)| p != y)
            .count();
        Ok(wrong as f64 / data.n_samples() as f64)
    }

    pub fn features(&self) -> BTreeSet<usize> {
        self.rules.iter().map(|r| r.feature_index).collect()
    }

    pub fn display_with(&self, names: &[String]) -> String {
        if self.rules.is_empty() {
            return if self.disjunction {
                "false".into()
            } else {
                "true".into()
            };
        }
        let op = if self.disjunction { " OR " } else { " AND " };
        self.rules
            .iter()
            .map(|r| r.display_with(names))
            .collect::<Vec<_>>()
            .join(op)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoNegativesLeft,
    MaxRules,
    InvarianceReached,
    NoValidRule,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::NoNegativesLeft => "no_negatives_left",
            StopReason::MaxRules => "max_rules",
            StopReason::InvarianceReached => "invariance_reached",
            StopReason::NoValidRule => "no_valid_rule",
        })
    }
}

/// One greedy step: the rule appended, its utility, and (for the invariant
/// learner) the p-value of its negative-leaf test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub rule: Rule,
    pub utility: f64,
    pub leaf_p_value: Option<f64>,
    /// Independence p-value on the samples still unsettled after this step.
    pub remaining_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: Conjunction,
    pub selected_features: BTreeSet<usize>,
    pub iterations: Vec<IterationLog>,
    pub stop_reason: StopReason,
    /// Rules removed by pruning, in removal order.
    #[serde(default)]
    pub pruned: Vec<Rule>,
}

impl FitReport {
    pub(crate) fn new(
        model: Conjunction,
        iterations: Vec<IterationLog>,
        stop_reason: StopReason,
    ) -> Self {
        Self {
            selected_features: model.features(),
            model,
            iterations,
            stop_reason,
            pruned: Vec::new(),
        }
    }

    /// Final stopping-test p-value, when one was computed.
    pub fn final_gamma(&self) -> Option<f64> {
        self.iterations.last().and_then(|it| it.remaining_p_value)
    }
}

/// On-disk model format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub mode: ModelMode,
    pub rules: Vec<Rule>,
    pub stop_reason: StopReason,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    Conjunction,
    Disjunction,
}

impl ModelDocument {
    pub fn from_report(report: &FitReport, feature_names: &[String]) -> Self {
        Self {
            mode: if report.model.disjunction {
                ModelMode::Disjunction
            } else {
                ModelMode::Conjunction
            },
            rules: report.model.rules.clone(),
            stop_reason: report.stop_reason,
            feature_names: feature_names.to_vec(),
        }
    }

    pub fn model(&self) -> Conjunction {
        Conjunction {
            rules: self.rules.clone(),
            disjunction: self.mode == ModelMode::Disjunction,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
