//! Chi-squared tail probabilities and contingency-table independence tests
//! between a binary label and an environment id.
//!
//! Degrees of freedom only count rows and columns with nonzero marginals, so
//! a label or environment value absent from the data adds nothing. A table
//! left with zero degrees of freedom cannot refute independence and reports
//! `p = 1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum number of samples for a leaf test to be informative.
pub const DEFAULT_MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    /// Pearson's chi-squared statistic, `sum (O - E)^2 / E`.
    #[default]
    Chi2,
    /// Likelihood-ratio statistic, `2 sum O ln(O / E)`.
    Gtest,
}

/// How a conditional test counts degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DofRule {
    /// Per stratum, `(r - 1)(c - 1)` over rows and columns with nonzero
    /// marginals; unobserved strata add nothing.
    #[default]
    Observed,
    /// `(levels_y - 1)(levels_e - 1)` times the number of possible strata,
    /// whether observed or not, with levels taken over the whole sample.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    pub degenerate: bool,
}

impl TestResult {
    /// A test that had nothing to refute.
    pub fn not_refutable() -> Self {
        Self {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
            degenerate: true,
        }
    }

    fn from_statistic(statistic: f64, dof: u64) -> Self {
        if dof == 0 {
            return Self {
                statistic,
                dof,
                p_value: 1.0,
                degenerate: true,
            };
        }
        let p_value = chi2_sf_unchecked(statistic.max(0.0), dof as f64);
        Self {
            statistic,
            dof,
            p_value,
            degenerate: false,
        }
    }
}

/// Survival function of the chi-squared distribution with `dof` degrees of
/// freedom, `Q(dof/2, x/2)`.
pub fn chi2_sf(x: f64, dof: u64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Input(format!(
            "chi2_sf needs a finite statistic, got {x}"
        )));
    }
    if x < 0.0 {
        return Err(Error::Input(format!("chi2_sf needs x >= 0, got {x}")));
    }
    if dof == 0 {
        return Err(Error::Input("chi2_sf needs dof >= 1".into()));
    }
    Ok(chi2_sf_unchecked(x, dof as f64))
}

fn chi2_sf_unchecked(x: f64, dof: f64) -> f64 {
    regularized_upper_gamma(dof / 2.0, x / 2.0)
}

/// `Q(a, x) = Gamma(a, x) / Gamma(a)`. Series for `x < a + 1`, Lentz's
/// continued fraction otherwise.
fn regularized_upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let q = if x < a + 1.0 {
        1.0 - lower_gamma_series(a, x)
    } else {
        upper_gamma_fraction(a, x)
    };
    q.clamp(0.0, 1.0)
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn upper_gamma_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Lanczos approximation (g = 7, 9 coefficients), relative error ~1e-15.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Counts of `(y, e)` pairs: two rows for the label, one column per
/// environment id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: [Vec<u64>; 2],
    total: u64,
}

impl ContingencyTable {
    pub fn new(n_envs: usize) -> Self {
        Self {
            counts: [vec![0; n_envs], vec![0; n_envs]],
            total: 0,
        }
    }

    pub fn from_counts(rows: [Vec<u64>; 2]) -> Result<Self> {
        if rows[0].len() != rows[1].len() {
            return Err(Error::Input("contingency rows differ in width".into()));
        }
        let total = rows.iter().flatten().sum();
        Ok(Self {
            counts: rows,
            total,
        })
    }

    pub fn from_samples(y: &[u8], e: &[u32]) -> Result<Self> {
        check_lengths(y, e)?;
        let k = e.iter().copied().max().map_or(1, |m| m as usize + 1);
        let mut t = Self::new(k);
        for (&yi, &ei) in y.iter().zip(e) {
            if yi > 1 {
                return Err(Error::Input(format!("label {yi} is not 0/1")));
            }
            t.add(yi, ei);
        }
        Ok(t)
    }

    #[inline]
    pub fn add(&mut self, y: u8, e: u32) {
        let e = e as usize;
        if e >= self.counts[0].len() {
            self.counts[0].resize(e + 1, 0);
            self.counts[1].resize(e + 1, 0);
        }
        self.counts[y as usize][e] += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, y: u8, e: u32) -> u64 {
        self.counts[y as usize]
            .get(e as usize)
            .copied()
            .unwrap_or(0)
    }

    /// `(statistic, dof)` with dof over nonzero marginals.
    pub fn statistic(&self, method: TestMethod) -> (f64, u64) {
        table_statistic(&self.counts[0], &self.counts[1], method)
    }

    pub fn test(&self, method: TestMethod) -> TestResult {
        let (stat, dof) = self.statistic(method);
        TestResult::from_statistic(stat, dof)
    }
}

fn table_statistic(row0: &[u64], row1: &[u64], method: TestMethod) -> (f64, u64) {
    let r0: u64 = row0.iter().sum();
    let r1: u64 = row1.iter().sum();
    let n = (r0 + r1) as f64;
    let rows_nz = u64::from(r0 > 0) + u64::from(r1 > 0);
    let mut cols_nz = 0u64;
    let mut stat = 0.0;
    for (&a, &b) in row0.iter().zip(row1) {
        let col = a + b;
        if col == 0 {
            continue;
        }
        cols_nz += 1;
        for (obs, row) in [(a, r0), (b, r1)] {
            if row == 0 {
                continue;
            }
            let expected = row as f64 * col as f64 / n;
            let o = obs as f64;
            stat += match method {
                TestMethod::Chi2 => (o - expected) * (o - expected) / expected,
                TestMethod::Gtest if obs == 0 => 0.0,
                TestMethod::Gtest => 2.0 * o * (o / expected).ln(),
            };
        }
    }
    let dof = rows_nz.saturating_sub(1) * cols_nz.saturating_sub(1);
    (stat, dof)
}

fn check_lengths(y: &[u8], e: &[u32]) -> Result<()> {
    if y.len() != e.len() {
        return Err(Error::Input(format!(
            "{} labels but {} environment ids",
            y.len(),
            e.len()
        )));
    }
    Ok(())
}

/// Test of `Y ⊥ E` on paired samples.
pub fn independence_test(y: &[u8], e: &[u32], method: TestMethod) -> Result<TestResult> {
    if y.is_empty() {
        return Err(Error::Input(
            "independence test needs at least one sample".into(),
        ));
    }
    Ok(ContingencyTable::from_samples(y, e)?.test(method))
}

/// Conditional G-test of `Y ⊥ E | S`: per-stratum G statistics and degrees
/// of freedom are summed over the strata that occur.
pub fn conditional_gtest(y: &[u8], e: &[u32], strata: &[u64]) -> Result<TestResult> {
    check_lengths(y, e)?;
    if strata.len() != y.len() {
        return Err(Error::Input(format!(
            "{} strata ids for {} samples",
            strata.len(),
            y.len()
        )));
    }
    let mut index: HashMap<u64, usize> = HashMap::new();
    let dense: Vec<usize> = strata
        .iter()
        .map(|s| {
            let next = index.len();
            *index.entry(*s).or_insert(next)
        })
        .collect();
    let k = e.iter().copied().max().map_or(1, |m| m as usize + 1);
    Ok(stratified_gtest(
        y,
        e,
        k,
        index.len(),
        |i| dense[i],
        DofRule::Observed,
        0,
    ))
}

/// Conditional G-test where `stratum(i) < n_strata` is already a dense
/// index. `possible_strata` is the stratum count used by [`DofRule::Full`].
pub(crate) fn stratified_gtest(
    y: &[u8],
    e: &[u32],
    n_envs: usize,
    n_strata: usize,
    stratum: impl Fn(usize) -> usize,
    rule: DofRule,
    possible_strata: u64,
) -> TestResult {
    let width = 2 * n_envs;
    let mut counts = vec![0u64; n_strata * width];
    for i in 0..y.len() {
        let base = stratum(i) * width;
        counts[base + y[i] as usize * n_envs + e[i] as usize] += 1;
    }
    let mut stat = 0.0;
    let mut dof = 0;
    for block in counts.chunks_exact(width) {
        let (row0, row1) = block.split_at(n_envs);
        let (s, d) = table_statistic(row0, row1, TestMethod::Gtest);
        stat += s;
        dof += d;
    }
    if rule == DofRule::Full {
        let levels_y = y.iter().copied().max().map_or(0, |m| m as u64 + 1);
        let levels_e = e.iter().copied().max().map_or(0, |m| m as u64 + 1);
        dof = levels_y.saturating_sub(1) * levels_e.saturating_sub(1) * possible_strata;
    }
    TestResult::from_statistic(stat, dof)
}
