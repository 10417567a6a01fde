//! Seeded generator for the discrete network
//! `E -> X_A -> Y -> X_C <- E`, plus distractors `X_B` unrelated to all else.
//!
//! Per sample of environment `e`:
//!
//! ```text
//! X_A1 ~ B(p_xa[e][0]),  X_A2 ~ B(p_xa[e][1])
//! Y    = (X_A1 AND X_A2) XOR t,        t ~ B(eps_y)
//! X_C  = Y if u = 0 else min(e, 1),    u ~ B(eps_xc)
//! X_Bi ~ B(eps_xb)
//! ```
//!
//! Columns are laid out `X_A1, X_A2, X_B1..X_Bk, X_C`. Randomness comes from
//! a ChaCha8 stream seeded with `seed`, which is portable across platforms;
//! draws happen environment by environment, sample by sample, in the order
//! `X_A1, X_A2, t, u, X_B1..X_Bk`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_env: usize,
    pub n_samples_per_env: usize,
    pub n_distractors: usize,
    pub eps_y: f64,
    pub eps_xc: f64,
    pub eps_xb: f64,
    /// `P(X_A1 = 1)` and `P(X_A2 = 1)` for each environment.
    pub p_xa: Vec<[f64; 2]>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_env: 2,
            n_samples_per_env: 10_000,
            n_distractors: 3,
            eps_y: 0.05,
            eps_xc: 0.05,
            eps_xb: 0.5,
            p_xa: vec![[0.1, 0.5], [0.5, 0.3]],
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn with_distractors(mut self, n: usize) -> Self {
        self.n_distractors = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_env == 0 {
            return Err(Error::Config("at least one environment is required".into()));
        }
        if self.n_samples_per_env == 0 {
            return Err(Error::Config(
                "at least one sample per environment is required".into(),
            ));
        }
        if self.p_xa.len() != self.n_env {
            return Err(Error::Config(format!(
                "p_xa has {} rows but there are {} environments",
                self.p_xa.len(),
                self.n_env
            )));
        }
        let probs = [
            ("eps_y", self.eps_y),
            ("eps_xc", self.eps_xc),
            ("eps_xb", self.eps_xb),
        ]
        .into_iter()
        .chain(self.p_xa.iter().flatten().map(|&p| ("p_xa", p)));
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        3 + self.n_distractors
    }
}

/// Which columns play which causal role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub parent_indices: BTreeSet<usize>,
    pub distractor_indices: BTreeSet<usize>,
    pub child_index: usize,
    /// `A1, A2, B1..Bk, C`, one per column.
    pub role_names: Vec<String>,
}

impl GroundTruth {
    pub fn for_distractors(k: usize) -> Self {
        let mut role_names = vec!["A1".to_string(), "A2".to_string()];
        role_names.extend((1..=k).map(|i| format!("B{i}")));
        role_names.push("C".into());
        Self {
            parent_indices: [0, 1].into(),
            distractor_indices: (2..2 + k).collect(),
            child_index: 2 + k,
            role_names,
        }
    }
}

/// Sidecar written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub ground_truth: GroundTruth,
    pub config: SimConfig,
}

#[inline]
fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> u8 {
    u8::from(rng.gen::<f64>() < p)
}

pub fn simulate(config: &SimConfig) -> Result<(Dataset, GroundTruth)> {
    config.validate()?;
    let k = config.n_distractors;
    let m = config.n_env * config.n_samples_per_env;
    let mut columns = vec![Vec::with_capacity(m); 3 + k];
    let mut labels = Vec::with_capacity(m);
    let mut envs = Vec::with_capacity(m);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (e, probs) in config.p_xa.iter().enumerate() {
        let env_bit = u8::from(e >= 1);
        for _ in 0..config.n_samples_per_env {
            let a1 = bernoulli(&mut rng, probs[0]);
            let a2 = bernoulli(&mut rng, probs[1]);
            let flip = bernoulli(&mut rng, config.eps_y);
            let use_env = bernoulli(&mut rng, config.eps_xc);
            let y = (a1 & a2) ^ flip;
            let xc = if use_env == 1 { env_bit } else { y };
            columns[0].push(a1);
            columns[1].push(a2);
            for col in columns.iter_mut().skip(2).take(k) {
                col.push(bernoulli(&mut rng, config.eps_xb));
            }
            columns[2 + k].push(xc);
            labels.push(y);
            envs.push(e as u32);
        }
    }
    let data = Dataset::from_columns(columns, labels, envs)?;
    Ok((data, GroundTruth::for_distractors(k)))
}

/// Empirical `P(Y = X_A1 AND X_A2)` and `P(Y = X_C)`.
pub fn oracle_accuracy(data: &Dataset, truth: &GroundTruth) -> (f64, f64) {
    let mut parents = truth.parent_indices.iter().map(|&j| data.column(j));
    let first = parents
        .next()
        .map(<[u8]>::to_vec)
        .unwrap_or_else(|| vec![1; data.n_samples()]);
    let conj = parents.fold(first, |acc, col| {
        acc.iter().zip(col).map(|(a, b)| a & b).collect()
    });
    let child = data.column(truth.child_index);
    let m = data.n_samples() as f64;
    let y = data.labels();
    let acc_parents = conj.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / m;
    let acc_child = child.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / m;
    (acc_parents, acc_child)
}

/// Mixes a master seed with a run coordinate into an independent stream
/// seed (SplitMix64 finaliser over each word).
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    words.iter().fold(
        mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15)),
        |acc, &w| mix(acc ^ w.wrapping_add(0x9e37_79b9_7f4a_7c15)),
    )
}
