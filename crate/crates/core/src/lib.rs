//! Interpretable conjunction learners that identify causal parents.
//!
//! * [`scm`]: the greedy Set Covering Machine.
//! * [`icscm`]: the invariant variant, which filters candidate rules with
//!   per-leaf independence tests between label and environment, stops once
//!   the positive leaf is invariant, and optionally prunes.
//! * [`icp`]: exhaustive invariant causal prediction with conditional G-tests.
//! * [`simulator`]: the multi-environment Bayesian network used to compare them.
//! * [`harness`]: seeded identification and runtime experiments with CSV output.

pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod icp;
pub mod icscm;
pub mod scm;
pub mod simulator;
pub mod stats;

pub use data::{
    candidate_rules, Conjunction, Dataset, FitReport, IterationLog, ModelDocument, Rule, StopReason,
};
pub use error::{Error, Result};
pub use icp::{icp_fit, IcpConfig, IcpReport};
pub use icscm::{icscm_fit, icscm_fit_disjunction, leaf_invariance_pvalue, prune, IcscmConfig};
pub use scm::{scm_fit, scm_fit_disjunction, utility, ScmConfig};
pub use simulator::{oracle_accuracy, simulate, GroundTruth, SimConfig};
pub use stats::{
    chi2_sf, conditional_gtest, independence_test, ContingencyTable, DofRule, TestMethod,
    TestResult,
};
