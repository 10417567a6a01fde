//! Exhaustive invariant causal prediction. The number of tests doubles with
//! every feature, and with many sparse strata the conditional test loses
//! power, so the intersection of accepted sets shrinks.
//!
//! ```text
//! cargo run --release --example icp_baseline -- [distractors] [seed]
//! ```

use icscm::{icp_fit, simulate, DofRule, IcpConfig, SimConfig};

fn main() -> icscm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args
        .get(1)
        .map_or(Ok(3), |s| s.parse())
        .expect("distractors must be an integer");
    let seed: u64 = args
        .get(2)
        .map_or(Ok(2), |s| s.parse())
        .expect("seed must be an integer");

    let (data, truth) = simulate(&SimConfig::default().with_distractors(k).with_seed(seed))?;
    for dof_rule in [DofRule::Full, DofRule::Observed] {
        let report = icp_fit(
            &data,
            &IcpConfig {
                dof_rule,
                ..IcpConfig::default()
            },
        )?;
        let selected: Vec<&str> = report
            .selected
            .iter()
            .map(|&j| truth.role_names[j].as_str())
            .collect();
        println!(
            "{dof_rule:?} dof: {} tests, {} accepted, selected {:?}",
            report.n_tests,
            report.accepted.len(),
            selected
        );
        for (set, p) in report.accepted.iter().take(5) {
            let roles: Vec<&str> = set.iter().map(|&j| truth.role_names[j].as_str()).collect();
            println!("  {roles:?}  p = {p:.3}");
        }
    }
    Ok(())
}
