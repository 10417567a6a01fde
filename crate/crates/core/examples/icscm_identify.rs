//! Invariant set covering on the same kind of data SCM gets wrong. Rules
//! whose negative leaf depends on the environment are skipped, and the fit
//! stops once the remaining samples are invariant.
//!
//! ```text
//! cargo run --release --example icscm_identify -- [distractors] [seed]
//! ```

use icscm::{candidate_rules, icscm_fit, simulate, IcscmConfig, SimConfig, TestMethod};

fn main() -> icscm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args
        .get(1)
        .map_or(Ok(5), |s| s.parse())
        .expect("distractors must be an integer");
    let seed: u64 = args
        .get(2)
        .map_or(Ok(3), |s| s.parse())
        .expect("seed must be an integer");

    let (data, truth) = simulate(&SimConfig::default().with_distractors(k).with_seed(seed))?;
    let rules = candidate_rules(&data);
    for method in [TestMethod::Chi2, TestMethod::Gtest] {
        let config = IcscmConfig {
            test_method: method,
            ..IcscmConfig::default()
        };
        let report = icscm_fit(&data, &config, &rules)?;
        println!(
            "{method:?}: {}",
            report.model.display_with(&truth.role_names)
        );
        for it in &report.iterations {
            println!(
                "  {:<8} utility {:>7.0}  leaf p {:.3}  remaining p {:.3}",
                it.rule.display_with(&truth.role_names),
                it.utility,
                it.leaf_p_value.unwrap_or(f64::NAN),
                it.remaining_p_value.unwrap_or(f64::NAN),
            );
        }
        let found = report.selected_features == truth.parent_indices;
        println!("  stop: {}, parents recovered: {found}", report.stop_reason);
    }
    Ok(())
}
