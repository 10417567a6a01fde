//! Plain greedy set covering on simulated data. The most predictive rule is
//! the child of the label, so SCM never recovers the parents alone.
//!
//! ```text
//! cargo run --release --example scm_conjunction -- [p] [max_rules]
//! ```

use icscm::{candidate_rules, scm_fit, simulate, ScmConfig, SimConfig};

fn main() -> icscm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let p: f64 = args
        .get(1)
        .map_or(Ok(1.0), |s| s.parse())
        .expect("p must be a number");
    let max_rules: usize = args
        .get(2)
        .map_or(Ok(10), |s| s.parse())
        .expect("max_rules must be an integer");

    let (data, truth) = simulate(&SimConfig::default().with_seed(7))?;
    let report = scm_fit(&data, &ScmConfig { p, max_rules }, &candidate_rules(&data))?;

    println!("model: {}", report.model.display_with(&truth.role_names));
    for (k, it) in report.iterations.iter().enumerate() {
        println!(
            "  {}: {} utility {:.0}",
            k + 1,
            it.rule.display_with(&truth.role_names),
            it.utility
        );
    }
    println!(
        "stop: {}, training error {:.4}",
        report.stop_reason,
        report.model.training_error(&data)?
    );
    Ok(())
}
