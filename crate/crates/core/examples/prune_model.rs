//! Pruning a conjunction: a feature is dropped when, given the others, it
//! carries no information linking the label to the environment.
//!
//! ```text
//! cargo run --release --example prune_model
//! ```

use icscm::{candidate_rules, prune, scm_fit, simulate, ScmConfig, SimConfig};

fn main() -> icscm::Result<()> {
    let (data, truth) = simulate(&SimConfig::default().with_seed(11))?;
    let names = &truth.role_names;

    // an unconstrained SCM keeps covering negatives with whatever is left
    let grown = scm_fit(
        &data,
        &ScmConfig {
            p: 1.0,
            max_rules: 10,
        },
        &candidate_rules(&data),
    )?
    .model;
    let pruned = prune(&grown, &data, 0.05)?;
    println!("grown:  {}", grown.display_with(names));
    println!("pruned: {}", pruned.display_with(names));
    println!(
        "training error {:.4} -> {:.4}",
        grown.training_error(&data)?,
        pruned.training_error(&data)?
    );
    Ok(())
}
