//! Draw a two-environment dataset and check the generating mechanism against
//! its empirical frequencies.
//!
//! ```text
//! cargo run --release --example simulate_dataset -- [distractors] [seed]
//! ```

use icscm::{oracle_accuracy, simulate, SimConfig};

fn main() -> icscm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args
        .get(1)
        .map_or(Ok(3), |s| s.parse())
        .expect("distractors must be an integer");
    let seed: u64 = args
        .get(2)
        .map_or(Ok(0), |s| s.parse())
        .expect("seed must be an integer");

    let config = SimConfig::default().with_distractors(k).with_seed(seed);
    let (data, truth) = simulate(&config)?;
    println!(
        "{} rows, columns {}",
        data.n_samples(),
        truth.role_names.join(" ")
    );

    for (e, probs) in config.p_xa.iter().enumerate() {
        let rows: Vec<usize> = (0..data.n_samples())
            .filter(|&i| data.envs()[i] == e as u32)
            .collect();
        let freq =
            |col: &[u8]| rows.iter().filter(|&&i| col[i] == 1).count() as f64 / rows.len() as f64;
        println!(
            "env {e}: A1 {:.3} (want {:.2}), A2 {:.3} (want {:.2}), Y {:.3}, C {:.3}",
            freq(data.column(0)),
            probs[0],
            freq(data.column(1)),
            probs[1],
            freq(data.labels()),
            freq(data.column(truth.child_index)),
        );
    }

    // the child predicts Y better than the true parents do
    let (parents, child) = oracle_accuracy(&data, &truth);
    println!("accuracy of A1 AND A2: {parents:.4}");
    println!("accuracy of C:         {child:.4}");
    Ok(())
}
