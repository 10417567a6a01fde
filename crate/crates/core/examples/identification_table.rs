//! Identification rates per method and distractor count (Table-1 style).
//!
//! ```text
//! cargo run --release --example identification_table -- [runs] [sizes] [methods]
//! cargo run --release --example identification_table -- 20 1..7 scm,icscm,icp
//! ```

use icscm::harness::{parse_methods, parse_sizes, run_identification, summarize, ExperimentGrid};

fn main() -> icscm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let runs: usize = args
        .get(1)
        .map_or(Ok(20), |s| s.parse())
        .expect("runs must be an integer");
    let sizes = parse_sizes(args.get(2).map_or("1..7", String::as_str))?;
    let methods = parse_methods(
        args.get(3)
            .map_or("scm,icscm,icscm-noprune,icp", String::as_str),
    )?;

    let mut grid = ExperimentGrid::new(methods, sizes);
    grid.n_runs = runs;
    let summary = summarize(&run_identification(&grid)?);

    println!(
        "{:<14} {:>4} {:>6} {:>9} {:>7} {:>9}",
        "method", "|XB|", "rate", "precision", "recall", "time_s"
    );
    for row in &summary {
        println!(
            "{:<14} {:>4} {:>6.2} {:>9.3} {:>7.3} {:>9.4}",
            row.method.name(),
            row.xb_size,
            row.identification_rate,
            row.mean_precision,
            row.mean_recall,
            row.mean_wall_time_s
        );
    }
    Ok(())
}
