//! Single-threaded fit time against the number of distractors.
//!
//! ICP runs `2^d` conditional tests, so its time roughly doubles per added
//! feature; the set covering learners grow linearly with the rule count.
//!
//! ```text
//! cargo run --release --example runtime_scaling -- [sizes] [methods] [reps]
//! ```

use icscm::harness::{parse_methods, parse_sizes, run_runtime_benchmark, ExperimentGrid};

fn main() -> icscm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let sizes = parse_sizes(args.get(1).map_or("2..10", String::as_str))?;
    let methods = parse_methods(args.get(2).map_or("scm,icscm,icp", String::as_str))?;
    let reps: usize = args
        .get(3)
        .map_or(Ok(3), |s| s.parse())
        .expect("reps must be an integer");

    let grid = ExperimentGrid::new(methods, sizes);
    let rows = run_runtime_benchmark(&grid, reps)?;
    println!("{:<14} {:>4} {:>12}", "method", "|XB|", "median_s");
    for row in &rows {
        println!(
            "{:<14} {:>4} {:>12.5}",
            row.method.name(),
            row.xb_size,
            row.median_wall_time_s
        );
    }
    Ok(())
}
