//! Command-line front end: `simulate`, `fit`, `prune`, `icp`, `experiment`
//! and `benchmark`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 refused as
//! infeasible.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{candidate_rules, Dataset, ModelDocument};
use crate::error::Error;
use crate::harness::{
    parse_methods, parse_sizes, run_identification, run_runtime_benchmark, write_experiment,
    write_runtime_csv, ExperimentGrid, OutputOptions,
};
use crate::icp::{icp_fit, IcpConfig};
use crate::icscm::{icscm_fit, icscm_fit_disjunction, prune, IcscmConfig};
use crate::scm::{scm_fit, scm_fit_disjunction, ScmConfig};
use crate::simulator::{oracle_accuracy, simulate, SimConfig, SimulationRecord};
use crate::stats::{DofRule, TestMethod};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "icscm",
    version,
    about = "Causal parent identification with invariant set covering machines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print the fully resolved invocation as JSON before running.
    #[arg(long, global = true)]
    pub manifest: bool,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate a multi-environment dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Fit a conjunction (or disjunction) with SCM or ICSCM.
    Fit(FitArgs),
    /// Prune a saved model with conditional independence tests.
    Prune(PruneArgs),
    /// Run exhaustive invariant causal prediction.
    Icp(IcpArgs),
    /// Identification-rate experiment over a grid of distractor counts.
    Experiment(ExperimentArgs),
    /// Single-threaded runtime scaling benchmark.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Number of distractor features.
    #[arg(long, default_value_t = 3)]
    pub xb: usize,
    #[arg(long, default_value_t = 2)]
    pub n_env: usize,
    /// Samples per environment.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eps_y: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eps_xc: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eps_xb: f64,
    /// Per-environment `P(A1=1),P(A2=1)` pairs separated by `;`.
    #[arg(long, default_value = "0.1,0.5;0.5,0.3")]
    pub p_xa: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for dataset.csv and ground_truth.json.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Allow a single environment (invariance methods will refuse the data).
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Scm,
    Icscm,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = FitMethod::Icscm)]
    pub method: FitMethod,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 10)]
    pub max_rules: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = crate::stats::DEFAULT_MIN_SAMPLES)]
    pub min_leaf: usize,
    #[arg(long, value_enum, default_value_t = TestMethod::Chi2)]
    pub test: TestMethod,
    /// Prune the ICSCM model (default).
    #[arg(long, overrides_with = "no_prune")]
    pub prune: bool,
    #[arg(long)]
    pub no_prune: bool,
    /// Learn a disjunction instead of a conjunction.
    #[arg(long)]
    pub disjunction: bool,
    /// Ground-truth JSON from `simulate`, for role names in the report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Where to write the model JSON.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PruneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IcpArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub max_subset_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = DofRule::Full)]
    pub dof: DofRule,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Comma-separated methods: scm, icscm, icscm-noprune, icp.
    #[arg(long, default_value = "scm,icscm,icp")]
    pub methods: String,
    /// Distractor counts, e.g. `1..7` or `20,50`.
    #[arg(long, default_value = "1..7")]
    pub xb: String,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Samples per environment.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 10)]
    pub max_rules: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub icp_max_subset_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = DofRule::Full)]
    pub icp_dof: DofRule,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Use the full 100-run protocol.
    #[arg(long)]
    pub full: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write tidy CSVs for plotting.
    #[arg(long)]
    pub plot_data: bool,
    /// Write 0 for wall times so outputs are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Repetitions per cell; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

/// Errors raised after input was read: configuration problems found in the
/// data are data errors.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Flag validation happens before any I/O; failures there are usage errors.
fn validate(e: Error) -> CliError {
    match e {
        Error::Infeasible(_) => e.into(),
        other => CliError::usage(other.to_string()),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.manifest {
        println!(
            "{}",
            serde_json::to_string_pretty(cli).map_err(Error::from)?
        );
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Prune(a) => cmd_prune(a),
        Command::Icp(a) => cmd_icp(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

fn parse_p_xa(text: &str) -> Result<Vec<[f64; 2]>, CliError> {
    text.split(';')
        .map(|pair| {
            let nums: Vec<f64> = pair
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::usage(format!("cannot parse probability pair `{pair}`")))?;
            match nums[..] {
                [a, b] => Ok([a, b]),
                _ => Err(CliError::usage(format!(
                    "`{pair}` must hold exactly two probabilities"
                ))),
            }
        })
        .collect()
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut p_xa = parse_p_xa(&a.p_xa)?;
    if a.n_env < p_xa.len() {
        p_xa.truncate(a.n_env);
    }
    let config = SimConfig {
        n_env: a.n_env,
        n_samples_per_env: a.samples,
        n_distractors: a.xb,
        eps_y: a.eps_y,
        eps_xc: a.eps_xc,
        eps_xb: a.eps_xb,
        p_xa,
        seed: a.seed,
    };
    config.validate().map_err(validate)?;
    if a.n_env < 2 {
        if !a.force {
            return Err(CliError::usage(
                "invariance methods need at least two environments (pass --force to override)",
            ));
        }
        eprintln!("warning: a single environment cannot be used by icscm or icp");
    }
    let (data, truth) = simulate(&config)?;
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    data.save(&a.out.join("dataset.csv"))?;
    let record = SimulationRecord {
        ground_truth: truth.clone(),
        config: config.clone(),
    };
    std::fs::write(
        a.out.join("ground_truth.json"),
        serde_json::to_string_pretty(&record).map_err(Error::from)? + "\n",
    )
    .map_err(Error::from)?;

    println!("rows: {}", data.n_samples());
    println!(
        "feature columns: {} ({})",
        data.n_features(),
        truth.role_names.join(", ")
    );
    for e in 0..config.n_env as u32 {
        let idx: Vec<usize> = (0..data.n_samples())
            .filter(|&i| data.envs()[i] == e)
            .collect();
        let freq = |j: usize| {
            idx.iter().filter(|&&i| data.column(j)[i] == 1).count() as f64 / idx.len() as f64
        };
        let y = idx.iter().filter(|&&i| data.labels()[i] == 1).count() as f64 / idx.len() as f64;
        println!(
            "env {e}: P(A1=1) = {:.4}, P(A2=1) = {:.4}, P(Y=1) = {:.4}",
            freq(0),
            freq(1),
            y
        );
    }
    let (acc_parents, acc_child) = oracle_accuracy(&data, &truth);
    println!("P(Y = A1 AND A2) = {acc_parents:.4}");
    println!("P(Y = C) = {acc_child:.4}");
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())).into())
}

fn load_roles(truth: Option<&Path>, data: &Dataset) -> Result<Vec<String>, CliError> {
    match truth {
        None => Ok(data.feature_names().to_vec()),
        Some(path) => {
            let text = read_text(path)?;
            let record: SimulationRecord = serde_json::from_str(&text).map_err(Error::from)?;
            if record.ground_truth.role_names.len() != data.n_features() {
                return Err(Error::Input(format!(
                    "ground truth lists {} roles for {} features",
                    record.ground_truth.role_names.len(),
                    data.n_features()
                ))
                .into());
            }
            Ok(data
                .feature_names()
                .iter()
                .zip(&record.ground_truth.role_names)
                .map(|(name, role)| format!("{name}[{role}]"))
                .collect())
        }
    }
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let prune_model = !a.no_prune;
    let scm_cfg = ScmConfig {
        p: a.p,
        max_rules: a.max_rules,
    };
    let icscm_cfg = IcscmConfig {
        p: a.p,
        max_rules: a.max_rules,
        alpha: a.alpha,
        min_leaf: a.min_leaf,
        test_method: a.test,
        prune: prune_model,
    };
    match a.method {
        FitMethod::Scm => scm_cfg.validate().map_err(validate)?,
        FitMethod::Icscm => icscm_cfg.validate().map_err(validate)?,
    }
    let data = Dataset::load(&a.data)?;
    let names = load_roles(a.truth.as_deref(), &data)?;
    let rules = candidate_rules(&data);
    let report = match (a.method, a.disjunction) {
        (FitMethod::Scm, false) => scm_fit(&data, &scm_cfg, &rules)?,
        (FitMethod::Scm, true) => scm_fit_disjunction(&data, &scm_cfg, &rules)?,
        (FitMethod::Icscm, false) => icscm_fit(&data, &icscm_cfg, &rules)?,
        (FitMethod::Icscm, true) => icscm_fit_disjunction(&data, &icscm_cfg, &rules)?,
    };

    println!("model: {}", report.model.display_with(&names));
    let selected: Vec<&str> = report
        .selected_features
        .iter()
        .map(|&j| names[j].as_str())
        .collect();
    println!(
        "selected features: {}",
        if selected.is_empty() {
            "(none)".into()
        } else {
            selected.join(", ")
        }
    );
    println!("training error: {:.4}", report.model.training_error(&data)?);
    println!("stop reason: {}", report.stop_reason);
    for (k, it) in report.iterations.iter().enumerate() {
        let leaf = it
            .leaf_p_value
            .map_or(String::new(), |p| format!(", leaf p = {p:.4}"));
        let rest = it
            .remaining_p_value
            .map_or(String::new(), |p| format!(", remaining p = {p:.4}"));
        println!(
            "  step {}: {} (utility {:.1}{leaf}{rest})",
            k + 1,
            it.rule.display_with(&names),
            it.utility
        );
    }
    for r in &report.pruned {
        println!("  pruned: {}", r.display_with(&names));
    }
    if let Some(out) = &a.out {
        let doc = ModelDocument::from_report(&report, data.feature_names());
        std::fs::write(out, doc.to_json()? + "\n").map_err(Error::from)?;
    }
    Ok(())
}

fn cmd_prune(a: &PruneArgs) -> Result<(), CliError> {
    crate::icscm::validate_alpha(a.alpha).map_err(validate)?;
    let data = Dataset::load(&a.data)?;
    let names = load_roles(a.truth.as_deref(), &data)?;
    let text = read_text(&a.model)?;
    let mut doc = ModelDocument::from_json(&text)?;
    let before = doc.model();
    let after = prune(&before, &data, a.alpha)?;
    println!("before: {}", before.display_with(&names));
    println!("after:  {}", after.display_with(&names));
    for r in before.rules.iter().filter(|r| !after.rules.contains(r)) {
        println!("  removed: {}", r.display_with(&names));
    }
    if let Some(out) = &a.out {
        doc.rules = after.rules;
        std::fs::write(out, doc.to_json()? + "\n").map_err(Error::from)?;
    }
    Ok(())
}

fn cmd_icp(a: &IcpArgs) -> Result<(), CliError> {
    crate::icscm::validate_alpha(a.alpha).map_err(validate)?;
    let data = Dataset::load(&a.data)?;
    let names = load_roles(a.truth.as_deref(), &data)?;
    let cfg = IcpConfig {
        alpha: a.alpha,
        max_subset_size: a.max_subset_size,
        dof_rule: a.dof,
    };
    let report = icp_fit(&data, &cfg)?;
    println!("tests: {}", report.n_tests);
    println!("accepted sets: {}", report.accepted.len());
    let selected: Vec<&str> = report.selected.iter().map(|&j| names[j].as_str()).collect();
    println!(
        "selected features: {}",
        if selected.is_empty() {
            "(none)".into()
        } else {
            selected.join(", ")
        }
    );
    Ok(())
}

fn build_grid(g: &GridArgs, runs: usize) -> Result<ExperimentGrid, CliError> {
    let methods = parse_methods(&g.methods).map_err(validate)?;
    let sizes = parse_sizes(&g.xb).map_err(validate)?;
    let mut grid = ExperimentGrid::new(methods, sizes);
    grid.n_runs = runs;
    grid.master_seed = g.seed;
    grid.base.n_samples_per_env = g.samples;
    grid.configs.scm = ScmConfig {
        p: g.p,
        max_rules: g.max_rules,
    };
    grid.configs.icscm = IcscmConfig {
        p: g.p,
        max_rules: g.max_rules,
        alpha: g.alpha,
        ..IcscmConfig::default()
    };
    grid.configs.icp = IcpConfig {
        alpha: g.alpha,
        max_subset_size: g.icp_max_subset_size,
        dof_rule: g.icp_dof,
    };
    grid.validate().map_err(validate)?;
    Ok(grid)
}

fn with_jobs<T>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::usage("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<(), CliError> {
    let runs = if a.full { 100 } else { a.runs };
    let grid = build_grid(&a.grid, runs)?;
    let results = with_jobs(a.jobs, || run_identification(&grid))??;
    let opts = OutputOptions {
        timing: !a.no_timing,
        plot_data: a.plot_data,
    };
    let summary = write_experiment(&a.grid.out, &grid, &results, opts)?;
    println!(
        "{:<14} {:>4} {:>6} {:>9} {:>7}",
        "method", "|XB|", "rate", "precision", "recall"
    );
    for row in &summary {
        println!(
            "{:<14} {:>4} {:>6.2} {:>9.3} {:>7.3}",
            row.method.name(),
            row.xb_size,
            row.identification_rate,
            row.mean_precision,
            row.mean_recall
        );
    }
    Ok(())
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<(), CliError> {
    let grid = build_grid(&a.grid, 1)?;
    let rows = run_runtime_benchmark(&grid, a.reps)?;
    std::fs::create_dir_all(&a.grid.out).map_err(Error::from)?;
    let file = std::fs::File::create(a.grid.out.join("runtime.csv")).map_err(Error::from)?;
    write_runtime_csv(std::io::BufWriter::new(file), &rows)?;
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
