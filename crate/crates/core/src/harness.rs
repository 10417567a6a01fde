//! Seeded identification and runtime experiments over grids of distractor
//! counts.
//!
//! Every run `(xb_size, run_index)` draws one dataset from a seed derived
//! from the master seed, and every method is fitted on that same dataset.
//! Runs execute concurrently on the ambient rayon pool; results are
//! collected in grid order, so output files depend only on the grid.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::candidate_rules;
use crate::error::{Error, Result};
use crate::icp::{icp_fit, subset_count, IcpConfig, MAX_TESTS};
use crate::icscm::{icscm_fit, IcscmConfig};
use crate::scm::{scm_fit, ScmConfig};
use crate::simulator::{derive_seed, simulate, GroundTruth, SimConfig};
use crate::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Scm,
    /// Invariant learner followed by pruning.
    Icscm,
    /// Invariant learner without the pruning pass.
    IcscmNoPrune,
    Icp,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Scm,
        Method::Icscm,
        Method::IcscmNoPrune,
        Method::Icp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Scm => "scm",
            Method::Icscm => "icscm",
            Method::IcscmNoPrune => "icscm-noprune",
            Method::Icp => "icp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}` (expected scm, icscm, icscm-noprune or icp)"
                ))
            })
    }
}

/// Parses `a..b` (inclusive), `a,b,c`, or a single number.
pub fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse size list `{spec}`"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi
                .trim_start_matches('=')
                .trim()
                .parse()
                .map_err(|_| bad())?;
            if hi < lo {
                return Err(bad());
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

pub fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodConfigs {
    pub scm: ScmConfig,
    /// `prune` is overridden by the method variant.
    pub icscm: IcscmConfig,
    pub icp: IcpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub methods: Vec<Method>,
    pub xb_sizes: Vec<usize>,
    pub n_runs: usize,
    /// Seed and distractor count are replaced per run.
    pub base: SimConfig,
    pub configs: MethodConfigs,
    pub master_seed: u64,
}

impl ExperimentGrid {
    /// Desk-scale default: 20 runs over 1..=7 distractors.
    pub fn new(methods: Vec<Method>, xb_sizes: Vec<usize>) -> Self {
        Self {
            methods,
            xb_sizes,
            n_runs: 20,
            base: SimConfig::default(),
            configs: MethodConfigs::default(),
            master_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.xb_sizes.is_empty() {
            return Err(Error::Config("no distractor sizes requested".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        self.base.validate()?;
        if self.base.n_env < 2 {
            return Err(Error::Config(
                "experiments need at least two environments".into(),
            ));
        }
        self.configs.scm.validate()?;
        self.configs.icscm.validate()?;
        if self.methods.contains(&Method::Icp) {
            for &xb in &self.xb_sizes {
                let d = self.base.clone().with_distractors(xb).n_features();
                let tests = subset_count(d, self.configs.icp.max_subset_size);
                if tests > MAX_TESTS {
                    return Err(Error::Infeasible(format!(
                        "ICP at {xb} distractors needs {tests} tests per run (limit {MAX_TESTS}); set max_subset_size"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Simulation settings for one run.
    pub fn sim_config(&self, xb_size: usize, run: usize) -> SimConfig {
        let seed = derive_seed(self.master_seed, &[xb_size as u64, run as u64]);
        self.base.clone().with_distractors(xb_size).with_seed(seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub method: Method,
    pub xb_size: usize,
    pub run: usize,
    pub seed: u64,
    pub selected_features: BTreeSet<usize>,
    pub exact_match: bool,
    pub precision: f64,
    pub recall: f64,
    pub wall_time_s: f64,
}

/// Precision and recall of `selected` against `parents`; precision of an
/// empty selection is 1.
pub fn precision_recall(selected: &BTreeSet<usize>, parents: &BTreeSet<usize>) -> (f64, f64) {
    let hits = selected.intersection(parents).count() as f64;
    let precision = if selected.is_empty() {
        1.0
    } else {
        hits / selected.len() as f64
    };
    let recall = if parents.is_empty() {
        1.0
    } else {
        hits / parents.len() as f64
    };
    (precision, recall)
}

/// Fits `method` and returns the selected features with the fit's wall time.
pub fn fit_method(
    method: Method,
    data: &Dataset,
    configs: &MethodConfigs,
) -> Result<(BTreeSet<usize>, f64)> {
    let start = Instant::now();
    let selected = match method {
        Method::Scm => scm_fit(data, &configs.scm, &candidate_rules(data))?.selected_features,
        Method::Icscm | Method::IcscmNoPrune => {
            let cfg = IcscmConfig {
                prune: method == Method::Icscm,
                ..configs.icscm
            };
            icscm_fit(data, &cfg, &candidate_rules(data))?.selected_features
        }
        Method::Icp => icp_fit(data, &configs.icp)?.selected,
    };
    Ok((selected, start.elapsed().as_secs_f64()))
}

fn score(
    method: Method,
    xb_size: usize,
    run: usize,
    seed: u64,
    selected: BTreeSet<usize>,
    wall_time_s: f64,
    truth: &GroundTruth,
) -> IdentificationResult {
    let (precision, recall) = precision_recall(&selected, &truth.parent_indices);
    IdentificationResult {
        method,
        xb_size,
        run,
        seed,
        exact_match: selected == truth.parent_indices,
        selected_features: selected,
        precision,
        recall,
        wall_time_s,
    }
}

/// Runs every `(method, xb_size, run)` cell. Results are ordered by method
/// (grid order), then size, then run.
pub fn run_identification(grid: &ExperimentGrid) -> Result<Vec<IdentificationResult>> {
    grid.validate()?;
    let tasks: Vec<(usize, usize)> = grid
        .xb_sizes
        .iter()
        .flat_map(|&xb| (0..grid.n_runs).map(move |run| (xb, run)))
        .collect();
    let per_task: Vec<Vec<IdentificationResult>> = tasks
        .par_iter()
        .map(|&(xb, run)| {
            let sim = grid.sim_config(xb, run);
            let (data, truth) = simulate(&sim)?;
            grid.methods
                .iter()
                .map(|&method| {
                    let (selected, secs) = fit_method(method, &data, &grid.configs)?;
                    Ok(score(method, xb, run, sim.seed, selected, secs, &truth))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut results = Vec::with_capacity(tasks.len() * grid.methods.len());
    for (mi, _) in grid.methods.iter().enumerate() {
        results.extend(per_task.iter().map(|cell| cell[mi].clone()));
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub xb_size: usize,
    pub runs: usize,
    pub identification_rate: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_wall_time_s: f64,
}

/// Aggregates per `(method, xb_size)` cell, in first-appearance order.
pub fn summarize(results: &[IdentificationResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in results {
        if !keys.contains(&(r.method, r.xb_size)) {
            keys.push((r.method, r.xb_size));
        }
    }
    keys.into_iter()
        .map(|(method, xb_size)| {
            let cell: Vec<&IdentificationResult> = results
                .iter()
                .filter(|r| r.method == method && r.xb_size == xb_size)
                .collect();
            let n = cell.len() as f64;
            let mean = |f: &dyn Fn(&IdentificationResult) -> f64| {
                cell.iter().map(|r| f(r)).sum::<f64>() / n
            };
            SummaryRow {
                method,
                xb_size,
                runs: cell.len(),
                identification_rate: mean(&|r| f64::from(u8::from(r.exact_match))),
                mean_precision: mean(&|r| r.precision),
                mean_recall: mean(&|r| r.recall),
                mean_wall_time_s: mean(&|r| r.wall_time_s),
            }
        })
        .collect()
}

pub fn summary_for(rows: &[SummaryRow], method: Method, xb_size: usize) -> Option<&SummaryRow> {
    rows.iter()
        .find(|r| r.method == method && r.xb_size == xb_size)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub method: Method,
    pub xb_size: usize,
    pub median_wall_time_s: f64,
    pub repetitions: usize,
}

/// Median-of-`reps` fit times per `(method, xb_size)` on the run-0 dataset
/// of each size. Fits run on a dedicated single-thread pool.
pub fn run_runtime_benchmark(grid: &ExperimentGrid, reps: usize) -> Result<Vec<RuntimeRow>> {
    grid.validate()?;
    let reps = reps.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Config(format!("cannot build benchmark thread pool: {e}")))?;
    let datasets: Vec<Dataset> = grid
        .xb_sizes
        .iter()
        .map(|&xb| simulate(&grid.sim_config(xb, 0)).map(|(d, _)| d))
        .collect::<Result<_>>()?;
    let cells: Vec<(Method, usize)> = grid
        .methods
        .iter()
        .flat_map(|&m| (0..grid.xb_sizes.len()).map(move |k| (m, k)))
        .collect();
    // repetitions sweep every cell in turn so transient load is shared
    let mut times = vec![Vec::with_capacity(reps); cells.len()];
    for _ in 0..reps {
        for (slot, &(method, k)) in cells.iter().enumerate() {
            let t = pool
                .install(|| fit_method(method, &datasets[k], &grid.configs))?
                .1;
            times[slot].push(t);
        }
    }
    let rows = cells
        .iter()
        .zip(times)
        .map(|(&(method, k), mut t)| {
            t.sort_by(f64::total_cmp);
            RuntimeRow {
                method,
                xb_size: grid.xb_sizes[k],
                median_wall_time_s: t[t.len() / 2],
                repetitions: reps,
            }
        })
        .collect();
    Ok(rows)
}

/// Output switches shared by the CSV writers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    /// When false, wall times are written as 0 so files are reproducible byte for byte.
    pub timing: bool,
    /// Also write tidy per-figure tables.
    pub plot_data: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            timing: true,
            plot_data: false,
        }
    }
}

fn secs(t: f64, opts: OutputOptions) -> String {
    format!("{:.6}", if opts.timing { t } else { 0.0 })
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_identification_csv<W: Write>(
    w: W,
    results: &[IdentificationResult],
    opts: OutputOptions,
) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "method",
        "xb_size",
        "seed",
        "exact_match",
        "precision",
        "recall",
        "wall_time_s",
    ])?;
    for r in results {
        out.write_record([
            r.method.name().to_string(),
            r.xb_size.to_string(),
            r.seed.to_string(),
            r.exact_match.to_string(),
            format!("{:.6}", r.precision),
            format!("{:.6}", r.recall),
            secs(r.wall_time_s, opts),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow], opts: OutputOptions) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "method",
        "xb_size",
        "runs",
        "identification_rate",
        "mean_precision",
        "mean_recall",
        "mean_wall_time_s",
    ])?;
    for r in rows {
        out.write_record([
            r.method.name().to_string(),
            r.xb_size.to_string(),
            r.runs.to_string(),
            format!("{:.4}", r.identification_rate),
            format!("{:.6}", r.mean_precision),
            format!("{:.6}", r.mean_recall),
            secs(r.mean_wall_time_s, opts),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_runtime_csv<W: Write>(w: W, rows: &[RuntimeRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["method", "xb_size", "median_wall_time_s", "repetitions"])?;
    for r in rows {
        out.write_record([
            r.method.name().to_string(),
            r.xb_size.to_string(),
            format!("{:.6}", r.median_wall_time_s),
            r.repetitions.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn write_precision_recall_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["method", "xb_size", "metric", "value"])?;
    for r in rows {
        for (metric, v) in [("precision", r.mean_precision), ("recall", r.mean_recall)] {
            out.write_record([
                r.method.name(),
                &r.xb_size.to_string(),
                metric,
                &format!("{v:.6}"),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_runtime_tidy_csv<W: Write>(w: W, rows: &[SummaryRow], opts: OutputOptions) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["method", "xb_size", "wall_time_s"])?;
    for r in rows {
        out.write_record([
            r.method.name(),
            &r.xb_size.to_string(),
            &secs(r.mean_wall_time_s, opts),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Resolved configuration written next to the result tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub grid: ExperimentGrid,
    /// Every method sees the same dataset within a run.
    pub paired_datasets: bool,
    pub seed_derivation: String,
    pub rng: String,
}

impl Manifest {
    pub fn new(grid: &ExperimentGrid) -> Self {
        Self {
            grid: grid.clone(),
            paired_datasets: true,
            seed_derivation: "splitmix64(master_seed, xb_size, run_index)".into(),
            rng: "ChaCha8 (rand_chacha)".into(),
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(
        dir.join(name),
    )?))
}

/// Writes `identification.csv`, `summary.csv`, `manifest.json`, and with
/// `plot_data` also `runtime_by_size.csv` and `precision_recall.csv`.
pub fn write_experiment(
    dir: &Path,
    grid: &ExperimentGrid,
    results: &[IdentificationResult],
    opts: OutputOptions,
) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(dir)?;
    let summary = summarize(results);
    write_identification_csv(create(dir, "identification.csv")?, results, opts)?;
    write_summary_csv(create(dir, "summary.csv")?, &summary, opts)?;
    let mut manifest = create(dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut manifest, &Manifest::new(grid))?;
    manifest.write_all(b"\n")?;
    manifest.flush()?;
    if opts.plot_data {
        write_runtime_tidy_csv(create(dir, "runtime_by_size.csv")?, &summary, opts)?;
        write_precision_recall_csv(create(dir, "precision_recall.csv")?, &summary)?;
    }
    Ok(summary)
}
