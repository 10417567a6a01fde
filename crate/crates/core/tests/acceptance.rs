//! Acceptance suite. Runs each criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any failed.
//!
//! `cargo test --release --test acceptance` runs it on its own.

use std::collections::BTreeSet;
use std::time::Instant;

use icscm::harness::{
    run_identification, run_runtime_benchmark, summarize, write_experiment, ExperimentGrid, Method,
    OutputOptions, SummaryRow,
};
use icscm::{
    candidate_rules, chi2_sf, independence_test, oracle_accuracy, prune, scm_fit, simulate,
    Conjunction, ContingencyTable, Dataset, Rule, ScmConfig, TestMethod,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASTER_SEED: u64 = 1;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rates(rows: &[SummaryRow], method: Method, f: impl Fn(&SummaryRow) -> f64) -> Vec<f64> {
    rows.iter().filter(|r| r.method == method).map(f).collect()
}

fn fmt(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2}")).collect();
    format!("[{}]", parts.join(" "))
}

fn grid(methods: &[Method], sizes: Vec<usize>, runs: usize) -> ExperimentGrid {
    let mut g = ExperimentGrid::new(methods.to_vec(), sizes);
    g.n_runs = runs;
    g.master_seed = MASTER_SEED;
    g
}

/// Identification over 1..=7 distractors with 50 runs; the first 20 runs of
/// each cell form the 20-seed table.
fn identification_runs() -> Vec<icscm::harness::IdentificationResult> {
    let g = grid(
        &[Method::Scm, Method::Icscm, Method::Icp],
        (1..=7).collect(),
        50,
    );
    run_identification(&g).expect("identification grid")
}

fn identification_table(results: &[icscm::harness::IdentificationResult]) -> Outcome {
    let first20: Vec<_> = results.iter().filter(|r| r.run < 20).cloned().collect();
    let rows = summarize(&first20);
    let rate = |r: &SummaryRow| r.identification_rate;
    let scm = rates(&rows, Method::Scm, rate);
    let icscm = rates(&rows, Method::Icscm, rate);
    let icp = rates(&rows, Method::Icp, rate);
    let pass = scm.iter().all(|&r| r == 0.0)
        && icscm.iter().all(|&r| r >= 0.85)
        && icp[..5].iter().all(|&r| r >= 0.85)
        && icp[6] <= 0.30;
    check(
        pass,
        format!("scm {} icscm {} icp {}", fmt(&scm), fmt(&icscm), fmt(&icp)),
    )
}

fn high_dimension() -> Outcome {
    let g = grid(&[Method::Icscm], vec![20, 50], 20);
    let rows = summarize(&run_identification(&g).expect("high-dimensional grid"));
    let r = rates(&rows, Method::Icscm, |r| r.identification_rate);
    check(
        r[0] >= 0.75 && r[1] >= 0.80,
        format!("icscm at 20: {:.2}, at 50: {:.2}", r[0], r[1]),
    )
}

fn runtime_shape() -> Outcome {
    let g = grid(&[Method::Icscm, Method::Icp], (2..=10).collect(), 1);
    let rows = run_runtime_benchmark(&g, 7).expect("benchmark");
    let times = |m: Method| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.method == m)
            .map(|r| r.median_wall_time_s)
            .collect()
    };
    let ratios = |t: &[f64]| -> Vec<f64> { t.windows(2).map(|w| w[1] / w[0]).collect() };
    let icp = ratios(&times(Method::Icp));
    let icscm = ratios(&times(Method::Icscm));
    // ratio k compares size k + 3 with size k + 2
    let icp_late = &icp[3..];
    let pass = icp_late.iter().all(|&r| r >= 1.5) && icscm.iter().all(|&r| r <= 1.5);
    check(
        pass,
        format!(
            "icp step ratios 3..10 {} icscm step ratios {}",
            fmt(&icp),
            fmt(&icscm)
        ),
    )
}

fn precision_recall(results: &[icscm::harness::IdentificationResult]) -> Outcome {
    let rows = summarize(results);
    let icp_p = rates(&rows, Method::Icp, |r| r.mean_precision);
    let icp_r = rates(&rows, Method::Icp, |r| r.mean_recall);
    let icscm_p = rates(&rows, Method::Icscm, |r| r.mean_precision);
    let icscm_r = rates(&rows, Method::Icscm, |r| r.mean_recall);
    let pass = icp_p.iter().all(|&p| p >= 0.9)
        && icp_r[6] <= 0.3
        && icscm_p.iter().all(|&p| p >= 0.9)
        && icscm_r.iter().all(|&r| r >= 0.9);
    check(
        pass,
        format!(
            "icp precision {} recall {} icscm precision {} recall {}",
            fmt(&icp_p),
            fmt(&icp_r),
            fmt(&icscm_p),
            fmt(&icscm_r)
        ),
    )
}

// Chi-squared density integrated numerically, sharing nothing with the
// library's series and continued-fraction code.

fn ln_gamma_half(k: u64) -> f64 {
    // ln Gamma(k / 2) by the recurrence from Gamma(1) = 1, Gamma(1/2) = sqrt(pi)
    let (mut z, mut acc) = if k.is_multiple_of(2) {
        (1.0, 0.0)
    } else {
        (0.5, 0.5 * std::f64::consts::PI.ln())
    };
    while z < k as f64 / 2.0 {
        acc += z.ln();
        z += 1.0;
    }
    acc
}

fn chi2_pdf(t: f64, k: u64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let h = k as f64 / 2.0;
    ((h - 1.0) * t.ln() - t / 2.0 - h * 2f64.ln() - ln_gamma_half(k)).exp()
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn tail_by_quadrature(x: f64, k: u64) -> f64 {
    let f = |t: f64| chi2_pdf(t, k);
    let upper = x + 60.0 + 30.0 * (2.0 * k as f64).sqrt() + k as f64;
    let (fa, fb, fm) = (f(x), f(upper), f((x + upper) / 2.0));
    let whole = (upper - x) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, x, upper, fa, fm, fb, whole, 1e-11, 50)
}

const HAND_TABLES: [(&[u64], &[u64], f64, f64); 20] = [
    (&[10, 20], &[30, 40], 0.7936507936507936, 0.8043486460964835),
    (&[25, 25], &[25, 25], 0.0, 0.0),
    (&[50, 0], &[0, 50], 100.0, 138.62943611198907),
    (&[5, 15], &[15, 5], 10.0, 10.464962875290954),
    (&[12, 7], &[3, 18], 10.165413533834586, 10.69199415788704),
    (
        &[100, 200],
        &[300, 400],
        7.936507936507937,
        8.043486460964836,
    ),
    (&[1, 2], &[3, 4], 0.07936507936507939, 0.08043486460964827),
    (
        &[40, 10, 30],
        &[20, 30, 20],
        18.080357142857142,
        18.60731432833756,
    ),
    (&[8, 0, 4], &[2, 6, 0], 13.333333333333334, 16.9124182096065),
    (
        &[33, 33, 34],
        &[10, 50, 40],
        16.270739778725208,
        16.96236010516419,
    ),
    (&[7, 9, 11, 13], &[13, 11, 9, 7], 4.0, 4.056712669733578),
    (
        &[100, 90, 80, 70],
        &[60, 70, 80, 90],
        12.549019607843135,
        12.618334317426964,
    ),
    (&[0, 5, 10], &[10, 5, 0], 20.0, 27.725887222397812),
    (&[15, 25], &[0, 10], 5.357142857142857, 8.161371152850785),
    (&[3, 0], &[0, 7], 10.0, 12.217286041097866),
    (
        &[1000, 1100],
        &[950, 1050],
        0.005821052332680503,
        0.005821064746325266,
    ),
    (
        &[17, 23, 29],
        &[31, 37, 41],
        0.44063004539669914,
        0.44161699625997564,
    ),
    (
        &[2, 4, 6, 8, 10],
        &[10, 8, 6, 4, 2],
        13.333333333333332,
        14.362511230021102,
    ),
    (&[60, 40], &[45, 55], 4.511278195488721, 4.528567537463012),
    (&[9, 1, 0, 5], &[1, 9, 5, 0], 22.8, 28.58551189793879),
];

fn statistics_oracles() -> Outcome {
    let mut worst_sf = 0.0f64;
    for k in [1u64, 2, 3, 4, 5, 8, 10, 20, 30, 50] {
        for mult in [0.25, 0.5, 1.0, 1.5, 2.5] {
            let x = mult * k as f64;
            let err = (chi2_sf(x, k).unwrap() - tail_by_quadrature(x, k)).abs();
            worst_sf = worst_sf.max(err);
        }
    }

    let mut worst_stat = 0.0f64;
    for (r0, r1, chi2, g) in HAND_TABLES {
        let t = ContingencyTable::from_counts([r0.to_vec(), r1.to_vec()]).unwrap();
        worst_stat = worst_stat.max((t.statistic(TestMethod::Chi2).0 - chi2).abs());
        worst_stat = worst_stat.max((t.statistic(TestMethod::Gtest).0 - g).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut rejections = [0usize; 2];
    for _ in 0..1000 {
        let y: Vec<u8> = (0..2000).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let e: Vec<u32> = (0..2000).map(|_| u32::from(rng.gen_bool(0.5))).collect();
        for (slot, method) in [TestMethod::Chi2, TestMethod::Gtest]
            .into_iter()
            .enumerate()
        {
            if independence_test(&y, &e, method).unwrap().p_value < 0.05 {
                rejections[slot] += 1;
            }
        }
    }
    let calib = rejections.map(|r| r as f64 / 1000.0);
    let pass =
        worst_sf <= 1e-4 && worst_stat <= 1e-6 && calib.iter().all(|r| (0.03..=0.07).contains(r));
    check(
        pass,
        format!(
            "max sf error {worst_sf:.2e} over 50 points, max statistic error {worst_stat:.2e} over 20 tables, null rejection chi2 {:.3} g {:.3}",
            calib[0], calib[1]
        ),
    )
}

fn simulator_fidelity() -> Outcome {
    let g = grid(&[Method::Scm], vec![3], 100);
    let cfg = g.sim_config(3, 0);
    let (data, truth) = simulate(&cfg).unwrap();
    let m = cfg.n_samples_per_env as f64;

    let mut worst_z = 0.0f64;
    for (e, probs) in cfg.p_xa.iter().enumerate() {
        let rows: Vec<usize> = (0..data.n_samples())
            .filter(|&i| data.envs()[i] == e as u32)
            .collect();
        let mut expected: Vec<(usize, f64)> = vec![(0, probs[0]), (1, probs[1])];
        expected.extend(truth.distractor_indices.iter().map(|&j| (j, cfg.eps_xb)));
        for (j, p) in expected {
            let freq =
                rows.iter().filter(|&&i| data.column(j)[i] == 1).count() as f64 / rows.len() as f64;
            worst_z = worst_z.max((freq - p).abs() / (p * (1.0 - p) / m).sqrt());
        }
    }

    let (acc_parents, _) = oracle_accuracy(&data, &truth);

    let mut worst_gap = 0.0f64;
    for a in 0..2u8 {
        for b in 0..2u8 {
            let mut cell = Vec::new();
            for e in 0..cfg.n_env as u32 {
                let idx: Vec<usize> = (0..data.n_samples())
                    .filter(|&i| {
                        data.envs()[i] == e && data.column(0)[i] == a && data.column(1)[i] == b
                    })
                    .collect();
                if idx.len() >= 500 {
                    let ones = idx.iter().filter(|&&i| data.labels()[i] == 1).count();
                    cell.push(ones as f64 / idx.len() as f64);
                }
            }
            if cell.len() == cfg.n_env {
                let gap = cell.iter().cloned().fold(f64::MIN, f64::max)
                    - cell.iter().cloned().fold(f64::MAX, f64::min);
                worst_gap = worst_gap.max(gap);
            }
        }
    }

    let child_wins = (0..100)
        .filter(|&run| {
            let (d, t) = simulate(&g.sim_config(3, run)).unwrap();
            let (p, c) = oracle_accuracy(&d, &t);
            c > p
        })
        .count();

    let pass = worst_z <= 3.0
        && (acc_parents - 0.95).abs() <= 0.01
        && worst_gap <= 0.03
        && child_wins >= 95;
    check(
        pass,
        format!(
            "max marginal z {worst_z:.2}, P(Y = A1 AND A2) {acc_parents:.4}, max invariance gap {worst_gap:.4}, child beats parents in {child_wins}/100"
        ),
    )
}

fn pruning() -> Outcome {
    let g = grid(&[Method::Icscm], vec![3], 50);
    let correct = Conjunction::new(vec![Rule::new(0, 1), Rule::new(1, 1)]);
    let mut removes_distractor = 0;
    let mut keeps_correct = 0;
    for run in 0..50 {
        let (data, truth) = simulate(&g.sim_config(3, run)).unwrap();
        let distractor = *truth
            .distractor_indices
            .iter()
            .nth(run % truth.distractor_indices.len())
            .unwrap();
        let mut rules = correct.rules.clone();
        rules.insert(run % 3, Rule::new(distractor, (run % 2) as u8));
        if prune(&Conjunction::new(rules), &data, 0.05).unwrap() == correct {
            removes_distractor += 1;
        }
        if prune(&correct, &data, 0.05).unwrap() == correct {
            keeps_correct += 1;
        }
    }
    check(
        removes_distractor >= 45 && keeps_correct >= 45,
        format!("distractor removed in {removes_distractor}/50, correct model kept in {keeps_correct}/50"),
    )
}

/// Step-by-step greedy with utilities recomputed from scratch each round.
fn reference_greedy(data: &Dataset, p: f64, max_rules: usize) -> Vec<Rule> {
    let mut rules = Vec::new();
    for j in 0..data.n_features() {
        let col = data.column(j);
        if col.iter().any(|&v| v != col[0]) {
            rules.push(Rule::new(j, 1));
            rules.push(Rule::new(j, 0));
        }
    }
    let y = data.labels();
    let mut negatives: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    let mut positives: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let mut chosen: Vec<Rule> = Vec::new();
    while !negatives.is_empty() && chosen.len() < max_rules {
        let mut best: Option<(usize, f64)> = None;
        for (k, r) in rules.iter().enumerate() {
            if chosen.contains(r) {
                continue;
            }
            let a = negatives
                .iter()
                .filter(|&&i| r.evaluate(&data.row(i)) == 0)
                .count() as f64;
            let b = positives
                .iter()
                .filter(|&&i| r.evaluate(&data.row(i)) == 0)
                .count() as f64;
            let u = a - p * b;
            if best.is_none_or(|(_, bu)| u > bu) {
                best = Some((k, u));
            }
        }
        let Some((k, _)) = best else { break };
        let r = rules[k];
        negatives.retain(|&i| r.evaluate(&data.row(i)) == 1);
        positives.retain(|&i| r.evaluate(&data.row(i)) == 1);
        chosen.push(r);
    }
    chosen
}

fn greedy_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut matches = 0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=4);
        let m = rng.gen_range(4..=64);
        let cols: Vec<Vec<u8>> = (0..d)
            .map(|_| (0..m).map(|_| rng.gen_range(0..2)).collect())
            .collect();
        let y: Vec<u8> = (0..m).map(|_| rng.gen_range(0..2)).collect();
        let e: Vec<u32> = (0..m).map(|_| rng.gen_range(0..2)).collect();
        let data = Dataset::from_columns(cols, y, e).unwrap();
        let p = [0.1, 0.5, 0.75, 1.0, 2.5, 5.0][rng.gen_range(0..6)];
        let max_rules = rng.gen_range(1..=8);
        let expected = reference_greedy(&data, p, max_rules);
        let rules = candidate_rules(&data);
        let got: Vec<Rule> = if rules.is_empty() {
            Vec::new()
        } else {
            scm_fit(&data, &ScmConfig { p, max_rules }, &rules)
                .unwrap()
                .model
                .rules
        };
        if got == expected {
            matches += 1;
        }
    }
    check(
        matches == 100,
        format!("{matches}/100 instances match the brute-force reference"),
    )
}

fn determinism() -> Outcome {
    let methods = [
        Method::Scm,
        Method::Icscm,
        Method::IcscmNoPrune,
        Method::Icp,
    ];
    let mut g = grid(&methods, vec![1, 2, 3], 5);
    g.base.n_samples_per_env = 3000;
    let opts = OutputOptions {
        timing: false,
        plot_data: true,
    };
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    // second run on a single worker: scheduling must not leak into the output
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let first = run_identification(&g).unwrap();
    let second = single.install(|| run_identification(&g)).unwrap();
    write_experiment(dirs[0].path(), &g, &first, opts).unwrap();
    write_experiment(dirs[1].path(), &g, &second, opts).unwrap();
    let files = [
        "identification.csv",
        "summary.csv",
        "precision_recall.csv",
        "runtime_by_size.csv",
        "manifest.json",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| {
            std::fs::read(dirs[0].path().join(f)).unwrap()
                != std::fs::read(dirs[1].path().join(f)).unwrap()
        })
        .collect();
    let parents: BTreeSet<usize> = [0, 1].into();
    let sane = first
        .iter()
        .all(|r| r.exact_match == (r.selected_features == parents));
    check(
        differing.is_empty() && sane,
        format!("{} files compared, differing: {:?}", files.len(), differing),
    )
}

fn main() {
    let start = Instant::now();
    let ident = identification_runs();
    let criteria: Vec<Criterion> = vec![
        (
            "identification table, 20 seeds",
            Box::new(|| identification_table(&ident)),
        ),
        ("high-dimensional identification", Box::new(high_dimension)),
        ("runtime scaling", Box::new(runtime_shape)),
        (
            "precision and recall, 50 seeds",
            Box::new(|| precision_recall(&ident)),
        ),
        ("statistics oracles", Box::new(statistics_oracles)),
        ("simulator fidelity", Box::new(simulator_fidelity)),
        ("pruning", Box::new(pruning)),
        ("greedy oracle equivalence", Box::new(greedy_oracle)),
        ("byte-identical reruns", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {tag} {name}: {}", k + 1, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.0?}",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
