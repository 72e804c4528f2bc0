//! End-to-end verification suite: identities, recurrences, constants,
//! convergence orders, coverage and the qualitative trends of the
//! experiments. Used by the `verify` subcommand and the acceptance tests.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{self, BoundId, ProbBudget};
use crate::eft::DoubleDouble;
use crate::fp::{Precision, Rounder, RoundingMode};
use crate::harness::{self, Experiment, ExperimentConfig, ExperimentRow};
use crate::kernels::{self, model};
use crate::oracles;
use crate::tree::CompTree;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    /// Acceptance criterion this check belongs to.
    pub criterion: &'static str,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(criterion: &'static str, name: &str, pass: bool, detail: String) -> Self {
        CheckResult {
            criterion,
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Running count of deterministic-bound checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetTally {
    pub checks: usize,
    pub exceedances: usize,
}

impl DetTally {
    fn check(&mut self, error: f64, bound: f64) {
        self.checks += 1;
        if error.abs() > bound {
            self.exceedances += 1;
        }
    }

    fn rows(&mut self, rows: &[ExperimentRow]) {
        for r in rows {
            for id in [BoundId::DetPartial, BoundId::DetInputs] {
                if let Some(b) = r.bounds.get(id) {
                    self.check(r.rel_error, b);
                }
            }
        }
    }

    pub fn merge(&mut self, other: DetTally) {
        self.checks += other.checks;
        self.exceedances += other.exceedances;
    }
}

/// Problem sizes and trial counts of the suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub identity_configs: usize,
    pub identity_max_n: usize,
    pub recurrence_runs: usize,
    pub recurrence_max_n: usize,
    pub coverage_trials: usize,
    pub coverage_n: usize,
    pub reduction_instances: usize,
    pub figure_max_n: usize,
    pub figure_trials: usize,
    /// Block-summation trend point; `None` skips it.
    pub fabsum_n: Option<usize>,
    pub fabsum_trials: usize,
}

impl Scale {
    pub fn full() -> Self {
        Scale {
            identity_configs: 200,
            identity_max_n: 10_000,
            recurrence_runs: 100,
            recurrence_max_n: 1000,
            coverage_trials: 1000,
            coverage_n: 10_000,
            reduction_instances: 50,
            figure_max_n: 100_000,
            figure_trials: 100,
            fabsum_n: Some(1_000_000),
            fabsum_trials: 21,
        }
    }

    pub fn quick() -> Self {
        Scale {
            identity_configs: 30,
            identity_max_n: 1000,
            recurrence_runs: 20,
            recurrence_max_n: 200,
            coverage_trials: 100,
            coverage_n: 1000,
            reduction_instances: 10,
            figure_max_n: 10_000,
            figure_trials: 20,
            fabsum_n: None,
            fabsum_trials: 5,
        }
    }
}

fn uniform(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn log_uniform_n(lo: usize, hi: usize, rng: &mut impl Rng) -> usize {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    (rng.random_range(a..=b).exp().round() as usize).clamp(lo, hi)
}

const IDENTITY_TOL: f64 = 1e-10;

/// Both tree-error identities against the observed error, on random trees,
/// sizes, precisions and rounding modes. Also tallies the deterministic
/// bounds on every run.
pub fn identity_suite(configs: usize, max_n: usize, seed: u64) -> (CheckResult, DetTally) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = DetTally::default();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..configs {
        let n = log_uniform_n(10, max_n, &mut rng);
        let t = [8, 11, 24][rng.random_range(0..3)];
        let p = Precision::new(t).expect("valid precision");
        let mode = if rng.random::<bool>() {
            RoundingMode::Stochastic
        } else {
            RoundingMode::NearestTiesEven
        };
        let tree = match i % 3 {
            0 => CompTree::sequential(n, p),
            1 => CompTree::pairwise(n, p),
            _ => CompTree::random(n, p, &mut rng),
        }
        .expect("n >= 2");
        let x = uniform(n, &mut rng);
        let mut rounder =
            Rounder::new(mode, Some(ChaCha8Rng::seed_from_u64(rng.random()))).expect("rng given");
        let run = kernels::run_tree_sum(&tree, &x, &mut rounder).expect("valid run");
        let lp = oracles::error_via_local_products(&run, &tree).expect("matching trace");
        let (cr, _) = oracles::error_via_child_recurrence(&run, &tree).expect("matching trace");
        for (label, c) in [("local-products", lp), ("child-recurrence", cr)] {
            if run.error != 0.0 {
                worst = worst.max(c.rel_diff());
            }
            if !c.holds(IDENTITY_TOL) {
                failures.push(format!(
                    "#{i} {label} n={n} t={t} {mode}: {} vs {}",
                    c.value, c.observed
                ));
            }
        }
        let u = mode.bound_factor() * p.unit_roundoff();
        let det =
            bounds::det_bounds(&tree, &run.exact_partials, &run.inputs, u).expect("mono tree");
        tally.check(run.error, det.get(BoundId::DetPartial).unwrap_or(0.0));
        tally.check(run.error, det.get(BoundId::DetInputs).unwrap_or(0.0));
    }
    let detail = if failures.is_empty() {
        format!("{configs} runs, worst relative mismatch {worst:.2e} (tol {IDENTITY_TOL:e})")
    } else {
        format!("{} failures, first: {}", failures.len(), failures[0])
    };
    (
        CheckResult::new(
            "identities",
            "exact-identity suite",
            failures.is_empty(),
            detail,
        ),
        tally,
    )
}

/// Compensated child-error recurrences against their definitions, plus the
/// base case.
pub fn recurrence_suite(runs: usize, max_n: usize, seed: u64) -> CheckResult {
    let p = Precision::HALF;
    let u = p.unit_roundoff();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..runs {
        let n = rng.random_range(2..=max_n);
        let x = uniform(n, &mut rng);
        let mode = if i % 2 == 0 {
            RoundingMode::Stochastic
        } else {
            RoundingMode::NearestTiesEven
        };
        let mut rounder =
            Rounder::new(mode, Some(ChaCha8Rng::seed_from_u64(rng.random()))).expect("rng given");
        let (run, ct) = kernels::run_compensated(&x, p, &mut rounder).expect("n >= 2");
        match oracles::compensated_child_errors(&ct, &run.inputs, u, IDENTITY_TOL) {
            Err(e) => failures.push(format!("#{i} n={n}: {e}")),
            Ok(t) => {
                worst = worst.max(t.worst_mismatch);
                let s2 = DoubleDouble::from(run.inputs[0]) + run.inputs[1];
                let s2sig = (s2 * ct.sigma[2]).to_f64();
                let z2 = t.z_def[2];
                let c2 = (DoubleDouble::from(run.inputs[1]) + z2) * ct.delta[2] + s2sig;
                let eps = 4.0 * f64::EPSILON;
                let base_ok = t.y_def[2] == 0.0
                    && t.s_def[2] == 0.0
                    && t.y_rec[2] == 0.0
                    && t.s_rec[2] == 0.0
                    && (z2 - s2sig).abs() <= eps * z2.abs()
                    && (t.c_def[2] - c2.to_f64()).abs()
                        <= eps * (c2.to_f64().abs() + s2sig.abs() + u * u * z2.abs());
                if !base_ok {
                    failures.push(format!("#{i}: base case"));
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{runs} runs, worst mismatch {worst:.2e} (tol {IDENTITY_TOL:e}), base cases exact")
    } else {
        format!("{} failures, first: {}", failures.len(), failures[0])
    };
    CheckResult::new(
        "recurrences",
        "compensated recurrence suite",
        failures.is_empty(),
        detail,
    )
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

/// The printed constants, each within 2%.
pub fn constants_check() -> CheckResult {
    let b = ProbBudget::new(1e-2, 1e-3).expect("valid budget");
    let c = bounds::constants(1e5, 1e5, 1e5, 2f64.powi(-11), b);
    let big = bounds::constants(
        1e10,
        1e10,
        1e10,
        2f64.powi(-24),
        ProbBudget::new(1e-2, 1e-32).expect("valid budget"),
    );
    let checks = [
        (
            "sqrt(2ln(2/delta))",
            c.first_order,
            3.26,
            within(c.first_order, 3.26, 0.02),
        ),
        (
            "lambda_n (n=1e5)",
            c.lambda_n,
            6.2,
            within(c.lambda_n, 6.2, 0.02),
        ),
        (
            "1+phi (n=h=1e5, t=11)",
            1.0 + c.phi_n,
            4.4,
            within(1.0 + c.phi_n, 4.4, 0.02),
        ),
        (
            "lambda_n (n=1e10)",
            big.lambda_n,
            14.0,
            within(big.lambda_n, 14.0, 0.02),
        ),
        (
            "1+phi (n=h=1e10, t=24)",
            1.0 + big.phi_n,
            1.12,
            1.0 + big.phi_n < 1.12,
        ),
    ];
    let pass = checks.iter().all(|c| c.3);
    let detail = checks
        .iter()
        .map(|(name, v, t, ok)| format!("{name}={v:.4} (~{t}{})", if *ok { "" } else { " MISS" }))
        .collect::<Vec<_>>()
        .join(", ");
    CheckResult::new("constants", "constants spot-check", pass, detail)
}

/// `α(0) = √6` and a stable ratio `(α² - 6 - 26u)/u²`.
pub fn alpha_check() -> CheckResult {
    let at_zero = bounds::alpha(0.0);
    let ratio =
        |u: f64| ((bounds::alpha_squared_dd(u) - 6.0 - 26.0 * u) * (1.0 / (u * u))).to_f64();
    let r24 = ratio(2f64.powi(-24));
    let r32 = ratio(2f64.powi(-32));
    let stable = r24 > 0.0 && r32 > 0.0 && r24 / r32 <= 2.0 && r32 / r24 <= 2.0;
    let pass = at_zero == 6f64.sqrt() && stable;
    CheckResult::new(
        "alpha",
        "alpha verification",
        pass,
        format!(
            "alpha(0)={at_zero} (sqrt6={}), ratio at 2^-24: {r24:.6}, at 2^-32: {r32:.6}",
            6f64.sqrt()
        ),
    )
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Precisions of the convergence-order fits.
pub const SLOPE_BITS: [u32; 3] = [8, 11, 14];

/// Slope of `|e_n - Σ s_k δ_k|` against `u` with `δ_k = u r_k` for frozen
/// directions `r_k`, one value per instance.
pub fn first_order_slopes(instances: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|_| {
            let p = Precision::SINGLE;
            let tree = CompTree::random(n, p, &mut rng).expect("n >= 2");
            let x = uniform(n, &mut rng);
            let dirs: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let s = tree.exact_partial_sums_dd(&x).expect("matching length");
            let us: Vec<f64> = SLOPE_BITS.iter().map(|&t| 2f64.powi(-(t as i32))).collect();
            let res: Vec<f64> = us
                .iter()
                .map(|&u| {
                    let d: Vec<f64> = dirs.iter().map(|r| r * u).collect();
                    let e = model::tree_error_dd(&tree, &x, &d);
                    let first = (2..=n).fold(DoubleDouble::ZERO, |acc, k| acc + s[k] * d[k]);
                    (e - first).to_f64().abs()
                })
                .collect();
            loglog_slope(&us, &res)
        })
        .collect()
}

/// Slope of `|e_n - second-order expansion|` for compensated summation.
pub fn second_order_slopes(instances: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|_| {
            let x = uniform(n, &mut rng);
            let mut dirs = || {
                (0..=n)
                    .map(|_| rng.random_range(-1.0..=1.0))
                    .collect::<Vec<f64>>()
            };
            let (a, b, c, d) = (dirs(), dirs(), dirs(), dirs());
            let us: Vec<f64> = SLOPE_BITS.iter().map(|&t| 2f64.powi(-(t as i32))).collect();
            let res: Vec<f64> = us
                .iter()
                .map(|&u| {
                    let sc = |v: &Vec<f64>| v.iter().map(|r| r * u).collect::<Vec<f64>>();
                    let pert = model::CompensatedPerturbation {
                        eta: sc(&a),
                        sigma: sc(&b),
                        delta: sc(&c),
                        beta: sc(&d),
                    };
                    let (e, ct) = model::compensated_error(&x, &pert);
                    (e - oracles::compensated_second_order(&ct, &x)).abs()
                })
                .collect();
            loglog_slope(&us, &res)
        })
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|s| format!("{s:.3}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Median convergence orders of the first- and second-order expansions.
pub fn convergence_check(seed: u64) -> Vec<CheckResult> {
    let first = first_order_slopes(5, 300, seed);
    let second = second_order_slopes(5, 300, seed ^ 0x5eed);
    let m1 = harness::median(&first);
    let m2 = harness::median(&second);
    vec![
        CheckResult::new(
            "convergence",
            "first-order convergence",
            (m1 - 2.0).abs() <= 0.3,
            format!(
                "median slope {m1:.3} (want 2 +- 0.3), instances [{}]",
                fmt_list(&first)
            ),
        ),
        CheckResult::new(
            "convergence",
            "second-order convergence (compensated)",
            (m2 - 3.0).abs() <= 0.5,
            format!(
                "median slope {m2:.3} (want 3 +- 0.5), instances [{}]",
                fmt_list(&second)
            ),
        ),
    ]
}

/// Stochastic-rounding exceedance of `PROB_CLOSED_PARTIAL` and `PROB_REC`
/// for sequential and pairwise summation.
pub fn coverage_suite(trials: usize, n: usize, seed: u64) -> (Vec<CheckResult>, DetTally) {
    let mut tally = DetTally::default();
    let mut out = Vec::new();
    for exp in [Experiment::Seq, Experiment::Pairwise] {
        let cfg = ExperimentConfig {
            experiment: exp.clone(),
            n_grid: vec![n],
            modes: vec![RoundingMode::Stochastic],
            trials,
            seed,
            ..Default::default()
        };
        let rows = harness::run_experiment(&cfg).expect("valid config").rows;
        tally.rows(&rows);
        let cov =
            harness::coverage_report(&rows, cfg.budget, trials.min(100)).expect("enough rows");
        for id in [BoundId::ProbClosedPartial, BoundId::ProbRec] {
            let line = cov.iter().find(|c| c.bound == id).expect("bound present");
            out.push(CheckResult::new(
                "coverage",
                &format!("coverage {id} ({exp}, n={n}, SR)"),
                line.pass(),
                format!(
                    "{}/{} exceedances, fraction {:.4} <= limit {:.4}",
                    line.exceedances,
                    line.rows,
                    line.fraction(),
                    line.limit
                ),
            ));
        }
    }
    (out, tally)
}

/// Random mono-precision instances: mixed bounds equal the general ones.
pub fn reduction_check(instances: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = ProbBudget::default();
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = log_uniform_n(2, 5000, &mut rng);
        let p = Precision::new([8, 11, 24][rng.random_range(0..3)]).expect("valid precision");
        let tree = CompTree::random(n, p, &mut rng).expect("n >= 2");
        let x = uniform(n, &mut rng);
        let s = tree.exact_partial_sums(&x).expect("matching length");
        for mode in [RoundingMode::NearestTiesEven, RoundingMode::Stochastic] {
            let f = mode.bound_factor();
            let mono = bounds::prob_bounds_general(&tree, &s, &x, f * p.unit_roundoff(), budget)
                .expect("mono");
            let mixed = bounds::mixed_bounds(&tree, &s, &x, f, budget).expect("valid");
            for (a, b) in [
                (BoundId::ProbRec, BoundId::MixRec),
                (BoundId::ProbClosedPartial, BoundId::MixClosedPartial),
                (BoundId::ProbClosedInputs, BoundId::MixClosedInputs),
            ] {
                let (va, vb) = (
                    mono.get(a).unwrap_or(f64::NAN),
                    mixed.get(b).unwrap_or(f64::NAN),
                );
                let rel = if va == 0.0 {
                    (va - vb).abs()
                } else {
                    (va - vb).abs() / va
                };
                worst = if rel.is_nan() {
                    f64::INFINITY
                } else {
                    worst.max(rel)
                };
            }
        }
    }
    CheckResult::new(
        "reduction",
        "reduction consistency",
        worst <= 1e-12,
        format!("{instances} instances, worst relative difference {worst:.2e} (tol 1e-12)"),
    )
}

fn medians_by_n(rows: &[ExperimentRow], mode: RoundingMode) -> (Vec<f64>, Vec<f64>) {
    harness::summarize(rows)
        .into_iter()
        .filter(|s| s.mode == mode)
        .map(|s| (s.n as f64, s.median_rel_error))
        .unzip()
}

fn run_figure(exp: Experiment, max_n: usize, trials: usize, seed: u64) -> Vec<ExperimentRow> {
    let cfg = ExperimentConfig {
        experiment: exp,
        n_grid: harness::log_grid(100, max_n, 2),
        trials,
        seed,
        ..Default::default()
    };
    harness::run_experiment(&cfg).expect("valid config").rows
}

/// Qualitative trends of the sequential/pairwise, shifted and compensated
/// experiments at desk scale.
pub fn figure_trends(max_n: usize, trials: usize, seed: u64) -> (Vec<CheckResult>, DetTally) {
    let u = Precision::HALF.unit_roundoff();
    let mut tally = DetTally::default();
    let mut out = Vec::new();

    let seq = run_figure(Experiment::Seq, max_n, trials, seed);
    let pw = run_figure(Experiment::Pairwise, max_n, trials, seed);
    tally.rows(&seq);
    tally.rows(&pw);
    let (ns, ms) = medians_by_n(&seq, RoundingMode::Stochastic);
    let (np, mp) = medians_by_n(&pw, RoundingMode::Stochastic);
    let slope_seq = loglog_slope(&ns, &ms);
    let slope_pw = loglog_slope(&np, &mp);
    out.push(CheckResult::new(
        "trends",
        "trend: sequential SR grows like sqrt(n)",
        (slope_seq - 0.5).abs() <= 0.15,
        format!("median relative error slope {slope_seq:.3} (want 0.5 +- 0.15)"),
    ));
    out.push(CheckResult::new(
        "trends",
        "trend: pairwise SR flat",
        slope_pw.abs() <= 0.15,
        format!("median relative error slope {slope_pw:.3} (want |slope| <= 0.15)"),
    ));

    for (name, exps) in [
        (
            "trend: shifted median <= 10u",
            vec![Experiment::ShiftedSeq, Experiment::ShiftedPairwise],
        ),
        (
            "trend: compensated median <= 10u",
            vec![Experiment::Compensated],
        ),
    ] {
        let mut worst = 0.0f64;
        for exp in exps {
            let rows = run_figure(exp, max_n, trials, seed);
            for s in harness::summarize(&rows) {
                worst = worst.max(s.median_rel_error);
            }
        }
        out.push(CheckResult::new(
            "trends",
            name,
            worst <= 10.0 * u,
            format!(
                "largest median relative error {:.3}u over n <= {max_n}, both modes",
                worst / u
            ),
        ));
    }
    (out, tally)
}

/// Block summation with `b = 32`, `t = 11`, `t_hi = 24` under stochastic
/// rounding: median relative error below `u_lo`.
pub fn fabsum_trend(n: usize, trials: usize, seed: u64) -> CheckResult {
    let cfg = ExperimentConfig {
        experiment: Experiment::Fabsum,
        n_grid: vec![n],
        modes: vec![RoundingMode::Stochastic],
        trials,
        seed,
        ..Default::default()
    };
    let rows = harness::run_experiment(&cfg).expect("valid config").rows;
    let errs: Vec<f64> = rows.iter().map(|r| r.rel_error).collect();
    let m = harness::median(&errs);
    let u_lo = cfg.precision.unit_roundoff();
    CheckResult::new(
        "trends",
        "trend: FABsum SR below u_lo",
        m < u_lo,
        format!(
            "n={n}, {trials} trials, median relative error {:.3} u_lo",
            m / u_lo
        ),
    )
}

/// Runs the whole suite and appends the deterministic-domination and
/// runtime check.
pub fn run_all(scale: Scale, seed: u64, time_limit: Duration) -> Vec<CheckResult> {
    let start = Instant::now();
    let mut results = Vec::new();
    let mut tally = DetTally::default();

    let (r, t) = identity_suite(scale.identity_configs, scale.identity_max_n, seed);
    results.push(r);
    tally.merge(t);
    results.push(recurrence_suite(
        scale.recurrence_runs,
        scale.recurrence_max_n,
        seed + 1,
    ));
    results.push(constants_check());
    results.push(alpha_check());
    let (r, t) = coverage_suite(scale.coverage_trials, scale.coverage_n, seed + 2);
    results.extend(r);
    tally.merge(t);
    results.extend(convergence_check(seed + 3));
    let (r, t) = figure_trends(scale.figure_max_n, scale.figure_trials, seed + 4);
    results.extend(r);
    tally.merge(t);
    if let Some(n) = scale.fabsum_n {
        results.push(fabsum_trend(n, scale.fabsum_trials, seed + 5));
    }
    results.push(reduction_check(scale.reduction_instances, seed + 6));

    let elapsed = start.elapsed();
    results.push(CheckResult::new(
        "domination",
        "deterministic domination",
        tally.exceedances == 0 && elapsed <= time_limit,
        format!(
            "{} exceedances in {} checks; suite time {:.1}s (limit {}s)",
            tally.exceedances,
            tally.checks,
            elapsed.as_secs_f64(),
            time_limit.as_secs()
        ),
    ));
    results
}
