//! Experiment driver: input generation, per-row seeding, kernel dispatch,
//! bound evaluation, CSV output, medians and coverage.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{self, BoundError, BoundId, BoundReport, ProbBudget};
use crate::fp::{FpError, Precision, Rounder, RoundingMode};
use crate::kernels::{self, KernelError};
use crate::tree::{CompTree, TreeError, TreeShape};

/// Version of the row layout written by [`write_csv`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Fp(#[from] FpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{bound}: {rows} stochastic rows at n={n}, need at least {need}")]
    InsufficientRows {
        bound: BoundId,
        n: usize,
        rows: usize,
        need: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    Seq,
    Pairwise,
    ShiftedSeq,
    ShiftedPairwise,
    Compensated,
    Fabsum,
    /// A tree read from a file; its leaf count fixes `n`.
    Custom(PathBuf),
}

impl Experiment {
    pub fn id(&self) -> &'static str {
        match self {
            Experiment::Seq => "seq",
            Experiment::Pairwise => "pairwise",
            Experiment::ShiftedSeq => "shifted-seq",
            Experiment::ShiftedPairwise => "shifted-pairwise",
            Experiment::Compensated => "compensated",
            Experiment::Fabsum => "fabsum",
            Experiment::Custom(_) => "custom",
        }
    }

    /// Bound columns reported for this experiment. Custom trees get the
    /// mono-precision columns; mixed custom trees leave them empty and fill
    /// the mixed ones.
    pub fn bound_columns(&self) -> Vec<BoundId> {
        use BoundId::*;
        match self {
            Experiment::Seq | Experiment::Pairwise => {
                vec![
                    DetPartial,
                    DetInputs,
                    ProbRec,
                    ProbClosedPartial,
                    ProbClosedInputs,
                ]
            }
            Experiment::ShiftedSeq | Experiment::ShiftedPairwise => vec![ShiftPartial, ShiftInputs],
            Experiment::Compensated => {
                vec![
                    CompDetPartial,
                    CompDetInputs,
                    CompProbRec,
                    CompProbPartial,
                    CompProbInputs,
                ]
            }
            Experiment::Fabsum => vec![
                MixRec,
                MixClosedPartial,
                MixClosedInputs,
                FabsumInputs,
                FabsumDetFirstOrder,
            ],
            Experiment::Custom(_) => vec![
                DetPartial,
                DetInputs,
                ProbRec,
                ProbClosedPartial,
                ProbClosedInputs,
                MixRec,
                MixClosedPartial,
                MixClosedInputs,
            ],
        }
    }

    fn shape(&self) -> TreeShape {
        match self {
            Experiment::Pairwise | Experiment::ShiftedPairwise => TreeShape::Pairwise,
            _ => TreeShape::Sequential,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "seq" => Experiment::Seq,
            "pairwise" => Experiment::Pairwise,
            "shifted-seq" => Experiment::ShiftedSeq,
            "shifted-pairwise" => Experiment::ShiftedPairwise,
            "compensated" => Experiment::Compensated,
            "fabsum" => Experiment::Fabsum,
            other => return Err(format!("unknown experiment '{other}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputDist {
    Uniform { a: f64, b: f64 },
    Normal { mu: f64, sigma: f64 },
}

impl Default for InputDist {
    fn default() -> Self {
        InputDist::Uniform { a: 0.0, b: 1.0 }
    }
}

impl InputDist {
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bad = |e: &dyn fmt::Display| HarnessError::Invalid(format!("distribution: {e}"));
        Ok(match *self {
            InputDist::Uniform { a, b } => {
                let d = Uniform::new(a, b).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
            InputDist::Normal { mu, sigma } => {
                let d = Normal::new(mu, sigma).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
        })
    }
}

impl fmt::Display for InputDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputDist::Uniform { a, b } => write!(f, "uniform({a},{b})"),
            InputDist::Normal { mu, sigma } => write!(f, "normal({mu},{sigma})"),
        }
    }
}

impl FromStr for InputDist {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| format!("bad distribution '{s}'"))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("bad distribution '{s}'"))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| format!("'{a}': {e}")))
            .collect::<Result<_, _>>()?;
        match (name.trim(), nums.as_slice()) {
            ("uniform", [a, b]) if a < b => Ok(InputDist::Uniform { a: *a, b: *b }),
            ("normal", [mu, sigma]) if *sigma > 0.0 => Ok(InputDist::Normal {
                mu: *mu,
                sigma: *sigma,
            }),
            _ => Err(format!("bad distribution '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_grid: Vec<usize>,
    pub precision: Precision,
    /// Outer precision of block summation.
    pub precision_hi: Precision,
    pub block: usize,
    pub modes: Vec<RoundingMode>,
    pub trials: usize,
    pub dist: InputDist,
    pub budget: ProbBudget,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Seq,
            n_grid: log_grid(100, 100_000, 2),
            precision: Precision::HALF,
            precision_hi: Precision::SINGLE,
            block: 32,
            modes: vec![RoundingMode::NearestTiesEven, RoundingMode::Stochastic],
            trials: 100,
            dist: InputDist::default(),
            budget: ProbBudget::default(),
            seed: 1,
            output: None,
        }
    }
}

/// Parses counts written as integers or in `1e5` notation.
pub fn parse_count(s: &str) -> Result<usize, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: '{s}'"))?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1e18 {
        Ok(v as usize)
    } else {
        Err(format!("not a count: '{s}'"))
    }
}

/// `per_decade` log-spaced sizes from `min` to `max` inclusive.
pub fn log_grid(min: usize, max: usize, per_decade: usize) -> Vec<usize> {
    let (lo, hi) = ((min.max(2)) as f64, max as f64);
    let steps = ((hi / lo).log10() * per_decade as f64).round() as usize;
    let mut out: Vec<usize> = (0..=steps)
        .map(|i| (lo * 10f64.powf(i as f64 / per_decade as f64)).round() as usize)
        .filter(|&v| v <= max)
        .collect();
    if out.last() != Some(&max) {
        out.push(max);
    }
    out.dedup();
    out
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let prec = |v: &str| {
            v.parse::<u32>()
                .map_err(|e| e.to_string())
                .and_then(|t| Precision::new(t).map_err(|e| e.to_string()))
        };
        match key.trim() {
            "experiment" => {
                self.experiment = value.parse()?;
            }
            "tree" => self.experiment = Experiment::Custom(PathBuf::from(value)),
            "n" => {
                let mut grid: Vec<usize> = value
                    .split(',')
                    .map(parse_count)
                    .collect::<Result<_, _>>()?;
                grid.sort_unstable();
                grid.dedup();
                self.n_grid = grid;
            }
            "t" => self.precision = prec(value)?,
            "t_hi" => self.precision_hi = prec(value)?,
            "b" => self.block = parse_count(value)?,
            "modes" => {
                self.modes = value
                    .split(',')
                    .map(|m| {
                        RoundingMode::from_tag(m.trim())
                            .ok_or_else(|| format!("unknown mode '{m}'"))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "trials" => self.trials = parse_count(value)?,
            "dist" => self.dist = value.parse()?,
            "delta" | "eta" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| format!("bad probability '{value}'"))?;
                let (d, e) = if key.trim() == "delta" {
                    (v, self.budget.eta())
                } else {
                    (self.budget.delta(), v)
                };
                self.budget = ProbBudget::new(d, e).map_err(|e| e.to_string())?;
            }
            "seed" => self.seed = value.parse().map_err(|_| format!("bad seed '{value}'"))?,
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            cfg.set(k, v)
                .map_err(|msg| HarnessError::Config { line: i + 1, msg })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Invalid(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.modes.is_empty() {
            return bad("no rounding modes");
        }
        if !matches!(self.experiment, Experiment::Custom(_)) {
            if self.n_grid.is_empty() {
                return bad("empty n grid");
            }
            if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
                return bad("n grid must be strictly increasing");
            }
            if self.n_grid[0] < 2 {
                return bad("n must be at least 2");
            }
        }
        if self.experiment == Experiment::Fabsum && self.block == 0 {
            return bad("block size must be at least 1");
        }
        Ok(())
    }
}

/// One CSV row. Bound values are relative (divided by `|s_n|`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub experiment: String,
    pub n: usize,
    pub mode: RoundingMode,
    pub trial: usize,
    pub rel_error: f64,
    pub bounds: BoundReport,
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Folds the parts into one seed with splitmix64.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0u64, |acc, &p| splitmix64(acc ^ p))
}

/// Seed of the rounding stream for one row.
pub fn row_seed(master: u64, experiment: &str, n: usize, mode: RoundingMode, trial: usize) -> u64 {
    let mode_tag = match mode {
        RoundingMode::NearestTiesEven => 1,
        RoundingMode::Stochastic => 2,
    };
    mix_seed(&[master, fnv1a(experiment), n as u64, mode_tag, trial as u64])
}

/// Seed of the inputs for one trial, shared by all rounding modes.
pub fn input_seed(master: u64, experiment: &str, n: usize, trial: usize) -> u64 {
    mix_seed(&[master, fnv1a(experiment), n as u64, 0, trial as u64])
}

/// Result of one kernel run with its absolute bounds.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub error: f64,
    pub exact_sum: f64,
    pub bounds: BoundReport,
}

/// Runs one configured kernel on `x` and evaluates its bounds (absolute,
/// with `u → 2u` under stochastic rounding).
pub fn evaluate(
    cfg: &ExperimentConfig,
    custom: Option<&CompTree>,
    x: &[f64],
    mode: RoundingMode,
    seed: u64,
) -> Result<Evaluated, HarnessError> {
    let mut rounder = Rounder::new(mode, Some(ChaCha8Rng::seed_from_u64(seed)))?;
    let factor = mode.bound_factor();
    let p = cfg.precision;
    let u = factor * p.unit_roundoff();
    let n = x.len();
    let budget = cfg.budget;
    let tree_for = |shape| CompTree::build(n, shape, p);
    let (run, bounds) = match &cfg.experiment {
        Experiment::Seq | Experiment::Pairwise => {
            let tree = tree_for(cfg.experiment.shape())?;
            let run = kernels::run_tree_sum(&tree, x, &mut rounder)?;
            let mut b = bounds::det_bounds(&tree, &run.exact_partials, &run.inputs, u)?;
            b.extend(bounds::prob_bounds_general(
                &tree,
                &run.exact_partials,
                &run.inputs,
                u,
                budget,
            )?);
            (run, b)
        }
        Experiment::ShiftedSeq | Experiment::ShiftedPairwise => {
            let tree = tree_for(cfg.experiment.shape())?;
            let c = kernels::choose_shift(x, p)?;
            let run = kernels::run_shifted_sum(&tree, x, c, &mut rounder)?;
            let b = bounds::shifted_bounds(&tree, &run, u, budget)?;
            (run, b)
        }
        Experiment::Compensated => {
            let (run, _) = kernels::run_compensated(x, p, &mut rounder)?;
            let b = bounds::compensated_bounds(&run.inputs, u, budget)?;
            (run, b)
        }
        Experiment::Fabsum => {
            let (lo, hi) = (cfg.precision, cfg.precision_hi);
            let block = cfg.block.min(n);
            let (tree, run) = kernels::run_fabsum(
                x,
                block,
                lo,
                hi,
                TreeShape::Sequential,
                TreeShape::Sequential,
                &mut rounder,
            )?;
            let mut b =
                bounds::mixed_bounds(&tree, &run.exact_partials, &run.inputs, factor, budget)?;
            b.extend(bounds::fabsum_bounds(
                &run.inputs,
                block,
                factor * lo.unit_roundoff(),
                factor * hi.unit_roundoff(),
                budget,
            )?);
            (run, b)
        }
        Experiment::Custom(_) => {
            let tree =
                custom.ok_or_else(|| HarnessError::Invalid("custom tree not loaded".into()))?;
            let run = kernels::run_tree_sum(tree, x, &mut rounder)?;
            let b = match tree.mono_precision() {
                Some(mono) => {
                    let u = factor * mono.unit_roundoff();
                    let mut b = bounds::det_bounds(tree, &run.exact_partials, &run.inputs, u)?;
                    b.extend(bounds::prob_bounds_general(
                        tree,
                        &run.exact_partials,
                        &run.inputs,
                        u,
                        budget,
                    )?);
                    b
                }
                None => {
                    bounds::mixed_bounds(tree, &run.exact_partials, &run.inputs, factor, budget)?
                }
            };
            (run, b)
        }
    };
    Ok(Evaluated {
        error: run.error,
        exact_sum: run.exact_sum,
        bounds,
    })
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    /// Rows dropped because the exact sum was zero.
    pub skipped_zero_sum: usize,
}

/// Runs every `(n, mode, trial)` point of the configuration. Rows are
/// sorted by `(n, mode, trial)`, so the output does not depend on
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let custom = match &cfg.experiment {
        Experiment::Custom(path) => Some(CompTree::from_text(&std::fs::read_to_string(path)?)?),
        _ => None,
    };
    let grid = match &custom {
        Some(t) => vec![t.n()],
        None => cfg.n_grid.clone(),
    };
    let id = cfg.experiment.id();
    let mut jobs = Vec::new();
    for &n in &grid {
        for trial in 0..cfg.trials {
            for &mode in &cfg.modes {
                jobs.push((n, mode, trial));
            }
        }
    }
    let results: Vec<Result<Option<ExperimentRow>, HarnessError>> = jobs
        .par_iter()
        .map(|&(n, mode, trial)| {
            let x = cfg.dist.sample(n, input_seed(cfg.seed, id, n, trial))?;
            let seed = row_seed(cfg.seed, id, n, mode, trial);
            let ev = evaluate(cfg, custom.as_ref(), &x, mode, seed)?;
            if ev.exact_sum == 0.0 {
                return Ok(None);
            }
            let scale = ev.exact_sum.abs();
            let mut rel = BoundReport::new();
            for (k, v) in ev.bounds.iter() {
                rel.insert(k, v / scale);
            }
            Ok(Some(ExperimentRow {
                experiment: id.to_string(),
                n,
                mode,
                trial,
                rel_error: ev.error.abs() / scale,
                bounds: rel,
                seed,
            }))
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(row) => rows.push(row),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{id}: skipped {skipped} rows with zero exact sum");
    }
    rows.sort_by(|a, b| (a.n, a.mode.tag(), a.trial).cmp(&(b.n, b.mode.tag(), b.trial)));
    Ok(ExperimentOutput {
        rows,
        skipped_zero_sum: skipped,
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Writes rows with the versioned header. Bound columns are those of
/// `experiment`; a bound missing from a row is written as an empty field.
pub fn write_csv<W: Write>(
    out: W,
    experiment: &Experiment,
    rows: &[ExperimentRow],
) -> Result<(), HarnessError> {
    let cols = experiment.bound_columns();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "schema_version",
        "experiment",
        "n",
        "mode",
        "trial",
        "rel_error",
    ];
    header.extend(cols.iter().map(|c| c.name()));
    header.push("seed");
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            SCHEMA_VERSION.to_string(),
            r.experiment.clone(),
            r.n.to_string(),
            r.mode.tag().to_string(),
            r.trial.to_string(),
            fmt_f64(r.rel_error),
        ];
        rec.extend(
            cols.iter()
                .map(|c| r.bounds.get(*c).map(fmt_f64).unwrap_or_default()),
        );
        rec.push(r.seed.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Per-`(n, mode)` medians over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub mode: RoundingMode,
    pub trials: usize,
    pub median_rel_error: f64,
    pub median_bounds: BoundReport,
}

pub fn summarize(rows: &[ExperimentRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, &'static str), Vec<&ExperimentRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.mode.tag())).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let errs: Vec<f64> = g.iter().map(|r| r.rel_error).collect();
            let mut mb = BoundReport::new();
            for id in BoundId::ALL {
                let vals: Vec<f64> = g.iter().filter_map(|r| r.bounds.get(id)).collect();
                if !vals.is_empty() {
                    mb.insert(id, median(&vals));
                }
            }
            SummaryRow {
                n: g[0].n,
                mode: g[0].mode,
                trials: g.len(),
                median_rel_error: median(&errs),
                median_bounds: mb,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(
    out: W,
    experiment: &Experiment,
    rows: &[SummaryRow],
) -> Result<(), HarnessError> {
    let cols = experiment.bound_columns();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "schema_version",
        "experiment",
        "n",
        "mode",
        "trials",
        "median_rel_error",
    ];
    header.extend(cols.iter().map(|c| c.name()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            SCHEMA_VERSION.to_string(),
            experiment.id().to_string(),
            r.n.to_string(),
            r.mode.tag().to_string(),
            r.trials.to_string(),
            fmt_f64(r.median_rel_error),
        ];
        rec.extend(
            cols.iter()
                .map(|c| r.median_bounds.get(*c).map(fmt_f64).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Exceedance statistics of one bound at one problem size.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageLine {
    pub bound: BoundId,
    pub n: usize,
    pub mode: RoundingMode,
    pub rows: usize,
    pub exceedances: usize,
    /// Allowed exceedance fraction: 0 for deterministic bounds, otherwise
    /// `δ+η + 3√((δ+η)/N)`.
    pub limit: f64,
}

impl CoverageLine {
    pub fn fraction(&self) -> f64 {
        self.exceedances as f64 / self.rows as f64
    }

    pub fn pass(&self) -> bool {
        self.fraction() <= self.limit
    }
}

/// Checks every deterministic bound on all rows and every probabilistic
/// bound on the stochastic-rounding rows (with at least `min_rows` per size).
/// Truncated bounds carry no guarantee and are skipped.
pub fn coverage_report(
    rows: &[ExperimentRow],
    budget: ProbBudget,
    min_rows: usize,
) -> Result<Vec<CoverageLine>, HarnessError> {
    let mut groups: BTreeMap<(BoundId, usize, &'static str), (RoundingMode, usize, usize)> =
        BTreeMap::new();
    for r in rows {
        for (id, v) in r.bounds.iter() {
            if id.is_truncated() || (id.is_probabilistic() && r.mode != RoundingMode::Stochastic) {
                continue;
            }
            let e = groups
                .entry((id, r.n, r.mode.tag()))
                .or_insert((r.mode, 0, 0));
            e.1 += 1;
            if r.rel_error > v {
                e.2 += 1;
            }
        }
    }
    let p = budget.total();
    let mut out = Vec::new();
    for ((bound, n, _), (mode, count, exceed)) in groups {
        let limit = if bound.is_probabilistic() {
            if count < min_rows {
                return Err(HarnessError::InsufficientRows {
                    bound,
                    n,
                    rows: count,
                    need: min_rows,
                });
            }
            p + 3.0 * (p / count as f64).sqrt()
        } else {
            0.0
        };
        out.push(CoverageLine {
            bound,
            n,
            mode,
            rows: count,
            exceedances: exceed,
            limit,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::parse(
            "# demo\nexperiment = pairwise\nn = 1e3, 100\nmodes = sr\ntrials = 5\ndist = normal(1, 0.5)\ndelta = 0.05\nseed = 9 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Pairwise);
        assert_eq!(cfg.n_grid, vec![100, 1000]);
        assert_eq!(cfg.modes, vec![RoundingMode::Stochastic]);
        assert_eq!(
            cfg.dist,
            InputDist::Normal {
                mu: 1.0,
                sigma: 0.5
            }
        );
        assert_eq!(cfg.budget.delta(), 0.05);
        assert_eq!(cfg.seed, 9);
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("t = 60").is_err());
        assert!(ExperimentConfig::parse("no equals sign").is_err());
    }

    #[test]
    fn grid() {
        assert_eq!(log_grid(100, 1000, 1), vec![100, 1000]);
        assert_eq!(log_grid(100, 10_000, 2), vec![100, 316, 1000, 3162, 10_000]);
        assert_eq!(log_grid(100, 500, 1), vec![100, 500]);
    }

    #[test]
    fn seeds_differ_by_component() {
        let a = row_seed(1, "seq", 100, RoundingMode::Stochastic, 0);
        assert_ne!(a, row_seed(1, "seq", 100, RoundingMode::NearestTiesEven, 0));
        assert_ne!(a, row_seed(1, "seq", 100, RoundingMode::Stochastic, 1));
        assert_ne!(a, row_seed(1, "pairwise", 100, RoundingMode::Stochastic, 0));
        assert_eq!(a, row_seed(1, "seq", 100, RoundingMode::Stochastic, 0));
    }

    #[test]
    fn single_row_respects_det_bound() {
        let cfg = ExperimentConfig {
            n_grid: vec![100],
            trials: 1,
            modes: vec![RoundingMode::NearestTiesEven],
            ..Default::default()
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 1);
        let r = &out.rows[0];
        assert!(r.rel_error <= r.bounds.get(BoundId::DetInputs).unwrap());
    }

    #[test]
    fn every_experiment_fills_its_columns() {
        for exp in [
            "seq",
            "pairwise",
            "shifted-seq",
            "shifted-pairwise",
            "compensated",
            "fabsum",
        ] {
            let cfg = ExperimentConfig {
                experiment: exp.parse().unwrap(),
                n_grid: vec![50, 200],
                trials: 2,
                ..Default::default()
            };
            let out = run_experiment(&cfg).unwrap();
            assert_eq!(out.rows.len(), 8);
            for r in &out.rows {
                for c in cfg.experiment.bound_columns() {
                    let v = r.bounds.get(c).unwrap();
                    assert!(v.is_finite() && v >= 0.0, "{exp} {c} {v}");
                }
            }
            let mut buf = Vec::new();
            write_csv(&mut buf, &cfg.experiment, &out.rows).unwrap();
            let text = String::from_utf8(buf).unwrap();
            assert_eq!(text.lines().count(), 9);
            assert!(text.starts_with("schema_version,experiment,n,mode,trial,rel_error,"));
        }
    }

    #[test]
    fn coverage_sentinel_and_minimum() {
        let mut bounds = BoundReport::new();
        bounds.insert(BoundId::ProbRec, f64::INFINITY);
        bounds.insert(BoundId::DetPartial, 1.0);
        let rows: Vec<ExperimentRow> = (0..100)
            .map(|trial| ExperimentRow {
                experiment: "seq".into(),
                n: 10,
                mode: RoundingMode::Stochastic,
                trial,
                rel_error: 0.5,
                bounds: bounds.clone(),
                seed: 0,
            })
            .collect();
        let cov = coverage_report(&rows, ProbBudget::default(), 100).unwrap();
        assert!(cov.iter().all(|c| c.exceedances == 0 && c.pass()));
        assert!(coverage_report(&rows[..10], ProbBudget::default(), 100).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
