use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use sumlab_core::bounds::{self, ProbBudget};
use sumlab_core::harness::{self, Experiment, ExperimentConfig, HarnessError};
use sumlab_core::verify::{self, Scale};
use sumlab_core::Precision;

#[derive(Parser)]
#[command(
    name = "sumlab",
    version,
    about = "Low-precision summation error experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run one experiment from a config file and/or flags.
    Run(RunArgs),
    /// Run the oracle and invariant suite.
    Verify {
        /// Reduced sizes for a fast smoke run.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
    },
    /// Print the bound constants.
    Constants {
        #[arg(long, value_parser = parse_real)]
        n: f64,
        #[arg(long, value_parser = parse_real)]
        h: f64,
        /// Defaults to n.
        #[arg(long, value_parser = parse_real)]
        n_tilde: Option<f64>,
        #[arg(long, default_value_t = 11)]
        t: u32,
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
    },
    /// Write the datasets behind the error-versus-n figures.
    Figures {
        #[arg(long, value_enum, default_value_t = Which::All)]
        which: Which,
        #[arg(long, value_parser = parse_count, default_value = "1e5")]
        nmax: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Extend compensated and block summation to n = 1e7.
        #[arg(long)]
        full_scale: bool,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Sequential,
    Shifted,
    Compensated,
    Fabsum,
    All,
}

#[derive(clap::Args)]
struct RunArgs {
    /// `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    /// Tree file (`k left right t` per line) for a custom ordering.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Comma-separated sizes, e.g. `100,1e3,1e4`.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    t_hi: Option<String>,
    #[arg(long)]
    b: Option<String>,
    /// Comma-separated `rtn`/`sr`.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// `uniform(a,b)` or `normal(mu,sigma)`.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// CSV path; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write per-n medians here.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn parse_real(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| e.to_string())
}

fn parse_count(s: &str) -> Result<usize, String> {
    harness::parse_count(s)
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    let flags = [
        ("experiment", &args.experiment),
        ("n", &args.n),
        ("t", &args.t),
        ("t_hi", &args.t_hi),
        ("b", &args.b),
        ("modes", &args.modes),
        ("trials", &args.trials),
        ("dist", &args.dist),
        ("delta", &args.delta),
        ("eta", &args.eta),
        ("seed", &args.seed),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)
                .map_err(|msg| HarnessError::Invalid(format!("--{key}: {msg}")))?;
        }
    }
    if let Some(tree) = &args.tree {
        cfg.experiment = Experiment::Custom(tree.clone());
    }
    if let Some(out) = &args.output {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn writer_for(path: Option<&Path>) -> Result<Box<dyn Write>, HarnessError> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: RunArgs) -> Result<(), HarnessError> {
    let cfg = build_config(&args)?;
    let out = harness::run_experiment(&cfg)?;
    harness::write_csv(
        writer_for(cfg.output.as_deref())?,
        &cfg.experiment,
        &out.rows,
    )?;
    if let Some(path) = &args.summary {
        let summary = harness::summarize(&out.rows);
        harness::write_summary_csv(writer_for(Some(path))?, &cfg.experiment, &summary)?;
    }
    log::info!("{}: {} rows", cfg.experiment, out.rows.len());
    Ok(())
}

fn constants(
    n: f64,
    h: f64,
    n_tilde: Option<f64>,
    t: u32,
    delta: f64,
    eta: f64,
) -> Result<(), String> {
    let p = Precision::new(t).map_err(|e| e.to_string())?;
    let budget = ProbBudget::new(delta, eta).map_err(|e| e.to_string())?;
    let c = bounds::constants(n, n_tilde.unwrap_or(n), h, p.unit_roundoff(), budget);
    let fmt_opt = |v: Option<f64>| {
        v.map(|x| format!("{x:.6}"))
            .unwrap_or_else(|| "undefined".into())
    };
    println!("u                    {:e}", c.u);
    println!("lambda_h             {:e}", c.lambda_h);
    println!("sqrt(2 ln(2/delta))  {:.6}", c.first_order);
    println!("lambda_n             {:.6}", c.lambda_n);
    println!("lambda_n_tilde       {}", fmt_opt(c.lambda_n_tilde));
    println!("1+phi_n              {:.6}", 1.0 + c.phi_n);
    println!(
        "1+phi_n_tilde        {}",
        fmt_opt(c.phi_n_tilde.map(|p| 1.0 + p))
    );
    println!("alpha                {:.6}", c.alpha);
    println!("gamma                {:.6}", c.gamma);
    println!("beta                 {:e}", c.beta_aux);
    Ok(())
}

fn figures(
    which: Which,
    nmax: usize,
    trials: usize,
    full_scale: bool,
    out: &Path,
    seed: u64,
) -> Result<(), HarnessError> {
    let big = if full_scale { 10_000_000 } else { nmax };
    let mut plan: Vec<(Experiment, usize)> = Vec::new();
    if matches!(which, Which::Sequential | Which::All) {
        plan.push((Experiment::Seq, nmax));
        plan.push((Experiment::Pairwise, nmax));
    }
    if matches!(which, Which::Shifted | Which::All) {
        plan.push((Experiment::ShiftedSeq, nmax));
        plan.push((Experiment::ShiftedPairwise, nmax));
    }
    if matches!(which, Which::Compensated | Which::All) {
        plan.push((Experiment::Compensated, big));
    }
    if matches!(which, Which::Fabsum | Which::All) {
        plan.push((Experiment::Fabsum, big));
    }
    std::fs::create_dir_all(out)?;
    for (exp, max_n) in plan {
        let cfg = ExperimentConfig {
            experiment: exp.clone(),
            n_grid: harness::log_grid(100, max_n, 2),
            trials,
            seed,
            ..Default::default()
        };
        let result = harness::run_experiment(&cfg)?;
        let rows_path = out.join(format!("{}.csv", exp.id()));
        harness::write_csv(writer_for(Some(&rows_path))?, &exp, &result.rows)?;
        let summary_path = out.join(format!("{}_summary.csv", exp.id()));
        harness::write_summary_csv(
            writer_for(Some(&summary_path))?,
            &exp,
            &harness::summarize(&result.rows),
        )?;
        eprintln!("wrote {} ({} rows)", rows_path.display(), result.rows.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result: Result<(), String> = match cli.command {
        Command::Run(args) => run(args).map_err(|e| e.to_string()),
        Command::Verify { quick, seed } => {
            let scale = if quick { Scale::quick() } else { Scale::full() };
            let results = verify::run_all(scale, seed, Duration::from_secs(600));
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.pass).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(format!("{failed} checks failed"))
            }
        }
        Command::Constants {
            n,
            h,
            n_tilde,
            t,
            delta,
            eta,
        } => constants(n, h, n_tilde, t, delta, eta),
        Command::Figures {
            which,
            nmax,
            trials,
            full_scale,
            out,
            seed,
        } => figures(which, nmax, trials, full_scale, &out, seed).map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
