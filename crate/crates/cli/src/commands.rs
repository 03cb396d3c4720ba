use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use klucb_core::analysis::{deviation_bound, empirical_coverage, SamplingSchedule};
use klucb_core::policy::policy_names;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load, Overrides};
use crate::engine::{build_pool, run_many};
use crate::error::{CliError, Result, EXIT_CONFIG, EXIT_OK};
use crate::output::{
    bound_records, format_value, natural_scale, stats_records, write_json, write_raw,
    write_records, EffectiveConfig, Summary, ARTIFACT_VERSION,
};

/// Slack, in binomial standard errors, granted to empirical coverage.
pub const COVERAGE_SLACK_SE: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "klucb", version, about = "Monte Carlo harness for KL-UCB and competing bandit policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario; writes results.csv and summary.json.
    Run(RunArgs),
    /// Write the reference regret curves of a scenario to bounds.csv.
    Bounds(BoundsArgs),
    /// Compare the deviation bound with simulated coverage.
    DeviationCheck(DeviationArgs),
    /// Print the accepted policy names.
    ListPolicies,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Preset name (scenario1, scenario2, scenario3) or TOML file.
    #[arg(long)]
    pub scenario: String,
    /// Comma-separated roster; default is every applicable policy.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    #[arg(long)]
    pub replications: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight of the log log t term in the exploration function.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads, 0 for one per core. Never changes the results.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Also write raw.csv with per-run values at the horizon.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Reward scale of the envelopes; default is the largest arm bound.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeviationArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.5, 0.8])]
    pub mu: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 1000])]
    pub n: Vec<u64>,
    /// Confidence level; default log n.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Run(args) => run(&args).map(|_| EXIT_OK),
        Command::Bounds(args) => bounds(&args).map(|_| EXIT_OK),
        Command::DeviationCheck(args) => deviation_check(&args).map(|_| EXIT_OK),
        Command::ListPolicies => {
            for name in policy_names() {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn run(args: &RunArgs) -> Result<Summary> {
    let overrides = Overrides {
        policies: args.policies.clone(),
        replications: args.replications,
        horizon: args.horizon,
        seed: args.seed,
        c: args.c,
    };
    let resolved = load(&args.scenario, &overrides)?;
    let scenario = &resolved.scenario;
    let pool = build_pool(args.threads)?;
    ensure_dir(&args.out)?;

    let start = Instant::now();
    let output = run_many(scenario, &pool)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let results = args.out.join("results.csv");
    write_records(&results, &stats_records(&output.stats()))?;
    if args.raw {
        write_raw(&args.out.join("raw.csv"), &output.policies, scenario.arms.len())?;
    }
    let summary = Summary {
        config: EffectiveConfig::new(&resolved, pool.current_num_threads(), args.raw),
        seed: scenario.master_seed,
        wall_seconds,
        artifact_version: ARTIFACT_VERSION.to_string(),
    };
    write_json(&args.out.join("summary.json"), &summary)?;

    println!(
        "{}: {} replications, horizon {}, seed {}, {:.1}s",
        resolved.name, scenario.replications, scenario.horizon, scenario.master_seed, wall_seconds
    );
    println!("{:<16} {:>14} {:>14}", "policy", "mean regret", "std");
    for p in &output.policies {
        let last = p.stats.checkpoints.last().expect("horizon checkpoint");
        println!("{:<16} {:>14.3} {:>14.3}", p.stats.spec.name(), last.mean, last.std);
    }
    println!("wrote {}", results.display());
    Ok(summary)
}

pub fn bounds(args: &BoundsArgs) -> Result<PathBuf> {
    let overrides = Overrides {
        horizon: args.horizon,
        ..Default::default()
    };
    let resolved = load(&args.scenario, &overrides)?;
    let scale = match args.scale.or_else(|| natural_scale(&resolved.scenario.arms)) {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(CliError::config(format!("scale must be positive, got {s}"))),
        None => {
            return Err(CliError::config(
                "reference curves need bounded rewards; this scenario has unbounded arms",
            ))
        }
    };
    let rows = bound_records(&resolved.scenario, scale)?;
    ensure_dir(&args.out)?;
    let path = args.out.join("bounds.csv");
    write_records(&path, &rows)?;
    println!("wrote {}", path.display());
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationRow {
    pub mu: f64,
    pub n: u64,
    pub delta: f64,
    pub schedule: &'static str,
    pub trials: u64,
    pub failures: u64,
    pub empirical: f64,
    pub standard_error: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Coverage for every `(mu, n, schedule)` cell, in grid order.
pub fn deviation_grid(
    mus: &[f64],
    ns: &[u64],
    delta: Option<f64>,
    trials: u64,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> Result<Vec<DeviationRow>> {
    let mut cells = Vec::new();
    for &mu in mus {
        for &n in ns {
            for schedule in [SamplingSchedule::Full, SamplingSchedule::Alternating] {
                cells.push((mu, n, schedule));
            }
        }
    }
    let rows: Vec<Result<DeviationRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(mu, n, schedule)| {
                let delta = delta.unwrap_or_else(|| (n as f64).ln());
                let c = empirical_coverage(mu, n, delta, trials, seed, schedule)?;
                let bound = deviation_bound(delta, n);
                Ok(DeviationRow {
                    mu,
                    n,
                    delta,
                    schedule: schedule.name(),
                    trials: c.trials,
                    failures: c.failures,
                    empirical: c.frequency,
                    standard_error: c.standard_error,
                    bound,
                    pass: c.frequency <= bound + COVERAGE_SLACK_SE * c.standard_error,
                })
            })
            .collect()
    });
    rows.into_iter().collect()
}

pub fn deviation_check(args: &DeviationArgs) -> Result<Vec<DeviationRow>> {
    if args.mu.is_empty() || args.n.is_empty() {
        return Err(CliError::config("deviation-check needs at least one mu and one n"));
    }
    let pool = build_pool(args.threads)?;
    let rows = deviation_grid(&args.mu, &args.n, args.delta, args.trials, args.seed, &pool)
        .map_err(|e| match e {
            CliError::Core(klucb_core::Error::InvalidInput(msg)) => CliError::Config(msg),
            other => other,
        })?;

    ensure_dir(&args.out)?;
    let path = args.out.join("deviation_check.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|source| CliError::Csv {
        path: path.clone(),
        source,
    })?;
    w.write_record([
        "mu", "n", "delta", "schedule", "trials", "failures", "empirical", "standard_error", "bound",
        "status",
    ])
    .and_then(|_| {
        for r in &rows {
            w.write_record([
                r.mu.to_string(),
                r.n.to_string(),
                format_value(r.delta),
                r.schedule.to_string(),
                r.trials.to_string(),
                r.failures.to_string(),
                format_value(r.empirical),
                format_value(r.standard_error),
                format_value(r.bound),
                status(r.pass).to_string(),
            ])?;
        }
        Ok(())
    })
    .map_err(|source| CliError::Csv {
        path: path.clone(),
        source,
    })?;
    w.flush().map_err(|e| CliError::io(&path, e))?;

    println!(
        "{:>6} {:>6} {:>8} {:<12} {:>10} {:>10} {:>10}  status",
        "mu", "n", "delta", "schedule", "empirical", "se", "bound"
    );
    for r in &rows {
        println!(
            "{:>6} {:>6} {:>8.4} {:<12} {:>10.6} {:>10.6} {:>10.6}  {}",
            r.mu, r.n, r.delta, r.schedule, r.empirical, r.standard_error, r.bound, status(r.pass)
        );
    }
    println!("wrote {}", path.display());

    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Check(format!(
            "{failed} of {} cells exceed the deviation bound",
            rows.len()
        )));
    }
    Ok(rows)
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
