//! Machine-readable outputs: long-format CSV, the run summary and raw
//! per-run values.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use klucb_core::analysis::{bound_curves, regret_constant, BoundKind};
use klucb_core::simulator::{AggregateStats, QUANTILE_LEVELS};
use klucb_core::{ArmModel, DivergenceKind, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::config::{ArmEntry, Resolved};
use crate::engine::PolicyRun;
use crate::error::{CliError, Result};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column name of each entry of [`QUANTILE_LEVELS`].
pub const QUANTILE_NAMES: [&str; 6] = ["q0005", "q25", "q50", "q75", "q995", "q9995"];

/// Policy column of reference curves.
pub const REFERENCE_POLICY: &str = "reference";

/// One `(policy, t, statistic)` value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub policy: String,
    pub t: u64,
    pub statistic: String,
    pub value: f64,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    policy: &'a str,
    t: u64,
    statistic: &'a str,
    value: String,
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn draws_statistic(arm: usize) -> String {
    format!("mean_draws_arm_{}", arm + 1)
}

/// Rows sorted by `(policy, t, statistic)`, statistics compared as strings.
pub fn stats_records(stats: &AggregateStats) -> Vec<OutputRecord> {
    debug_assert_eq!(QUANTILE_NAMES.len(), QUANTILE_LEVELS.len());
    let mut out = Vec::new();
    for policy in &stats.policies {
        let name = policy.spec.name();
        for cp in &policy.checkpoints {
            let mut push = |statistic: String, value: f64| {
                out.push(OutputRecord {
                    policy: name.to_string(),
                    t: cp.t,
                    statistic,
                    value,
                })
            };
            push("mean".into(), cp.mean);
            push("std".into(), cp.std);
            for (q, v) in QUANTILE_NAMES.iter().zip(cp.quantiles) {
                push((*q).into(), v);
            }
            for (a, &v) in cp.mean_draws.iter().enumerate() {
                push(draws_statistic(a), v);
            }
        }
    }
    sort_records(&mut out);
    out
}

pub fn sort_records(records: &mut [OutputRecord]) {
    records.sort_by(|a, b| (&a.policy, a.t, &a.statistic).cmp(&(&b.policy, b.t, &b.statistic)));
}

/// Reference curves at the scenario checkpoints: `bound_lower` (Bernoulli
/// arms only), `bound_klucb`, `bound_ucb` and the per-arm draw envelope
/// `bound_draws_arm_<k>` of every suboptimal arm.
pub fn bound_records(scenario: &ScenarioConfig, scale: f64) -> Result<Vec<OutputRecord>> {
    let times = &scenario.checkpoints;
    let mut out = Vec::new();
    for curve in bound_curves(&scenario.arms, scale, times)? {
        let statistic = match curve.kind {
            BoundKind::LaiRobbinsLower => "bound_lower",
            BoundKind::KlUcbUpperEnvelope => "bound_klucb",
            BoundKind::UcbUpperEnvelope => "bound_ucb",
        };
        for (&t, &value) in times.iter().zip(&curve.values) {
            out.push(OutputRecord {
                policy: REFERENCE_POLICY.into(),
                t,
                statistic: statistic.into(),
                value,
            });
        }
    }
    let scaled: Vec<f64> = scenario.arms.iter().map(|a| a.mean() / scale).collect();
    let per_arm = regret_constant(&scaled, DivergenceKind::BernoulliKL)?.per_arm;
    for (a, constant) in per_arm.iter().enumerate() {
        if let Some(constant) = constant {
            for &t in times {
                out.push(OutputRecord {
                    policy: REFERENCE_POLICY.into(),
                    t,
                    statistic: format!("bound_draws_arm_{}", a + 1),
                    value: constant * (t as f64).ln(),
                });
            }
        }
    }
    sort_records(&mut out);
    Ok(out)
}

/// Largest reward bound of the arms, the natural scale of the envelopes.
pub fn natural_scale(arms: &[ArmModel]) -> Option<f64> {
    arms.iter()
        .map(ArmModel::upper_bound)
        .try_fold(0.0f64, |acc, ub| ub.map(|u| acc.max(u)))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_records(path: &Path, records: &[OutputRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in records {
        w.serialize(CsvRow {
            policy: &r.policy,
            t: r.t,
            statistic: &r.statistic,
            value: format_value(r.value),
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<OutputRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

/// One row per `(policy, replication)` with the horizon values.
pub fn write_raw(path: &Path, runs: &[PolicyRun], n_arms: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["policy".to_string(), "replication".into(), "regret".into()];
    header.extend((1..=n_arms).map(|k| format!("draws_arm_{k}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for run in runs {
        for f in &run.finals {
            let mut row = vec![
                run.stats.spec.name().to_string(),
                f.replication.to_string(),
                format_value(f.regret),
            ];
            row.extend(f.draws.iter().map(u64::to_string));
            w.write_record(&row).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ArmEcho {
    #[serde(flatten)]
    pub arm: ArmEntry,
    pub mean: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PolicyEcho {
    pub name: String,
    pub c: f64,
    pub scale: f64,
    pub horizon: Option<u64>,
}

/// Every parameter a run used, defaults included.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EffectiveConfig {
    pub scenario: String,
    pub source: String,
    pub arms: Vec<ArmEcho>,
    pub horizon: u64,
    pub replications: u64,
    pub master_seed: u64,
    pub checkpoints: Vec<u64>,
    pub policies: Vec<PolicyEcho>,
    pub threads: usize,
    pub raw: bool,
}

impl EffectiveConfig {
    pub fn new(resolved: &Resolved, threads: usize, raw: bool) -> Self {
        let s = &resolved.scenario;
        EffectiveConfig {
            scenario: resolved.name.clone(),
            source: resolved.source.clone(),
            arms: resolved
                .arms
                .iter()
                .zip(&s.arms)
                .map(|(arm, model)| ArmEcho {
                    arm: arm.clone(),
                    mean: model.mean(),
                })
                .collect(),
            horizon: s.horizon,
            replications: s.replications,
            master_seed: s.master_seed,
            checkpoints: s.checkpoints.clone(),
            policies: s
                .policies
                .iter()
                .map(|p| PolicyEcho {
                    name: p.name().to_string(),
                    c: p.c,
                    scale: p.scale,
                    horizon: p.horizon,
                })
                .collect(),
            threads,
            raw,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub config: EffectiveConfig,
    pub seed: u64,
    pub wall_seconds: f64,
    pub artifact_version: String,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    writeln!(f).map_err(|e| CliError::io(path, e))
}
