//! Scenario files and the built-in presets.
//!
//! A scenario file is TOML:
//!
//! ```toml
//! horizon = 20000
//! replications = 2000
//! seed = 42
//! policies = ["kl-ucb", { name = "moss" }, { name = "ucb", c = 1.0 }]
//!
//! [[arms]]
//! family = "bernoulli"
//! p = 0.9
//!
//! [[arms]]
//! family = "truncated-exponential"
//! rate = 0.25
//! cap = 10.0
//! ```
//!
//! Omitted keys take defaults: 2000 replications, seed 0, c = 0, the
//! default checkpoint grid and every policy applicable to the arms.

use std::path::Path;

use klucb_core::policy::{PolicyKind, PolicySpec};
use klucb_core::reward::ArmModel;
use klucb_core::simulator::{default_checkpoints, DEFAULT_REPLICATIONS};
use klucb_core::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const PRESETS: [&str; 3] = ["scenario1", "scenario2", "scenario3"];

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub arms: Vec<ArmEntry>,
    pub horizon: Option<u64>,
    pub replications: Option<u64>,
    pub seed: Option<u64>,
    /// Explicit grid; must end at or before the horizon.
    pub checkpoints: Option<Vec<u64>>,
    /// Added to the default grid when `checkpoints` is absent; points past
    /// the horizon are dropped.
    #[serde(default)]
    pub extra_checkpoints: Vec<u64>,
    pub policies: Option<Vec<PolicyEntry>>,
    pub c: Option<f64>,
    /// Reward scale for policies working on `[0,1]`; defaults to the
    /// largest arm bound.
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArmEntry {
    Bernoulli { p: f64 },
    TruncatedExponential { rate: f64, cap: f64 },
    Poisson { lambda: f64 },
}

impl ArmEntry {
    pub fn to_model(&self) -> Result<ArmModel> {
        Ok(match *self {
            ArmEntry::Bernoulli { p } => ArmModel::bernoulli(p)?,
            ArmEntry::TruncatedExponential { rate, cap } => ArmModel::truncated_exponential(rate, cap)?,
            ArmEntry::Poisson { lambda } => ArmModel::poisson(lambda)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PolicyEntry {
    Name(String),
    Table(PolicyTable),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyTable {
    pub name: String,
    pub c: Option<f64>,
    pub scale: Option<f64>,
    pub horizon: Option<u64>,
}

impl PolicyEntry {
    fn table(&self) -> PolicyTable {
        match self {
            PolicyEntry::Name(name) => PolicyTable {
                name: name.clone(),
                c: None,
                scale: None,
                horizon: None,
            },
            PolicyEntry::Table(t) => t.clone(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub policies: Option<Vec<String>>,
    pub replications: Option<u64>,
    pub horizon: Option<u64>,
    pub seed: Option<u64>,
    pub c: Option<f64>,
}

/// A validated scenario plus what it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub name: String,
    pub source: String,
    pub arms: Vec<ArmEntry>,
    pub scenario: ScenarioConfig,
}

pub fn preset(name: &str) -> Option<ScenarioFile> {
    let bern = |p| ArmEntry::Bernoulli { p };
    let file = match name {
        "scenario1" => ScenarioFile {
            arms: vec![bern(0.9), bern(0.8)],
            horizon: Some(20_000),
            extra_checkpoints: vec![5_000],
            ..Default::default()
        },
        "scenario2" => {
            let mut arms = vec![bern(0.1)];
            for p in [0.05, 0.02, 0.01] {
                arms.extend([bern(p), bern(p), bern(p)]);
            }
            ScenarioFile {
                arms,
                horizon: Some(10_000),
                ..Default::default()
            }
        }
        "scenario3" => ScenarioFile {
            arms: [5.0, 4.0, 3.0, 2.0, 1.0]
                .iter()
                .map(|&m| ArmEntry::TruncatedExponential { rate: 1.0 / m, cap: 10.0 })
                .collect(),
            horizon: Some(20_000),
            ..Default::default()
        },
        _ => return None,
    };
    Some(ScenarioFile {
        name: Some(name.to_string()),
        ..file
    })
}

pub fn read_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::config(format!(
            "{}: not a preset ({}) and not a readable file: {e}",
            path.display(),
            PRESETS.join(", ")
        ))
    })?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Loads a preset by name, otherwise reads the argument as a file path.
pub fn load(scenario: &str, overrides: &Overrides) -> Result<Resolved> {
    let (file, source) = match preset(scenario) {
        Some(file) => (file, format!("preset:{scenario}")),
        None => (read_scenario_file(Path::new(scenario))?, scenario.to_string()),
    };
    resolve(file, source, overrides)
}

/// Reads and validates a scenario file with every default applied.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let file = read_scenario_file(path)?;
    Ok(resolve(file, path.display().to_string(), &Overrides::default())?.scenario)
}

/// Policies that make sense for the given arms, in display order.
pub fn applicable_policies(arms: &[ArmModel]) -> Vec<PolicyKind> {
    use PolicyKind::*;
    let bounded = [KlUcb, KlUcbPlus, Ucb, Moss, UcbTuned, UcbV, Dmed, DmedPlus];
    if arms.iter().all(ArmModel::is_bernoulli) {
        let mut out = vec![KlUcb, KlUcbPlus, CpUcb];
        out.extend(&bounded[2..]);
        out
    } else if arms.iter().all(|a| a.upper_bound().is_some()) {
        let mut out = vec![KlUcb, KlUcbPlus, KlUcbExp];
        out.extend(&bounded[2..]);
        out
    } else {
        vec![KlUcbPoisson]
    }
}

pub fn resolve(file: ScenarioFile, source: String, overrides: &Overrides) -> Result<Resolved> {
    let models = file
        .arms
        .iter()
        .map(ArmEntry::to_model)
        .collect::<Result<Vec<_>>>()?;

    let tables: Vec<PolicyTable> = match (&overrides.policies, &file.policies) {
        (Some(names), _) => names.iter().map(|n| PolicyEntry::Name(n.trim().to_string()).table()).collect(),
        (None, Some(entries)) => entries.iter().map(PolicyEntry::table).collect(),
        (None, None) => applicable_policies(&models)
            .into_iter()
            .map(|k| PolicyEntry::Name(k.name().to_string()).table())
            .collect(),
    };
    let kinds = tables
        .iter()
        .map(|t| t.name.parse::<PolicyKind>())
        .collect::<Result<Vec<_>, _>>()?;

    let horizon = match overrides.horizon.or(file.horizon) {
        Some(h) => h,
        None if kinds.contains(&PolicyKind::Moss) => {
            return Err(CliError::config("missing horizon: moss needs the horizon and none was given"))
        }
        None => return Err(CliError::config("missing horizon")),
    };

    let checkpoints = match &file.checkpoints {
        Some(cps) => {
            let mut cps = cps.clone();
            if let Some(&beyond) = cps.iter().find(|&&t| t > horizon) {
                return Err(CliError::config(format!(
                    "checkpoint {beyond} lies beyond the horizon {horizon}"
                )));
            }
            if cps.last() != Some(&horizon) {
                cps.push(horizon);
            }
            cps
        }
        None => {
            let mut cps = default_checkpoints(horizon);
            cps.extend(file.extra_checkpoints.iter().copied().filter(|&t| t >= 1 && t <= horizon));
            cps.sort_unstable();
            cps.dedup();
            cps
        }
    };

    let unit_scale = match file.scale {
        Some(s) => s,
        None => models
            .iter()
            .filter_map(ArmModel::upper_bound)
            .fold(1.0, f64::max),
    };
    let mut policies = Vec::with_capacity(tables.len());
    for (table, kind) in tables.iter().zip(kinds) {
        if policies.iter().any(|p: &PolicySpec| p.kind == kind) {
            return Err(CliError::config(format!("policy {kind} is listed twice")));
        }
        let default_scale = if kind.needs_unit_rewards() { unit_scale } else { 1.0 };
        let mut spec = PolicySpec::new(kind)
            .with_c(overrides.c.or(table.c).or(file.c).unwrap_or(0.0))
            .with_scale(table.scale.unwrap_or(default_scale));
        if kind == PolicyKind::Moss {
            spec = spec.with_horizon(table.horizon.unwrap_or(horizon));
        } else if let Some(h) = table.horizon {
            spec = spec.with_horizon(h);
        }
        policies.push(spec);
    }

    let scenario = ScenarioConfig {
        arms: models,
        horizon,
        replications: overrides
            .replications
            .or(file.replications)
            .unwrap_or(DEFAULT_REPLICATIONS),
        checkpoints,
        master_seed: overrides.seed.or(file.seed).unwrap_or(0),
        policies,
    };
    scenario.validate()?;
    Ok(Resolved {
        name: file.name.unwrap_or_else(|| source.clone()),
        source,
        arms: file.arms,
        scenario,
    })
}
