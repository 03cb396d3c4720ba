//! Parallel execution of a scenario.
//!
//! Replications are spread over a rayon pool. Every run derives its random
//! streams from `(master_seed, replication, ...)` alone, and aggregation
//! sorts by replication, so the pool size never changes the numbers.

use klucb_core::simulator::{aggregate, run_one, PolicyStats};
use klucb_core::{AggregateStats, PolicySpec, RunTrajectory, ScenarioConfig};
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Values at the horizon for one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalValues {
    pub replication: u64,
    pub regret: f64,
    pub draws: Vec<u64>,
}

impl FinalValues {
    fn of(run: &RunTrajectory) -> Self {
        FinalValues {
            replication: run.replication,
            regret: *run.regret.last().expect("trajectory has the horizon checkpoint"),
            draws: run.draws.last().expect("trajectory has the horizon checkpoint").clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyRun {
    pub stats: PolicyStats,
    /// Sorted by replication.
    pub finals: Vec<FinalValues>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub replications: u64,
    pub policies: Vec<PolicyRun>,
}

impl RunOutput {
    pub fn stats(&self) -> AggregateStats {
        AggregateStats {
            replications: self.replications,
            policies: self.policies.iter().map(|p| p.stats.clone()).collect(),
        }
    }

    pub fn policy(&self, name: &str) -> Option<&PolicyRun> {
        self.policies.iter().find(|p| p.stats.spec.name() == name)
    }
}

/// `threads == 0` lets rayon pick.
pub fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))
}

/// All replications of one policy, in replication order.
pub fn run_policy(scenario: &ScenarioConfig, spec: &PolicySpec, pool: &rayon::ThreadPool) -> Result<Vec<RunTrajectory>> {
    let results: Vec<_> = pool.install(|| {
        (0..scenario.replications)
            .into_par_iter()
            .map(|r| run_one(scenario, spec, r))
            .collect()
    });
    // the first failure by replication index, whatever finished first
    results.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

pub fn run_many(scenario: &ScenarioConfig, pool: &rayon::ThreadPool) -> Result<RunOutput> {
    scenario.validate()?;
    let mut policies = Vec::with_capacity(scenario.policies.len());
    for spec in &scenario.policies {
        let runs = run_policy(scenario, spec, pool)?;
        policies.push(PolicyRun {
            stats: aggregate(spec, &scenario.checkpoints, &runs),
            finals: runs.iter().map(FinalValues::of).collect(),
        });
    }
    Ok(RunOutput {
        replications: scenario.replications,
        policies,
    })
}
