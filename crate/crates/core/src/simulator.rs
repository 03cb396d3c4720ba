//! Deterministic Monte Carlo engine.
//!
//! A run is fully determined by `(master_seed, policy name, replication)`.
//! The `s`-th reward of arm `a` in replication `r` is the `s`-th draw of the
//! stream keyed by `(master_seed, r, a)`, whatever the policy, so comparisons
//! between policies are paired. Tie-breaking draws come from a separate
//! stream keyed by `(master_seed, r, policy, "tie")`.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{pow, round, sqrt};

use crate::error::{Error, Result};
use crate::policy::{Policy, PolicyKind, PolicySpec};
use crate::reward::ArmModel;
use crate::rng::{label_hash, RandomStream};

/// Regret quantile levels reported per checkpoint.
pub const QUANTILE_LEVELS: [f64; 6] = [0.005, 0.25, 0.5, 0.75, 0.995, 0.9995];

/// Default replication count for desk-scale studies.
pub const DEFAULT_REPLICATIONS: u64 = 2000;

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub arms: Vec<ArmModel>,
    pub horizon: u64,
    pub replications: u64,
    /// Strictly increasing, last element equal to the horizon.
    pub checkpoints: Vec<u64>,
    pub master_seed: u64,
    pub policies: Vec<PolicySpec>,
}

impl ScenarioConfig {
    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(ArmModel::mean).collect()
    }

    pub fn best_mean(&self) -> f64 {
        self.arms
            .iter()
            .map(ArmModel::mean)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `mu* - mu_a` for every arm.
    pub fn gaps(&self) -> Vec<f64> {
        let best = self.best_mean();
        self.arms.iter().map(|a| best - a.mean()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.arms.len();
        if k < 2 {
            return Err(Error::config(alloc::format!(
                "a scenario needs at least two arms, got {k}"
            )));
        }
        for arm in &self.arms {
            arm.validate()?;
        }
        if self.horizon < k as u64 {
            return Err(Error::config(alloc::format!(
                "horizon {} is shorter than the initialization round ({k} arms)",
                self.horizon
            )));
        }
        if self.replications == 0 {
            return Err(Error::config("replication count must be positive"));
        }
        validate_checkpoints(&self.checkpoints, self.horizon)?;
        if self.policies.is_empty() {
            return Err(Error::config("the policy roster is empty"));
        }
        for spec in &self.policies {
            spec.validate()?;
            check_compatible(spec, &self.arms)?;
        }
        Ok(())
    }
}

pub fn validate_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<()> {
    match checkpoints.last() {
        None => return Err(Error::config("checkpoint list is empty")),
        Some(&last) if last > horizon => {
            return Err(Error::config(alloc::format!(
                "checkpoint {last} lies beyond the horizon {horizon}"
            )))
        }
        Some(&last) if last != horizon => {
            return Err(Error::config(alloc::format!(
                "the last checkpoint must equal the horizon {horizon}, got {last}"
            )))
        }
        _ => {}
    }
    if checkpoints[0] == 0 {
        return Err(Error::config("checkpoints start at t = 1"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("checkpoints must be strictly increasing"));
    }
    Ok(())
}

/// Rejects policies whose reward support cannot hold the arms' rewards.
fn check_compatible(spec: &PolicySpec, arms: &[ArmModel]) -> Result<()> {
    if spec.kind.needs_unit_rewards() {
        for arm in arms {
            match arm.upper_bound() {
                Some(ub) if ub <= spec.scale => {}
                Some(ub) => {
                    return Err(Error::config(alloc::format!(
                        "{} with scale {} cannot take rewards up to {ub}",
                        spec.kind,
                        spec.scale
                    )))
                }
                None => {
                    return Err(Error::config(alloc::format!(
                        "{} needs bounded rewards, {arm:?} is unbounded",
                        spec.kind
                    )))
                }
            }
        }
    }
    if spec.kind == PolicyKind::CpUcb && (spec.scale != 1.0 || !arms.iter().all(ArmModel::is_bernoulli)) {
        return Err(Error::config("cp-ucb applies to Bernoulli arms with scale 1 only"));
    }
    Ok(())
}

/// About 50 geometrically spaced points from 10 to `horizon`, ending at
/// `horizon`.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    const POINTS: i32 = 50;
    let start = 10u64.min(horizon).max(1);
    let ratio = horizon as f64 / start as f64;
    let mut out: Vec<u64> = (0..POINTS)
        .map(|i| round(start as f64 * pow(ratio, f64::from(i) / f64::from(POINTS - 1))) as u64)
        .collect();
    out.push(horizon);
    out.retain(|&t| t >= 1 && t <= horizon);
    out.sort_unstable();
    out.dedup();
    out
}

pub fn reward_stream(master_seed: u64, replication: u64, arm: usize) -> RandomStream {
    RandomStream::keyed(&[master_seed, replication, arm as u64])
}

pub fn tie_stream(master_seed: u64, replication: u64, spec: &PolicySpec) -> RandomStream {
    RandomStream::keyed(&[master_seed, replication, label_hash(spec.name()), label_hash("tie")])
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrajectory {
    pub replication: u64,
    /// Pseudo-regret `sum_a gap_a N_a(t)` at each checkpoint.
    pub regret: Vec<f64>,
    /// `draws[i][a]` is `N_a(t_i)`.
    pub draws: Vec<Vec<u64>>,
}

/// Simulates one replication of one policy.
pub fn run_one(scenario: &ScenarioConfig, spec: &PolicySpec, replication: u64) -> Result<RunTrajectory> {
    run_one_inner(scenario, spec, replication).map_err(|e| Error::Run {
        policy: String::from(spec.name()),
        replication,
        source: alloc::boxed::Box::new(e),
    })
}

fn run_one_inner(scenario: &ScenarioConfig, spec: &PolicySpec, replication: u64) -> Result<RunTrajectory> {
    let k = scenario.arms.len();
    let gaps = scenario.gaps();
    let mut policy = Policy::new(spec.clone(), k)?;
    let mut streams: Vec<RandomStream> = (0..k)
        .map(|a| reward_stream(scenario.master_seed, replication, a))
        .collect();
    let mut ties = tie_stream(scenario.master_seed, replication, spec);

    let mut regret = Vec::with_capacity(scenario.checkpoints.len());
    let mut draws = Vec::with_capacity(scenario.checkpoints.len());
    let mut next = 0;
    for t in 1..=scenario.horizon {
        let arm = policy.select(&mut ties)?;
        let reward = scenario.arms[arm].sample(&mut streams[arm]);
        policy.update(arm, reward)?;
        if next < scenario.checkpoints.len() && scenario.checkpoints[next] == t {
            let counts = policy.state().counts();
            regret.push(pseudo_regret(&gaps, counts));
            draws.push(counts.to_vec());
            next += 1;
        }
    }
    Ok(RunTrajectory {
        replication,
        regret,
        draws,
    })
}

pub fn pseudo_regret(gaps: &[f64], counts: &[u64]) -> f64 {
    gaps.iter().zip(counts).map(|(g, &n)| g * n as f64).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointStats {
    pub t: u64,
    pub mean: f64,
    pub std: f64,
    /// Regret quantiles at [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 6],
    pub mean_draws: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyStats {
    pub spec: PolicySpec,
    pub checkpoints: Vec<CheckpointStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateStats {
    pub replications: u64,
    pub policies: Vec<PolicyStats>,
}

/// Linear interpolation between order statistics (`(n-1) p` convention).
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let w = h - lo as f64;
    sorted[lo] + w * (sorted[lo + 1] - sorted[lo])
}

/// Folds trajectories of one policy into per-checkpoint statistics, in
/// replication order regardless of the order they were produced in.
pub fn aggregate(spec: &PolicySpec, checkpoints: &[u64], trajectories: &[RunTrajectory]) -> PolicyStats {
    let mut runs: Vec<&RunTrajectory> = trajectories.iter().collect();
    runs.sort_by_key(|r| r.replication);
    let n = runs.len();
    let k = runs.first().map_or(0, |r| r.draws.first().map_or(0, Vec::len));

    let mut values = Vec::with_capacity(n);
    let stats = checkpoints
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            values.clear();
            values.extend(runs.iter().map(|r| r.regret[i]));
            let sum: f64 = values.iter().sum();
            let mean = sum / n as f64;
            let std = if n > 1 {
                let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                sqrt(ss / (n - 1) as f64)
            } else {
                0.0
            };
            let mut mean_draws = alloc::vec![0.0; k];
            for (a, slot) in mean_draws.iter_mut().enumerate() {
                let total: u64 = runs.iter().map(|r| r.draws[i][a]).sum();
                *slot = total as f64 / n as f64;
            }
            values.sort_by(f64::total_cmp);
            let quantiles = QUANTILE_LEVELS.map(|p| quantile(&values, p));
            // rounding in the sum can push the mean a hair outside the sample range
            let mean = mean.clamp(values[0], values[n - 1]);
            CheckpointStats {
                t,
                mean,
                std,
                quantiles,
                mean_draws,
            }
        })
        .collect();
    PolicyStats {
        spec: spec.clone(),
        checkpoints: stats,
    }
}

/// Runs every policy for every replication, sequentially.
pub fn run_many(scenario: &ScenarioConfig) -> Result<AggregateStats> {
    scenario.validate()?;
    let mut policies = Vec::with_capacity(scenario.policies.len());
    for spec in &scenario.policies {
        let runs = (0..scenario.replications)
            .map(|r| run_one(scenario, spec, r))
            .collect::<Result<Vec<_>>>()?;
        policies.push(aggregate(spec, &scenario.checkpoints, &runs));
    }
    Ok(AggregateStats {
        replications: scenario.replications,
        policies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyKind;
    use alloc::vec;

    fn two_arm(p1: f64, p2: f64, horizon: u64, policies: Vec<PolicySpec>) -> ScenarioConfig {
        ScenarioConfig {
            arms: vec![ArmModel::bernoulli(p1).unwrap(), ArmModel::bernoulli(p2).unwrap()],
            horizon,
            replications: 3,
            checkpoints: default_checkpoints(horizon),
            master_seed: 42,
            policies,
        }
    }

    #[test]
    fn checkpoints_are_geometric_and_end_at_horizon() {
        let cps = default_checkpoints(20_000);
        assert_eq!(cps[0], 10);
        assert_eq!(*cps.last().unwrap(), 20_000);
        assert!(cps.windows(2).all(|w| w[0] < w[1]));
        assert!(cps.len() >= 45 && cps.len() <= 51);
        assert_eq!(default_checkpoints(5), vec![5]);
        validate_checkpoints(&cps, 20_000).unwrap();
    }

    #[test]
    fn bad_checkpoints_rejected() {
        assert!(validate_checkpoints(&[10, 200], 100).is_err());
        assert!(validate_checkpoints(&[10, 10, 100], 100).is_err());
        assert!(validate_checkpoints(&[10, 50], 100).is_err());
        assert!(validate_checkpoints(&[], 100).is_err());
    }

    #[test]
    fn deterministic_rewards_give_exact_regret() {
        let specs: Vec<PolicySpec> = [PolicyKind::KlUcb, PolicyKind::Ucb, PolicyKind::Dmed, PolicyKind::UcbTuned]
            .into_iter()
            .map(PolicySpec::new)
            .collect();
        let scenario = two_arm(1.0, 0.0, 100, specs.clone());
        for spec in &specs {
            let run = run_one(&scenario, spec, 0).unwrap();
            let last = run.draws.last().unwrap();
            assert_eq!(last[0] + last[1], 100);
            assert!(last[1] >= 1);
            assert!(last[1] < 20, "{}: {}", spec.name(), last[1]);
            assert_eq!(*run.regret.last().unwrap(), last[1] as f64);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let spec = PolicySpec::new(PolicyKind::KlUcb);
        let scenario = two_arm(0.9, 0.8, 500, vec![spec.clone()]);
        assert_eq!(run_one(&scenario, &spec, 7).unwrap(), run_one(&scenario, &spec, 7).unwrap());
        assert_ne!(run_one(&scenario, &spec, 7).unwrap().draws, run_one(&scenario, &spec, 8).unwrap().draws);
    }

    #[test]
    fn single_replication_aggregate_is_the_trajectory() {
        let spec = PolicySpec::new(PolicyKind::Ucb);
        let mut scenario = two_arm(0.6, 0.4, 300, vec![spec.clone()]);
        scenario.replications = 1;
        let run = run_one(&scenario, &spec, 0).unwrap();
        let stats = run_many(&scenario).unwrap();
        for (i, cp) in stats.policies[0].checkpoints.iter().enumerate() {
            assert_eq!(cp.mean, run.regret[i]);
            assert_eq!(cp.std, 0.0);
            assert!(cp.quantiles.iter().all(|&q| q == run.regret[i]));
            assert_eq!(cp.mean_draws[1], run.draws[i][1] as f64);
        }
    }

    #[test]
    fn aggregation_ignores_input_order() {
        let spec = PolicySpec::new(PolicyKind::KlUcb);
        let scenario = two_arm(0.7, 0.5, 200, vec![spec.clone()]);
        let mut runs: Vec<_> = (0..6).map(|r| run_one(&scenario, &spec, r).unwrap()).collect();
        let a = aggregate(&spec, &scenario.checkpoints, &runs);
        runs.reverse();
        runs.swap(1, 4);
        let b = aggregate(&spec, &scenario.checkpoints, &runs);
        assert_eq!(a, b);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.25), 2.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert_eq!(quantile(&xs, 0.9), 4.6);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let mut s = two_arm(0.9, 0.8, 100, vec![PolicySpec::new(PolicyKind::Moss)]);
        assert!(s.validate().is_err());
        s.policies = vec![PolicySpec::new(PolicyKind::Moss).with_horizon(100)];
        s.validate().unwrap();
        s.horizon = 1;
        assert!(s.validate().is_err());

        let trunc = ScenarioConfig {
            arms: vec![
                ArmModel::truncated_exponential(0.2, 10.0).unwrap(),
                ArmModel::truncated_exponential(1.0, 10.0).unwrap(),
            ],
            horizon: 100,
            replications: 1,
            checkpoints: vec![100],
            master_seed: 0,
            policies: vec![PolicySpec::new(PolicyKind::KlUcb)],
        };
        assert!(trunc.validate().is_err());
        let mut ok = trunc.clone();
        ok.policies = vec![PolicySpec::new(PolicyKind::KlUcb).with_scale(10.0), PolicySpec::new(PolicyKind::KlUcbExp)];
        ok.validate().unwrap();
        let mut cp = trunc;
        cp.policies = vec![PolicySpec::new(PolicyKind::CpUcb).with_scale(10.0)];
        assert!(cp.validate().is_err());
    }
}
