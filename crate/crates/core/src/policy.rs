//! Bandit policies behind one sequential interface: `select` an arm for the
//! next round, then `update` with the observed reward.
//!
//! Every policy plays arms `0..K` once in order during the first `K` rounds.
//! Index policies then play an arm of maximal index; DMED variants play arms
//! from a round-robin play-list refreshed by an empirical-divergence test.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::{log, sqrt};

use crate::divergence::{clopper_pearson_ucb, ucb_solve, DivergenceKind};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Index values within this distance of the maximum are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    KlUcb,
    KlUcbPlus,
    CpUcb,
    KlUcbExp,
    KlUcbPoisson,
    Ucb,
    Moss,
    UcbTuned,
    UcbV,
    Dmed,
    DmedPlus,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 11] = [
        PolicyKind::KlUcb,
        PolicyKind::KlUcbPlus,
        PolicyKind::CpUcb,
        PolicyKind::KlUcbExp,
        PolicyKind::KlUcbPoisson,
        PolicyKind::Ucb,
        PolicyKind::Moss,
        PolicyKind::UcbTuned,
        PolicyKind::UcbV,
        PolicyKind::Dmed,
        PolicyKind::DmedPlus,
    ];

    /// Name accepted on the command line and in configuration files.
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::KlUcb => "kl-ucb",
            PolicyKind::KlUcbPlus => "kl-ucb-plus",
            PolicyKind::CpUcb => "cp-ucb",
            PolicyKind::KlUcbExp => "kl-ucb-exp",
            PolicyKind::KlUcbPoisson => "kl-ucb-poisson",
            PolicyKind::Ucb => "ucb",
            PolicyKind::Moss => "moss",
            PolicyKind::UcbTuned => "ucb-tuned",
            PolicyKind::UcbV => "ucb-v",
            PolicyKind::Dmed => "dmed",
            PolicyKind::DmedPlus => "dmed-plus",
        }
    }

    pub fn is_list_based(self) -> bool {
        matches!(self, PolicyKind::Dmed | PolicyKind::DmedPlus)
    }

    /// Policies that assume rewards rescaled into `[0, 1]`.
    pub fn needs_unit_rewards(self) -> bool {
        !matches!(self, PolicyKind::KlUcbExp | PolicyKind::KlUcbPoisson)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(alloc::format!("unknown policy name {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Weight of the `log log t` term in the exploration function.
    pub c: f64,
    /// Rewards are divided by this before entering the statistics.
    pub scale: f64,
    /// Known horizon; only MOSS uses it.
    pub horizon: Option<u64>,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        PolicySpec {
            kind,
            c: 0.0,
            scale: 1.0,
            horizon: None,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::config(alloc::format!(
                "{}: exploration constant must be nonnegative, got {}",
                self.kind,
                self.c
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config(alloc::format!(
                "{}: reward scale must be positive, got {}",
                self.kind,
                self.scale
            )));
        }
        if self.kind == PolicyKind::Moss && self.horizon.is_none() {
            return Err(Error::config("moss requires the horizon"));
        }
        Ok(())
    }

    /// Maps a raw reward onto the policy's axis, rejecting values outside
    /// the declared support.
    pub fn rescale(&self, reward: f64) -> Result<f64> {
        let x = reward / self.scale;
        let ok = match self.kind {
            PolicyKind::KlUcbExp | PolicyKind::KlUcbPoisson => x >= 0.0 && x.is_finite(),
            PolicyKind::CpUcb => x == 0.0 || x == 1.0,
            _ => (0.0..=1.0).contains(&x),
        };
        if ok {
            Ok(x)
        } else {
            Err(Error::invalid(alloc::format!(
                "reward {reward} is outside the support of {} with scale {}",
                self.kind,
                self.scale
            )))
        }
    }
}

/// `log t + c * max(0, log log t)`.
pub fn exploration(t: f64, c: f64) -> f64 {
    let lt = log(t);
    if c == 0.0 {
        lt
    } else {
        lt + c * log(lt).max(0.0)
    }
}

/// Per-arm sufficient statistics, on the policy's (rescaled) reward axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyState {
    counts: Vec<u64>,
    sums: Vec<f64>,
    sq_sums: Vec<f64>,
    t: u64,
}

impl PolicyState {
    pub fn new(n_arms: usize) -> Result<Self> {
        if n_arms < 2 {
            return Err(Error::config(alloc::format!(
                "a bandit problem needs at least two arms, got {n_arms}"
            )));
        }
        Ok(PolicyState {
            counts: vec![0; n_arms],
            sums: vec![0.0; n_arms],
            sq_sums: vec![0.0; n_arms],
            t: 0,
        })
    }

    /// Builds a state from explicit statistics; `t` is the total count.
    pub fn from_parts(counts: Vec<u64>, sums: Vec<f64>, sq_sums: Vec<f64>) -> Result<Self> {
        let k = counts.len();
        if k < 2 || sums.len() != k || sq_sums.len() != k {
            return Err(Error::invalid("statistics vectors must share a length of at least 2"));
        }
        Ok(PolicyState {
            t: counts.iter().sum(),
            counts,
            sums,
            sq_sums,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn sq_sums(&self) -> &[f64] {
        &self.sq_sums
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.sums[arm] / self.counts[arm] as f64
    }

    /// Records an already rescaled reward.
    pub fn record(&mut self, arm: usize, x: f64) -> Result<()> {
        if arm >= self.counts.len() {
            return Err(Error::invalid(alloc::format!("arm {arm} out of range")));
        }
        self.counts[arm] += 1;
        self.sums[arm] += x;
        self.sq_sums[arm] += x * x;
        self.t += 1;
        Ok(())
    }
}

/// Upper-confidence index of `arm` at round `t`.
pub fn index(spec: &PolicySpec, state: &PolicyState, arm: usize, t: f64) -> Result<f64> {
    if arm >= state.n_arms() {
        return Err(Error::invalid(alloc::format!("arm {arm} out of range")));
    }
    let pulls = state.counts[arm];
    if pulls == 0 {
        return Err(Error::invalid(alloc::format!("arm {arm} has not been pulled yet")));
    }
    let n = pulls as f64;
    let mean = state.sums[arm] / n;
    match spec.kind {
        PolicyKind::KlUcb => ucb_solve(DivergenceKind::BernoulliKL, mean.min(1.0), exploration(t, spec.c) / n),
        PolicyKind::KlUcbPlus => {
            let budget = log(t / n).max(0.0);
            ucb_solve(DivergenceKind::BernoulliKL, mean.min(1.0), budget / n)
        }
        PolicyKind::CpUcb => {
            let successes = state.sums[arm];
            if libm::trunc(successes) != successes {
                return Err(Error::config(alloc::format!(
                    "cp-ucb needs integer reward sums, got {successes}"
                )));
            }
            let alpha = 1.0 / (t * libm::pow(log(t), spec.c));
            clopper_pearson_ucb(successes as u64, pulls, alpha)
        }
        PolicyKind::KlUcbExp => {
            if mean == 0.0 {
                // the bound is proportional to the empirical mean
                return Ok(0.0);
            }
            ucb_solve(DivergenceKind::ExponentialKL, mean, exploration(t, spec.c) / n)
        }
        PolicyKind::KlUcbPoisson => ucb_solve(DivergenceKind::PoissonKL, mean, exploration(t, spec.c) / n),
        PolicyKind::Ucb => Ok(mean + sqrt(exploration(t, spec.c) / (2.0 * n))),
        PolicyKind::Moss => {
            let horizon = spec
                .horizon
                .ok_or_else(|| Error::config("moss requires the horizon"))? as f64;
            let k = state.n_arms() as f64;
            Ok(mean + sqrt(log(horizon / (k * n)).max(0.0) / n))
        }
        PolicyKind::UcbTuned => {
            let lt = log(t);
            let var = empirical_variance(state, arm);
            Ok(mean + sqrt(lt / n * (var + sqrt(2.0 * lt / n)).min(0.25)))
        }
        PolicyKind::UcbV => {
            let lt = log(t);
            let var = empirical_variance(state, arm);
            Ok(mean + sqrt(2.0 * var * lt / n) + 3.0 * lt / n)
        }
        PolicyKind::Dmed | PolicyKind::DmedPlus => Err(Error::invalid(alloc::format!(
            "{} is not an index policy",
            spec.kind
        ))),
    }
}

fn empirical_variance(state: &PolicyState, arm: usize) -> f64 {
    let n = state.counts[arm] as f64;
    let mean = state.sums[arm] / n;
    (state.sq_sums[arm] / n - mean * mean).max(0.0)
}

/// DMED admission test: `N[a] d(mean_a, max_b mean_b) < log t`, with
/// `log(t / N[a])` on the right-hand side for the `plus` variant.
pub fn dmed_admits(state: &PolicyState, arm: usize, t: f64, plus: bool) -> bool {
    let best = (0..state.n_arms())
        .map(|b| state.mean(b))
        .fold(f64::NEG_INFINITY, f64::max)
        .min(1.0);
    let n = state.counts[arm] as f64;
    let mean = state.mean(arm).min(1.0);
    let value = n * DivergenceKind::BernoulliKL.eval_unchecked(mean, best);
    let threshold = if plus { log(t / n).max(0.0) } else { log(t) };
    value < threshold
}

/// Play-lists of the DMED variants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DmedLists {
    current: VecDeque<usize>,
    next: Vec<bool>,
}

impl DmedLists {
    pub fn current(&self) -> impl Iterator<Item = usize> + '_ {
        self.current.iter().copied()
    }

    pub fn next(&self) -> impl Iterator<Item = usize> + '_ {
        self.next.iter().enumerate().filter(|(_, &b)| b).map(|(a, _)| a)
    }
}

/// A policy instance: configuration, statistics and (for DMED) play-lists.
#[derive(Clone, Debug)]
pub struct Policy {
    spec: PolicySpec,
    state: PolicyState,
    dmed: Option<DmedLists>,
    indices: Vec<f64>,
    ties: Vec<usize>,
}

impl Policy {
    pub fn new(spec: PolicySpec, n_arms: usize) -> Result<Self> {
        spec.validate()?;
        let state = PolicyState::new(n_arms)?;
        let dmed = spec.kind.is_list_based().then(|| DmedLists {
            current: VecDeque::new(),
            next: vec![false; n_arms],
        });
        Ok(Policy {
            spec,
            state,
            dmed,
            indices: Vec::with_capacity(n_arms),
            ties: Vec::with_capacity(n_arms),
        })
    }

    /// Policy resuming from an existing history; DMED play-lists start empty.
    pub fn with_state(spec: PolicySpec, state: PolicyState) -> Result<Self> {
        let mut policy = Policy::new(spec, state.n_arms())?;
        policy.state = state;
        Ok(policy)
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    pub fn dmed_lists(&self) -> Option<&DmedLists> {
        self.dmed.as_ref()
    }

    /// Arm to play at round `state.t() + 1`. `rng` is used only to break ties.
    pub fn select(&mut self, rng: &mut RandomStream) -> Result<usize> {
        let k = self.state.n_arms();
        let played = self.state.t as usize;
        if played < k {
            return Ok(played);
        }
        let t = (self.state.t + 1) as f64;

        if let Some(lists) = self.dmed.as_mut() {
            let plus = self.spec.kind == PolicyKind::DmedPlus;
            for a in 0..k {
                if !lists.next[a] && dmed_admits(&self.state, a, t, plus) {
                    lists.next[a] = true;
                }
            }
            if lists.current.is_empty() {
                for a in 0..k {
                    if lists.next[a] {
                        lists.current.push_back(a);
                        lists.next[a] = false;
                    }
                }
            }
            return lists
                .current
                .pop_front()
                .ok_or_else(|| Error::invalid("empty DMED play-list"));
        }

        self.indices.clear();
        for a in 0..k {
            self.indices.push(index(&self.spec, &self.state, a, t)?);
        }
        let best = self.indices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.ties.clear();
        self.ties.extend((0..k).filter(|&a| self.indices[a] >= best - TIE_TOLERANCE));
        Ok(match self.ties.len() {
            1 => self.ties[0],
            n => self.ties[rng.next_below(n as u64) as usize],
        })
    }

    /// Ingests the raw reward of `arm`.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        let x = self.spec.rescale(reward)?;
        self.state.record(arm, x)
    }
}

/// Every policy name, in canonical order.
pub fn policy_names() -> impl Iterator<Item = &'static str> {
    PolicyKind::ALL.into_iter().map(PolicyKind::name)
}

/// Human-readable roster, e.g. `"kl-ucb, ucb"`.
pub fn join_names(specs: &[PolicySpec]) -> String {
    let mut out = String::new();
    for (i, s) in specs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(s.name());
    }
    out
}
