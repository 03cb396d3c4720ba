//! Reference curves and checks of the deviation results behind KL-UCB:
//! Lai-Robbins constants, regret envelopes, the self-normalized deviation
//! bound with its Monte Carlo coverage, MGF domination for `[0,1]`-valued
//! variables, and KL-versus-rate-function identities for exponential
//! families.

use alloc::vec::Vec;
use core::f64::consts::E;

use libm::{ceil, exp, expm1, lgamma, log};

use crate::divergence::{ucb_solve, DivergenceKind};
use crate::error::{Error, Result};
use crate::reward::ArmModel;
use crate::rng::{label_hash, RandomStream};

/// `sum_{a suboptimal} (mu* - mu_a) / d(mu_a, mu*)`, plus the per-arm
/// draw-count constants `1 / d(mu_a, mu*)` (`None` for optimal arms).
#[derive(Clone, Debug, PartialEq)]
pub struct RegretConstant {
    pub total: f64,
    pub per_arm: Vec<Option<f64>>,
}

/// Regret constant of `means` under an arbitrary divergence.
pub fn regret_constant(means: &[f64], kind: DivergenceKind) -> Result<RegretConstant> {
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut per_arm = Vec::with_capacity(means.len());
    for &mu in means {
        if mu < best {
            let inv = 1.0 / kind.eval(mu, best)?;
            total += (best - mu) * inv;
            per_arm.push(Some(inv));
        } else {
            per_arm.push(None);
        }
    }
    if per_arm.iter().all(Option::is_none) {
        return Err(Error::invalid("every arm is optimal; the regret constant is undefined"));
    }
    Ok(RegretConstant { total, per_arm })
}

/// Lai-Robbins constant for Bernoulli arms.
pub fn lai_robbins_constant(arms: &[ArmModel]) -> Result<RegretConstant> {
    let means = bernoulli_means(arms)?;
    regret_constant(&means, DivergenceKind::BernoulliKL)
}

fn bernoulli_means(arms: &[ArmModel]) -> Result<Vec<f64>> {
    arms.iter()
        .map(|arm| match *arm {
            ArmModel::Bernoulli { p } => Ok(p),
            other => Err(Error::invalid(alloc::format!(
                "the Lai-Robbins constant is only available for Bernoulli arms, got {other:?}"
            ))),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    /// Asymptotic lower bound on the regret (Bernoulli arms).
    LaiRobbinsLower,
    /// Leading term of the KL-UCB regret bound on rescaled rewards.
    KlUcbUpperEnvelope,
    /// Leading term of the UCB regret bound, `sum 1/(2 gap)` on rescaled rewards.
    UcbUpperEnvelope,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurve {
    pub kind: BoundKind,
    /// Value at each requested time.
    pub values: Vec<f64>,
}

/// Regret reference curves `constant * log t` for a bounded scenario whose
/// rewards lie in `[0, scale]`. The lower bound is produced only when all
/// arms are Bernoulli. Gaps are kept in reward units.
pub fn bound_curves(arms: &[ArmModel], scale: f64, times: &[u64]) -> Result<Vec<BoundCurve>> {
    if arms.iter().any(|a| a.upper_bound().is_none_or(|ub| ub > scale)) {
        return Err(Error::invalid(alloc::format!(
            "reference envelopes need rewards bounded by the scale {scale}"
        )));
    }
    let means: Vec<f64> = arms.iter().map(ArmModel::mean).collect();
    let scaled: Vec<f64> = means.iter().map(|m| m / scale).collect();
    let curve = |kind, constant: f64| BoundCurve {
        kind,
        values: times.iter().map(|&t| constant * log(t as f64)).collect(),
    };
    let mut out = Vec::new();
    if arms.iter().all(ArmModel::is_bernoulli) {
        out.push(curve(BoundKind::LaiRobbinsLower, lai_robbins_constant(arms)?.total));
    }
    let kl = regret_constant(&scaled, DivergenceKind::BernoulliKL)?.total * scale;
    out.push(curve(BoundKind::KlUcbUpperEnvelope, kl));
    let quad = regret_constant(&scaled, DivergenceKind::Quadratic)?.total * scale;
    out.push(curve(BoundKind::UcbUpperEnvelope, quad));
    Ok(out)
}

/// `min(1, e * ceil(delta log n) * exp(-delta))`.
pub fn deviation_bound(delta: f64, n: u64) -> f64 {
    if n < 2 || delta.is_nan() || delta <= 0.0 {
        return 1.0;
    }
    let steps = ceil(delta * log(n as f64));
    (E * steps * exp(-delta)).min(1.0)
}

/// Which samples enter the empirical mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingSchedule {
    /// Every sample (`N(n) = n`).
    Full,
    /// Samples at odd times only.
    Alternating,
}

impl SamplingSchedule {
    fn includes(self, t: u64) -> bool {
        match self {
            SamplingSchedule::Full => true,
            SamplingSchedule::Alternating => t % 2 == 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplingSchedule::Full => "full",
            SamplingSchedule::Alternating => "alternating",
        }
    }
}

pub const MIN_COVERAGE_TRIALS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coverage {
    pub trials: u64,
    pub failures: u64,
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub standard_error: f64,
}

/// Fraction of simulated Bernoulli(`mu`) sequences of length `n` whose
/// KL upper bound at level `delta` falls below `mu`.
pub fn empirical_coverage(
    mu: f64,
    n: u64,
    delta: f64,
    trials: u64,
    seed: u64,
    schedule: SamplingSchedule,
) -> Result<Coverage> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::invalid(alloc::format!("mean must lie in [0,1], got {mu}")));
    }
    if n == 0 || delta.is_nan() || delta <= 0.0 {
        return Err(Error::invalid("need n >= 1 and delta > 0"));
    }
    if trials < MIN_COVERAGE_TRIALS {
        return Err(Error::invalid(alloc::format!(
            "at least {MIN_COVERAGE_TRIALS} trials are required, got {trials}"
        )));
    }
    let arm = ArmModel::Bernoulli { p: mu };
    let tag = label_hash(schedule.name());
    let mut failures = 0u64;
    for trial in 0..trials {
        let mut rng = RandomStream::keyed(&[seed, tag, trial]);
        let mut sum = 0.0;
        let mut count = 0u64;
        for t in 1..=n {
            let x = arm.sample(&mut rng);
            if schedule.includes(t) {
                sum += x;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let upper = ucb_solve(DivergenceKind::BernoulliKL, mean, delta / count as f64)?;
        if upper < mu {
            failures += 1;
        }
    }
    let frequency = failures as f64 / trials as f64;
    Ok(Coverage {
        trials,
        failures,
        frequency,
        standard_error: libm::sqrt(frequency * (1.0 - frequency) / trials as f64),
    })
}

/// A law supported in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundedLaw {
    PointMass(f64),
    /// An arm model divided by `scale`.
    Scaled { arm: ArmModel, scale: f64 },
}

impl BoundedLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundedLaw::PointMass(x) if (0.0..=1.0).contains(&x) => Ok(()),
            BoundedLaw::PointMass(x) => Err(Error::invalid(alloc::format!("point mass at {x} is outside [0,1]"))),
            BoundedLaw::Scaled { arm, scale } => match arm.upper_bound() {
                Some(ub) if scale > 0.0 && ub / scale <= 1.0 => Ok(()),
                Some(ub) => Err(Error::invalid(alloc::format!(
                    "{arm:?} scaled by {scale} reaches {}",
                    ub / scale
                ))),
                None => Err(Error::invalid(alloc::format!("{arm:?} is unbounded"))),
            },
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BoundedLaw::PointMass(x) => x,
            BoundedLaw::Scaled { arm, scale } => arm.mean() / scale,
        }
    }

    /// Closed-form `E[exp(lambda X)]`.
    pub fn mgf(&self, lambda: f64) -> f64 {
        match *self {
            BoundedLaw::PointMass(x) => exp(lambda * x),
            BoundedLaw::Scaled { arm, scale } => match arm {
                ArmModel::Bernoulli { p } => bernoulli_mgf(p, lambda / scale),
                ArmModel::TruncatedExponential { rate, cap } => {
                    // int_0^cap rate e^{(l - rate) x} dx + e^{(l - rate) cap}, l = lambda / scale
                    let k = lambda / scale - rate;
                    let tail = exp(k * cap);
                    if k == 0.0 {
                        rate * cap + 1.0
                    } else {
                        rate * expm1(k * cap) / k + tail
                    }
                }
                ArmModel::Poisson { .. } => f64::INFINITY,
            },
        }
    }
}

fn bernoulli_mgf(mu: f64, lambda: f64) -> f64 {
    1.0 - mu + mu * exp(lambda)
}

/// Checks `E[exp(lambda X)] <= 1 - mu + mu exp(lambda)` on every grid point,
/// allowing a relative rounding slack of 1e-12.
pub fn mgf_domination_check(law: &BoundedLaw, lambdas: &[f64]) -> Result<bool> {
    law.validate()?;
    let mu = law.mean();
    Ok(lambdas.iter().all(|&l| {
        let bound = bernoulli_mgf(mu, l);
        law.mgf(l) <= bound * (1.0 + 1e-12)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpFamily {
    Exponential,
    Poisson,
}

impl ExpFamily {
    pub fn divergence(self) -> DivergenceKind {
        match self {
            ExpFamily::Exponential => DivergenceKind::ExponentialKL,
            ExpFamily::Poisson => DivergenceKind::PoissonKL,
        }
    }
}

/// Kullback-Leibler divergence between two members of the family computed
/// from the densities: Simpson quadrature for exponential laws, a summation
/// truncated at cumulative mass `1 - 1e-12` for Poisson laws.
pub fn kl_from_densities(family: ExpFamily, mean1: f64, mean2: f64) -> Result<f64> {
    if !(mean1 > 0.0 && mean2 > 0.0 && mean1.is_finite() && mean2.is_finite()) {
        return Err(Error::invalid("family means must be positive"));
    }
    match family {
        ExpFamily::Exponential => {
            // x = mean1 * u:  int_0^inf e^{-u} (log(m2/m1) - u + u m1/m2) du
            let log_ratio = log(mean2 / mean1);
            let slope = mean1 / mean2 - 1.0;
            let f = |u: f64| exp(-u) * (log_ratio + slope * u);
            Ok(simpson(f, 0.0, 60.0, 60_000))
        }
        ExpFamily::Poisson => {
            let log_ratio = log(mean1 / mean2);
            let mut mass = 0.0;
            let mut kl = 0.0;
            let mut k = 0u64;
            while mass < 1.0 - 1e-12 || (k as f64) < mean1 {
                let kf = k as f64;
                let pk = exp(-mean1 + kf * log(mean1) - lgamma(kf + 1.0));
                mass += pk;
                kl += pk * (kf * log_ratio - mean1 + mean2);
                k += 1;
            }
            Ok(kl)
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// `|KL(p_1 || p_2) - d(mean1, mean2)|` with `d` the family's divergence kernel.
pub fn kl_equals_rate_function_check(family: ExpFamily, mean1: f64, mean2: f64) -> Result<f64> {
    let kl = kl_from_densities(family, mean1, mean2)?;
    let d = family.divergence().eval(mean1, mean2)?;
    Ok((kl - d).abs())
}
