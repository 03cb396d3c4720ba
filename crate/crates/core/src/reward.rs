//! Reward distributions of the benchmark scenarios.

use libm::{exp, expm1, log};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArmModel {
    Bernoulli { p: f64 },
    /// `min(E, cap)` with `E` exponential of the given rate.
    TruncatedExponential { rate: f64, cap: f64 },
    Poisson { lambda: f64 },
}

/// Poisson inversion is exact but linear in `lambda`; keep it for moderate rates.
pub const POISSON_MAX_LAMBDA: f64 = 30.0;

impl ArmModel {
    pub fn bernoulli(p: f64) -> Result<Self> {
        let arm = ArmModel::Bernoulli { p };
        arm.validate()?;
        Ok(arm)
    }

    pub fn truncated_exponential(rate: f64, cap: f64) -> Result<Self> {
        let arm = ArmModel::TruncatedExponential { rate, cap };
        arm.validate()?;
        Ok(arm)
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        let arm = ArmModel::Poisson { lambda };
        arm.validate()?;
        Ok(arm)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ArmModel::Bernoulli { p } if (0.0..=1.0).contains(&p) => Ok(()),
            ArmModel::Bernoulli { p } => Err(Error::config(alloc::format!(
                "Bernoulli parameter must lie in [0,1], got {p}"
            ))),
            ArmModel::TruncatedExponential { rate, cap } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    Err(Error::config(alloc::format!("exponential rate must be positive, got {rate}")))
                } else if !(cap > 0.0 && cap.is_finite()) {
                    Err(Error::config(alloc::format!("truncation cap must be positive, got {cap}")))
                } else {
                    Ok(())
                }
            }
            ArmModel::Poisson { lambda } => {
                if lambda > 0.0 && lambda <= POISSON_MAX_LAMBDA {
                    Ok(())
                } else {
                    Err(Error::config(alloc::format!(
                        "Poisson rate must lie in (0, {POISSON_MAX_LAMBDA}], got {lambda}"
                    )))
                }
            }
        }
    }

    /// Exact expectation of the reward.
    pub fn mean(&self) -> f64 {
        match *self {
            ArmModel::Bernoulli { p } => p,
            // E[min(X, c)] = int_0^c exp(-r x) dx
            ArmModel::TruncatedExponential { rate, cap } => -expm1(-rate * cap) / rate,
            ArmModel::Poisson { lambda } => lambda,
        }
    }

    /// Upper end of the support, `None` when unbounded.
    pub fn upper_bound(&self) -> Option<f64> {
        match *self {
            ArmModel::Bernoulli { .. } => Some(1.0),
            ArmModel::TruncatedExponential { cap, .. } => Some(cap),
            ArmModel::Poisson { .. } => None,
        }
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(self, ArmModel::Bernoulli { .. })
    }

    /// Integer-valued rewards (Bernoulli, Poisson).
    pub fn is_discrete(&self) -> bool {
        !matches!(self, ArmModel::TruncatedExponential { .. })
    }

    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        match *self {
            ArmModel::Bernoulli { p } => {
                if rng.next_f64() < p {
                    1.0
                } else {
                    0.0
                }
            }
            ArmModel::TruncatedExponential { rate, cap } => {
                let e = -log(rng.next_open01()) / rate;
                e.min(cap)
            }
            ArmModel::Poisson { lambda } => {
                // sequential search on the cumulative distribution
                let u = rng.next_f64();
                let mut k = 0u32;
                let mut pk = exp(-lambda);
                let mut cdf = pk;
                while u >= cdf {
                    k += 1;
                    pk *= lambda / f64::from(k);
                    let next = cdf + pk;
                    if next == cdf {
                        break;
                    }
                    cdf = next;
                }
                f64::from(k)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn moments(arm: ArmModel, n: usize, key: u64) -> (f64, f64) {
        let mut rng = RandomStream::keyed(&[key]);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = arm.sample(&mut rng);
            s += x;
            s2 += x * x;
        }
        let m = s / n as f64;
        (m, (s2 / n as f64 - m * m).sqrt())
    }

    #[test]
    fn degenerate_bernoulli() {
        let mut rng = RandomStream::keyed(&[1]);
        let one = ArmModel::bernoulli(1.0).unwrap();
        let zero = ArmModel::bernoulli(0.0).unwrap();
        for _ in 0..10_000 {
            assert_eq!(one.sample(&mut rng), 1.0);
            assert_eq!(zero.sample(&mut rng), 0.0);
        }
    }

    #[test]
    fn means() {
        assert_eq!(ArmModel::bernoulli(0.9).unwrap().mean(), 0.9);
        assert_eq!(ArmModel::poisson(2.0).unwrap().mean(), 2.0);
        let arm = ArmModel::truncated_exponential(0.2, 10.0).unwrap();
        assert_abs_diff_eq!(arm.mean(), 5.0 * (1.0 - (-2.0f64).exp()), epsilon = 1e-14);
    }

    #[test]
    fn truncated_exponential_samples_in_support_and_mean() {
        let arm = ArmModel::truncated_exponential(1.0, 10.0).unwrap();
        let mut rng = RandomStream::keyed(&[5]);
        for _ in 0..100_000 {
            let x = arm.sample(&mut rng);
            assert!((0.0..=10.0).contains(&x));
        }
        let n = 1_000_000;
        let (m, sd) = moments(arm, n, 11);
        assert!((m - (1.0 - (-10.0f64).exp())).abs() < 4.0 * sd / 1000.0);
    }

    #[test]
    fn poisson_and_bernoulli_empirical_means() {
        let n = 1_000_000;
        for arm in [ArmModel::poisson(2.0).unwrap(), ArmModel::poisson(25.0).unwrap(), ArmModel::bernoulli(0.3).unwrap()] {
            let (m, sd) = moments(arm, n, 3);
            assert!((m - arm.mean()).abs() < 4.0 * sd / 1000.0, "{arm:?}: {m}");
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(ArmModel::bernoulli(1.1).is_err());
        assert!(ArmModel::truncated_exponential(1.0, 0.0).is_err());
        assert!(ArmModel::truncated_exponential(-1.0, 1.0).is_err());
        assert!(ArmModel::poisson(0.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let arm = ArmModel::truncated_exponential(0.5, 10.0).unwrap();
        let mut a = RandomStream::keyed(&[99, 1]);
        let mut b = RandomStream::keyed(&[99, 1]);
        for _ in 0..1000 {
            assert_eq!(arm.sample(&mut a).to_bits(), arm.sample(&mut b).to_bits());
        }
    }
}
