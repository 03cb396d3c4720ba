//! Divergence kernels, the upper-confidence inversion solver and exact
//! binomial (Clopper-Pearson) upper bounds.

use libm::{exp, expm1, lgamma, log, log1p, sqrt};

use crate::error::{Error, Result};

/// Absolute tolerance on `d(mu_hat, q) - level` accepted by [`ucb_solve`].
pub const SOLVER_TOLERANCE: f64 = 1e-10;
/// Iteration cap of the safeguarded Newton loop.
pub const SOLVER_MAX_ITER: usize = 100;
/// Absolute tolerance on the Clopper-Pearson bound.
pub const CLOPPER_PEARSON_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    /// `p log(p/q) + (1-p) log((1-p)/(1-q))` on `[0,1]`.
    BernoulliKL,
    /// `2 (p-q)^2` on `[0,1]`, the Hoeffding/Pinsker surrogate.
    Quadratic,
    /// `x/y - 1 - log(x/y)` on `(0, inf)`.
    ExponentialKL,
    /// `y - x + x log(x/y)`, first argument in `[0, inf)`, second in `(0, inf)`.
    PoissonKL,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 4] = [
        DivergenceKind::BernoulliKL,
        DivergenceKind::Quadratic,
        DivergenceKind::ExponentialKL,
        DivergenceKind::PoissonKL,
    ];

    /// Supremum of the domain of the second argument.
    pub fn domain_sup(self) -> f64 {
        match self {
            DivergenceKind::BernoulliKL | DivergenceKind::Quadratic => 1.0,
            DivergenceKind::ExponentialKL | DivergenceKind::PoissonKL => f64::INFINITY,
        }
    }

    /// Checks that `x` is admissible as first argument.
    pub fn check_first(self, x: f64) -> Result<()> {
        let ok = match self {
            DivergenceKind::BernoulliKL | DivergenceKind::Quadratic => (0.0..=1.0).contains(&x),
            DivergenceKind::ExponentialKL => x > 0.0 && x.is_finite(),
            DivergenceKind::PoissonKL => x >= 0.0 && x.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!(
                "{x} is outside the domain of the {self:?} divergence"
            )))
        }
    }

    fn check_second(self, y: f64) -> Result<()> {
        let ok = match self {
            DivergenceKind::BernoulliKL | DivergenceKind::Quadratic => (0.0..=1.0).contains(&y),
            DivergenceKind::ExponentialKL | DivergenceKind::PoissonKL => {
                y > 0.0 && y.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!(
                "{y} is outside the domain of the {self:?} divergence"
            )))
        }
    }

    /// Evaluates `d(x, y)` after checking both arguments.
    pub fn eval(self, x: f64, y: f64) -> Result<f64> {
        self.check_first(x)?;
        self.check_second(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(self, x: f64, y: f64) -> f64 {
        match self {
            DivergenceKind::BernoulliKL => bernoulli_kl_raw(x, y),
            DivergenceKind::Quadratic => quadratic_div(x, y),
            DivergenceKind::ExponentialKL => {
                let r = x / y;
                r - 1.0 - log(r)
            }
            DivergenceKind::PoissonKL => {
                if x == 0.0 {
                    y
                } else {
                    y - x + x * log(x / y)
                }
            }
        }
    }

    /// Partial derivative of `d(x, y)` with respect to `y`.
    #[inline]
    fn slope(self, x: f64, y: f64) -> f64 {
        match self {
            DivergenceKind::BernoulliKL => (y - x) / (y * (1.0 - y)),
            DivergenceKind::Quadratic => 4.0 * (y - x),
            DivergenceKind::ExponentialKL => (y - x) / (y * y),
            DivergenceKind::PoissonKL => 1.0 - x / y,
        }
    }
}

#[inline]
fn bernoulli_kl_raw(p: f64, q: f64) -> f64 {
    let head = if p == 0.0 {
        0.0
    } else if q == 0.0 {
        return f64::INFINITY;
    } else {
        p * log(p / q)
    };
    let tail = if p == 1.0 {
        0.0
    } else if q == 1.0 {
        return f64::INFINITY;
    } else {
        (1.0 - p) * log((1.0 - p) / (1.0 - q))
    };
    head + tail
}

/// Bernoulli Kullback-Leibler divergence with `0 log 0 = 0` and
/// `x log(x/0) = +inf` for `x > 0`.
pub fn bernoulli_kl(p: f64, q: f64) -> Result<f64> {
    DivergenceKind::BernoulliKL.eval(p, q)
}

/// `2 (p - q)^2`.
#[inline]
pub fn quadratic_div(p: f64, q: f64) -> f64 {
    let diff = p - q;
    2.0 * diff * diff
}

/// Divergence between exponential laws with means `x` and `y`.
pub fn exponential_kl(x: f64, y: f64) -> Result<f64> {
    DivergenceKind::ExponentialKL.eval(x, y)
}

/// Divergence between Poisson laws with means `x` and `y`.
pub fn poisson_kl(x: f64, y: f64) -> Result<f64> {
    DivergenceKind::PoissonKL.eval(x, y)
}

/// Largest `q` in the domain with `d(mu_hat, q) <= level`.
///
/// The map `q -> d(mu_hat, q)` is convex and increasing to the right of
/// `mu_hat`, so the bound is the root of `d(mu_hat, q) = level` on
/// `(mu_hat, sup)`. It is found by Newton steps kept inside a shrinking
/// bracket, with a bisection step whenever Newton would leave it. For the
/// unbounded families the bracket is doubled until it contains the root.
///
/// The result either satisfies `|d(mu_hat, q) - level| <= 1e-10`, is a
/// domain endpoint, or (for roots closer to 1 than floating point can
/// resolve) is the representable point with the smallest residual.
pub fn ucb_solve(kind: DivergenceKind, mu_hat: f64, level: f64) -> Result<f64> {
    kind.check_first(mu_hat)?;
    if level.is_nan() || level < 0.0 {
        return Err(Error::invalid(alloc::format!(
            "confidence level must be nonnegative, got {level}"
        )));
    }
    if level == 0.0 {
        return Ok(mu_hat);
    }
    if level == f64::INFINITY {
        return Ok(kind.domain_sup());
    }

    match kind {
        DivergenceKind::Quadratic => Ok((mu_hat + sqrt(level / 2.0)).min(1.0)),
        DivergenceKind::BernoulliKL => {
            if mu_hat == 1.0 {
                return Ok(1.0);
            }
            if mu_hat == 0.0 {
                // d(0, q) = -log(1 - q)
                return Ok(-expm1(-level));
            }
            // Pinsker puts mu_hat + sqrt(level/2) to the right of the root;
            // the local quadratic approximation d ~ (q-p)^2 / (2p(1-p)) is
            // usually much closer.
            let pinsker = mu_hat + sqrt(level / 2.0);
            let local = mu_hat + sqrt(2.0 * mu_hat * (1.0 - mu_hat) * level);
            let start = if local < 1.0 {
                local.min(pinsker)
            } else if pinsker < 1.0 {
                pinsker
            } else {
                mu_hat + 0.5 * (1.0 - mu_hat)
            };
            newton_bracketed(kind, mu_hat, level, mu_hat, 1.0, start)
        }
        DivergenceKind::ExponentialKL | DivergenceKind::PoissonKL => {
            let mut lo = mu_hat;
            let mut hi = if mu_hat > 0.0 { 2.0 * mu_hat } else { 1.0 };
            while kind.eval_unchecked(mu_hat, hi) <= level {
                lo = hi;
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::NoConvergence {
                        kind,
                        mu_hat,
                        level,
                    });
                }
            }
            newton_bracketed(kind, mu_hat, level, lo, hi, hi)
        }
    }
}

// Invariant: d(mu, lo) <= level < d(mu, hi).
fn newton_bracketed(
    kind: DivergenceKind,
    mu: f64,
    level: f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
) -> Result<f64> {
    let mut x = start;
    for _ in 0..SOLVER_MAX_ITER {
        let f = kind.eval_unchecked(mu, x) - level;
        if f.abs() <= SOLVER_TOLERANCE {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - f / kind.slope(mu, x);
        if !(next > lo && next < hi) {
            next = lo + 0.5 * (hi - lo);
        }
        if next <= lo || next >= hi {
            // lo and hi are adjacent floats
            let r_lo = (kind.eval_unchecked(mu, lo) - level).abs();
            let r_hi = (kind.eval_unchecked(mu, hi) - level).abs();
            return Ok(if r_hi < r_lo { hi } else { lo });
        }
        x = next;
    }
    Err(Error::NoConvergence { kind, mu_hat: mu, level })
}

/// `P(Binomial(trials, q) <= successes)`, summed exactly in log space.
///
/// Terms are accumulated from `k = successes` downwards; the sum stops once
/// the remaining terms are decreasing and below 1e-17 of the running total.
pub fn binomial_lower_tail(successes: u64, trials: u64, q: f64) -> f64 {
    if successes >= trials || q <= 0.0 {
        return 1.0;
    }
    if q >= 1.0 {
        return 0.0;
    }
    let (log_top, rel_sum) = tail_parts(successes, trials, q);
    (exp(log_top) * rel_sum).min(1.0)
}

// Log of the top term P(X = successes) and the tail relative to it.
// Requires successes < trials and 0 < q < 1.
fn tail_parts(successes: u64, trials: u64, q: f64) -> (f64, f64) {
    let n = trials as f64;
    let x = successes as f64;
    let log_top = lgamma(n + 1.0) - lgamma(x + 1.0) - lgamma(n - x + 1.0)
        + x * log(q)
        + (n - x) * log1p(-q);
    let odds = (1.0 - q) / q;
    let mut term = 1.0;
    let mut rel_sum = 1.0;
    let mut k = successes;
    while k > 0 {
        let kf = k as f64;
        let ratio = kf / (n - kf + 1.0) * odds;
        term *= ratio;
        rel_sum += term;
        if ratio < 1.0 && term < rel_sum * 1e-17 {
            break;
        }
        k -= 1;
    }
    (log_top, rel_sum)
}

/// Clopper-Pearson upper confidence bound of risk `alpha`:
/// `max { q in [0,1] : P(Binomial(trials, q) <= successes) >= alpha }`.
///
/// The log of the tail is concave and decreasing in `q`, so Newton steps
/// started right of the root decrease monotonically onto it. Steps leaving
/// the current bracket are replaced by bisection.
pub fn clopper_pearson_ucb(successes: u64, trials: u64, alpha: f64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("Clopper-Pearson bound needs at least one trial"));
    }
    if successes > trials {
        return Err(Error::invalid(alloc::format!(
            "{successes} successes out of {trials} trials"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(alloc::format!(
            "risk must lie in (0,1), got {alpha}"
        )));
    }
    if successes == trials {
        return Ok(1.0);
    }
    if successes == 0 {
        // tail is (1-q)^n
        return Ok(-expm1(log(alpha) / trials as f64));
    }
    let n = trials as f64;
    let x = successes as f64;
    let log_alpha = log(alpha);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // Hoeffding: the tail is at most alpha here
    let mut q = (x / n + sqrt(-log_alpha / (2.0 * n))).min(0.5 * (x / n + 1.0));
    for _ in 0..SOLVER_MAX_ITER {
        let (log_top, rel_sum) = tail_parts(successes, trials, q);
        let h = log_top + log(rel_sum) - log_alpha;
        if h >= 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        let slope = -(n - x) / ((1.0 - q) * rel_sum);
        let mut next = q - h / slope;
        if !(next > lo && next < hi) {
            next = lo + 0.5 * (hi - lo);
        }
        if hi - lo <= 0.1 * CLOPPER_PEARSON_TOLERANCE
            || (h < 0.0 && q - next <= 0.01 * CLOPPER_PEARSON_TOLERANCE)
        {
            return Ok(if h < 0.0 { next.max(lo) } else { q });
        }
        q = next;
    }
    Err(Error::invalid(alloc::format!(
        "Clopper-Pearson bound for {successes}/{trials} at risk {alpha} did not converge"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bernoulli_examples() {
        assert_eq!(bernoulli_kl(0.5, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(bernoulli_kl(0.8, 0.9).unwrap(), 0.044405, epsilon = 1e-5);
        assert_abs_diff_eq!(bernoulli_kl(1.0, 0.5).unwrap(), core::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(bernoulli_kl(0.3, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(bernoulli_kl(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(bernoulli_kl(1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn domain_violations_rejected() {
        assert!(bernoulli_kl(1.2, 0.5).is_err());
        assert!(bernoulli_kl(0.5, -0.1).is_err());
        assert!(exponential_kl(0.0, 1.0).is_err());
        assert!(exponential_kl(1.0, -2.0).is_err());
        assert!(poisson_kl(1.0, 0.0).is_err());
        assert!(ucb_solve(DivergenceKind::BernoulliKL, 1.5, 0.1).is_err());
        assert!(ucb_solve(DivergenceKind::BernoulliKL, 0.5, -1.0).is_err());
        assert!(ucb_solve(DivergenceKind::ExponentialKL, 0.0, 0.1).is_err());
    }

    #[test]
    fn quadratic_examples() {
        assert_abs_diff_eq!(quadratic_div(0.9, 0.8), 0.02, epsilon = 1e-15);
        assert_eq!(quadratic_div(0.37, 0.37), 0.0);
        assert_eq!(quadratic_div(0.0, 1.0), 2.0);
    }

    #[test]
    fn exponential_and_poisson_examples() {
        assert_eq!(exponential_kl(1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(exponential_kl(1.0, 2.0).unwrap(), 0.193147, epsilon = 1e-6);
        assert_abs_diff_eq!(exponential_kl(2.0, 1.0).unwrap(), 1.0 - core::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(poisson_kl(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(poisson_kl(0.0, 2.0).unwrap(), 2.0);
        assert_abs_diff_eq!(poisson_kl(2.0, 1.0).unwrap(), 2.0 * core::f64::consts::LN_2 - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn solve_zero_level_returns_mean() {
        for kind in DivergenceKind::ALL {
            assert_eq!(ucb_solve(kind, 0.3, 0.0).unwrap(), 0.3);
        }
    }

    #[test]
    fn solve_bernoulli_at_zero_is_closed_form() {
        for delta in [0.01, 0.5, 1.0, 3.0, 9.0] {
            let q = ucb_solve(DivergenceKind::BernoulliKL, 0.0, delta).unwrap();
            assert_abs_diff_eq!(q, 1.0 - (-delta).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn solve_bernoulli_at_one_is_one() {
        for delta in [0.0, 0.2, 5.0] {
            assert_eq!(ucb_solve(DivergenceKind::BernoulliKL, 1.0, delta).unwrap(), 1.0);
        }
    }

    #[test]
    fn solve_quadratic_saturates() {
        assert_eq!(ucb_solve(DivergenceKind::Quadratic, 0.9, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            ucb_solve(DivergenceKind::Quadratic, 0.5, 0.02).unwrap(),
            0.6,
            epsilon = 1e-15
        );
    }

    #[test]
    fn solve_unbounded_families() {
        let q = ucb_solve(DivergenceKind::ExponentialKL, 1.0, 0.193147).unwrap();
        assert_abs_diff_eq!(q, 2.0, epsilon = 1e-5);
        let q = ucb_solve(DivergenceKind::ExponentialKL, 1.0, exponential_kl(1.0, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(q, 2.0, epsilon = 1e-6);
        // d(0, q) = q for Poisson
        let q = ucb_solve(DivergenceKind::PoissonKL, 0.0, 2.5).unwrap();
        assert_abs_diff_eq!(q, 2.5, epsilon = 1e-10);
        let q = ucb_solve(DivergenceKind::PoissonKL, 7.0, 50.0).unwrap();
        assert!((poisson_kl(7.0, q).unwrap() - 50.0).abs() <= SOLVER_TOLERANCE);
    }

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson_ucb(10, 10, 0.05).unwrap(), 1.0);
        assert_abs_diff_eq!(
            clopper_pearson_ucb(0, 20, 0.05).unwrap(),
            1.0 - 0.05f64.powf(1.0 / 20.0),
            epsilon = 1e-12
        );
        assert!(clopper_pearson_ucb(3, 2, 0.1).is_err());
        assert!(clopper_pearson_ucb(0, 0, 0.1).is_err());
        assert!(clopper_pearson_ucb(1, 4, 1.0).is_err());
        assert!(clopper_pearson_ucb(1, 4, 0.0).is_err());
    }

    #[test]
    fn binomial_tail_small_case() {
        // P(Bin(3, 0.5) <= 1) = 4/8
        assert_abs_diff_eq!(binomial_lower_tail(1, 3, 0.5), 0.5, epsilon = 1e-15);
        assert_eq!(binomial_lower_tail(3, 3, 0.2), 1.0);
        assert_eq!(binomial_lower_tail(2, 3, 1.0), 0.0);
    }
}
