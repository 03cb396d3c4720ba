use approx::assert_abs_diff_eq;
use klucb_core::analysis::{
    deviation_bound, empirical_coverage, kl_equals_rate_function_check, lai_robbins_constant,
    mgf_domination_check, regret_constant, BoundedLaw, ExpFamily, SamplingSchedule,
};
use klucb_core::{ArmModel, DivergenceKind};
use proptest::prelude::*;

/// Composite Gauss-Legendre (5 points) on `n` panels.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683, 0.538_469_310_105_683, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [0.568_888_888_888_889, 0.478_628_670_499_366, 0.478_628_670_499_366, 0.236_926_885_056_189, 0.236_926_885_056_189];
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let mid = a + h * (i as f64 + 0.5);
            X.iter().zip(W).map(|(&x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

#[test]
fn truncated_exponential_mean_by_quadrature() {
    // E[min(X, c)] = int_0^c P(X > x) dx
    let rate = 0.2;
    let oracle = gauss_legendre(|x| (-rate * x).exp(), 0.0, 10.0, 200);
    assert_abs_diff_eq!(oracle, 4.3233, epsilon = 1e-4);
    let arm = ArmModel::truncated_exponential(rate, 10.0).unwrap();
    assert_abs_diff_eq!(arm.mean(), oracle, epsilon = 1e-12);
}

#[test]
fn scaled_truncated_exponential_mgf_by_quadrature() {
    let (rate, cap, scale) = (1.0, 10.0, 10.0);
    let law = BoundedLaw::Scaled { arm: ArmModel::truncated_exponential(rate, cap).unwrap(), scale };
    for i in -10..=10 {
        let l = f64::from(i) / 2.0;
        let body = gauss_legendre(|x: f64| rate * (-rate * x).exp() * (l * x / scale).exp(), 0.0, cap, 400);
        let atom = (-rate * cap).exp() * (l * cap / scale).exp();
        assert_abs_diff_eq!(law.mgf(l), body + atom, epsilon = 1e-12 * (body + atom));
    }
    let grid: Vec<f64> = (-50..=50).map(|i| f64::from(i) / 10.0).collect();
    assert!(mgf_domination_check(&law, &grid).unwrap());
}

#[test]
fn kl_matches_rate_function_on_fixed_pairs() {
    assert!(kl_equals_rate_function_check(ExpFamily::Exponential, 1.0, 2.0).unwrap() < 1e-6);
    assert!(kl_equals_rate_function_check(ExpFamily::Poisson, 2.0, 1.0).unwrap() < 1e-6);
}

#[test]
fn quadratic_constant_dominates_kl_constant() {
    for means in [vec![0.9, 0.8], vec![0.1, 0.05, 0.05, 0.05, 0.02, 0.02, 0.02, 0.01, 0.01, 0.01], vec![0.5, 0.49, 0.2]] {
        let kl = regret_constant(&means, DivergenceKind::BernoulliKL).unwrap();
        let quad = regret_constant(&means, DivergenceKind::Quadratic).unwrap();
        assert!(quad.total > kl.total);
        for (q, k) in quad.per_arm.iter().zip(&kl.per_arm) {
            if let (Some(q), Some(k)) = (q, k) {
                assert!(q > k);
            }
        }
    }
    let arms: Vec<ArmModel> = [0.9, 0.8].iter().map(|&p| ArmModel::bernoulli(p).unwrap()).collect();
    assert_abs_diff_eq!(lai_robbins_constant(&arms).unwrap().total, 2.25, epsilon = 5e-3);
}

#[test]
fn coverage_within_bound_small() {
    let n = 100;
    let delta = (n as f64).ln();
    let bound = deviation_bound(delta, n);
    for schedule in [SamplingSchedule::Full, SamplingSchedule::Alternating] {
        let c = empirical_coverage(0.5, n, delta, 20_000, 3, schedule).unwrap();
        assert!(c.frequency <= bound + 3.0 * c.standard_error, "{schedule:?}: {}", c.frequency);
        assert!(c.frequency < 0.05);
    }
}

proptest! {
    #[test]
    fn deviation_bound_nonincreasing_past_threshold(n in 2u64..100_000, a in 0.0f64..40.0, b in 0.0f64..40.0) {
        let start = 1.0 + 1.0 / (n as f64).ln();
        let (lo, hi) = if a <= b { (start + a, start + b) } else { (start + b, start + a) };
        prop_assert!(deviation_bound(hi, n) <= deviation_bound(lo, n) * (1.0 + 1e-12));
    }

    #[test]
    fn point_masses_are_dominated(x in 0.0f64..=1.0) {
        let grid: Vec<f64> = (-50..=50).map(|i| f64::from(i) / 10.0).collect();
        prop_assert!(mgf_domination_check(&BoundedLaw::PointMass(x), &grid).unwrap());
    }
}
