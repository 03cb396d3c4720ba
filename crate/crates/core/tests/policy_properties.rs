use klucb_core::policy::{dmed_admits, index, PolicyKind, PolicySpec, PolicyState};
use klucb_core::reward::ArmModel;
use klucb_core::simulator::{run_one, ScenarioConfig};
use klucb_core::{Policy, RandomStream};
use proptest::prelude::*;

/// Bernoulli histories: (pull count, success count) per arm.
fn history() -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((1u64..400, 0.0f64..=1.0), 2..7).prop_map(|arms| {
        arms.into_iter()
            .map(|(n, frac)| (n, (n as f64 * frac).round() as u64))
            .collect()
    })
}

fn state_of(h: &[(u64, u64)]) -> PolicyState {
    let counts = h.iter().map(|&(n, _)| n).collect();
    let sums: Vec<f64> = h.iter().map(|&(_, s)| s as f64).collect();
    PolicyState::from_parts(counts, sums.clone(), sums).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cp_below_kl_below_ucb(h in history(), c in prop::sample::select(vec![0.0, 1.0, 3.0])) {
        let state = state_of(&h);
        let t = (state.t() + 1) as f64;
        let cp = PolicySpec::new(PolicyKind::CpUcb).with_c(c);
        let kl = PolicySpec::new(PolicyKind::KlUcb).with_c(c);
        let ucb = PolicySpec::new(PolicyKind::Ucb).with_c(c);
        for a in 0..state.n_arms() {
            let (i_cp, i_kl, i_ucb) = (
                index(&cp, &state, a, t).unwrap(),
                index(&kl, &state, a, t).unwrap(),
                index(&ucb, &state, a, t).unwrap(),
            );
            prop_assert!(i_cp <= i_kl + 1e-9, "cp {i_cp} > kl {i_kl}");
            prop_assert!(i_kl <= i_ucb + 1e-9, "kl {i_kl} > ucb {i_ucb}");
        }
    }

    #[test]
    fn klucb_plus_below_klucb(h in history()) {
        let state = state_of(&h);
        let t = (state.t() + 1) as f64;
        let plus = PolicySpec::new(PolicyKind::KlUcbPlus);
        let kl = PolicySpec::new(PolicyKind::KlUcb);
        for a in 0..state.n_arms() {
            prop_assert!(index(&plus, &state, a, t).unwrap() <= index(&kl, &state, a, t).unwrap() + 1e-12);
        }
    }

    #[test]
    fn dmed_excluded_arms_are_not_klucb_maximizers(h in history()) {
        let state = state_of(&h);
        let t = (state.t() + 1) as f64;
        let kl = PolicySpec::new(PolicyKind::KlUcb);
        let idx: Vec<f64> = (0..state.n_arms()).map(|a| index(&kl, &state, a, t).unwrap()).collect();
        let best = idx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (a, &i) in idx.iter().enumerate() {
            if !dmed_admits(&state, a, t, false) {
                prop_assert!(i < best - 1e-9, "excluded arm {a} has index {i} vs max {best}");
            }
        }
    }

    #[test]
    fn scale_does_not_change_decisions(seed in any::<u64>(), means in prop::collection::vec(0.05f64..0.95, 2..5)) {
        // rewards in [0, 10]; scaled policy vs unit policy fed pre-divided rewards
        let scale = 10.0;
        let arms: Vec<ArmModel> = means.iter().map(|&m| ArmModel::truncated_exponential(1.0 / (m * scale), scale).unwrap()).collect();
        let k = arms.len();
        let mut scaled = Policy::new(PolicySpec::new(PolicyKind::KlUcb).with_scale(scale), k).unwrap();
        let mut unit = Policy::new(PolicySpec::new(PolicyKind::KlUcb), k).unwrap();
        let mut ties_a = RandomStream::keyed(&[seed, 1]);
        let mut ties_b = RandomStream::keyed(&[seed, 1]);
        let mut streams: Vec<RandomStream> = (0..k).map(|a| RandomStream::keyed(&[seed, a as u64])).collect();
        for _ in 0..300 {
            let a = scaled.select(&mut ties_a).unwrap();
            let b = unit.select(&mut ties_b).unwrap();
            prop_assert_eq!(a, b);
            let r = arms[a].sample(&mut streams[a]);
            scaled.update(a, r).unwrap();
            unit.update(b, r / scale).unwrap();
        }
        prop_assert_eq!(scaled.state(), unit.state());
    }
}

#[test]
fn counts_sum_to_time_for_every_policy() {
    let horizon = 400;
    let arms = vec![
        ArmModel::bernoulli(0.5).unwrap(),
        ArmModel::bernoulli(0.45).unwrap(),
        ArmModel::bernoulli(0.3).unwrap(),
    ];
    for kind in PolicyKind::ALL {
        let spec = match kind {
            PolicyKind::Moss => PolicySpec::new(kind).with_horizon(horizon),
            _ => PolicySpec::new(kind),
        };
        let scenario = ScenarioConfig {
            arms: arms.clone(),
            horizon,
            replications: 1,
            checkpoints: (1..=horizon).collect(),
            master_seed: 5,
            policies: vec![spec.clone()],
        };
        let run = run_one(&scenario, &spec, 0).unwrap();
        for (i, draws) in run.draws.iter().enumerate() {
            assert_eq!(draws.iter().sum::<u64>(), i as u64 + 1, "{kind}");
            if i + 1 >= arms.len() {
                assert!(draws.iter().all(|&n| n >= 1), "{kind}");
            }
        }
        assert!(run.regret.windows(2).all(|w| w[0] <= w[1]), "{kind}");
    }
}

#[test]
fn poisson_and_exponential_variants_run() {
    let horizon = 2000;
    let scenario = ScenarioConfig {
        arms: vec![ArmModel::poisson(2.0).unwrap(), ArmModel::poisson(3.0).unwrap()],
        horizon,
        replications: 1,
        checkpoints: vec![horizon],
        master_seed: 1,
        policies: vec![PolicySpec::new(PolicyKind::KlUcbPoisson)],
    };
    scenario.validate().unwrap();
    let run = run_one(&scenario, &scenario.policies[0], 0).unwrap();
    assert!(run.draws[0][1] > run.draws[0][0]);

    let scenario = ScenarioConfig {
        arms: vec![
            ArmModel::truncated_exponential(1.0, 10.0).unwrap(),
            ArmModel::truncated_exponential(0.25, 10.0).unwrap(),
        ],
        horizon,
        replications: 1,
        checkpoints: vec![horizon],
        master_seed: 1,
        policies: vec![PolicySpec::new(PolicyKind::KlUcbExp)],
    };
    let run = run_one(&scenario, &scenario.policies[0], 0).unwrap();
    assert!(run.draws[0][1] > run.draws[0][0]);
}
