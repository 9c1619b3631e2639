use agesched::config::{five_link_network, ten_link_network};
use agesched::prelude::*;
use proptest::prelude::*;

fn chosen_sequence(
    net: &NetworkConfig,
    policy: PolicySpec,
    horizon: u64,
    seed: u64,
) -> Vec<Schedule> {
    let mut out = Vec::new();
    run_replication_observed(
        net,
        &policy,
        horizon,
        seed,
        0,
        &SimOptions::default(),
        |r| out.push(r.chosen.clone()),
    )
    .unwrap();
    out
}

#[test]
fn age_based_is_round_robin_up_to_a_phase_shift() {
    let net = five_link_network();
    let age = chosen_sequence(&net, PolicySpec::AgeBased, 200, 3);
    let rr = chosen_sequence(&net, PolicySpec::RoundRobin, 200, 3);
    // slot 0 sees all-zero ages and slot 1 all-one ages, so the age-based
    // cycle runs one slot behind
    for t in net.num_links() + 1..200 {
        assert_eq!(age[t], rr[t - 1], "slot {t}");
        assert_eq!(age[t], Schedule::single((t - 1) % 5));
    }
}

/// Two always-ON links with the estimates pinned at their means: the weak
/// link waits until its age beats the strong one's by `eta * (0.9 - 0.5)`.
#[test]
fn converged_two_link_cycle() {
    let net = NetworkConfig::non_fading(&[0.9, 0.5], FeasibleSet::AtMostK(1)).unwrap();
    let channels = ChannelState::all_on(2);
    let huge = 1u64 << 40;
    let mut ages = [1u64, 1];
    let mut served_weak = Vec::new();
    for t in 0..500u64 {
        let links = vec![
            LinkStats {
                deliveries: huge,
                reward_sum: 0.9 * huge as f64,
                age: ages[0],
            },
            LinkStats {
                deliveries: huge,
                reward_sum: 0.5 * huge as f64,
                age: ages[1],
            },
        ];
        let state = LearningState::from_parts(links, 1);
        let s = PolicySpec::laes(50.0)
            .decide(&net, &state, &channels, &mut TieBreaker::LowestIndex)
            .unwrap();
        for (n, z) in ages.iter_mut().enumerate() {
            *z = if s.contains(n) { 1 } else { *z + 1 };
        }
        if s.contains(1) {
            served_weak.push(t);
        }
    }
    let gaps: Vec<u64> = served_weak.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.len() > 10 && gaps.iter().all(|&g| g == 22), "{gaps:?}");
}

#[test]
fn genie_run_has_zero_regret_everywhere() {
    let net = ten_link_network();
    let run = run_replication(&net, &PolicySpec::Genie, 3_000, 5, &SimOptions::default()).unwrap();
    assert!(run.cumulative_regret.iter().all(|&r| r == 0.0));
}

#[test]
fn round_robin_rejects_multi_link_schedules() {
    let net = ten_link_network();
    assert!(PolicySpec::RoundRobin.validate(&net).is_err());
    assert!(run_replication(&net, &PolicySpec::RoundRobin, 10, 1, &SimOptions::default()).is_err());
}

#[test]
fn random_tie_break_is_seeded() {
    let net = five_link_network();
    let opts = SimOptions {
        tie_break: TieBreakMode::Random,
        ..Default::default()
    };
    let a = run_replication(&net, &PolicySpec::AgeBased, 500, 4, &opts).unwrap();
    let b = run_replication(&net, &PolicySpec::AgeBased, 500, 4, &opts).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With a huge `eta` the ages only matter when UCB values nearly tie.
    #[test]
    fn huge_eta_decides_like_ucb_only(
        stats in prop::collection::vec((1u64..500, 0.0f64..1.0, 1u64..1_000), 5),
        on in prop::collection::vec(any::<bool>(), 5),
        slot in 2u64..5_000,
    ) {
        let net = five_link_network();
        let links = stats
            .iter()
            .map(|&(h, m, z)| LinkStats { deliveries: h, reward_sum: m * h as f64, age: z })
            .collect();
        let state = LearningState::from_parts(links, slot);
        let channels = ChannelState::new(on);
        let mut ucb: Vec<f64> = state
            .ucb_estimates()
            .into_iter()
            .zip(channels.as_slice())
            .filter_map(|(w, &c)| c.then_some(w))
            .collect();
        ucb.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(ucb.len() < 2 || ucb[0] - ucb[1] > 1e-3);
        let mut ties = TieBreaker::LowestIndex;
        let a = PolicySpec::UcbOnly.decide(&net, &state, &channels, &mut ties).unwrap();
        let b = PolicySpec::laes(1e9).decide(&net, &state, &channels, &mut ties).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn every_policy_picks_feasible_sets(
        seed in any::<u64>(),
        eta in 0.0f64..300.0,
        fading in any::<bool>(),
    ) {
        let net = if fading { ten_link_network() } else { five_link_network() };
        for policy in [PolicySpec::laes(eta), PolicySpec::UcbOnly, PolicySpec::AgeBased, PolicySpec::Genie] {
            let mut ok = true;
            run_replication_observed(&net, &policy, 300, seed, 0, &SimOptions::default(), |r| {
                ok &= net.is_feasible(r.chosen) && r.regret >= -1e-12;
            }).unwrap();
            prop_assert!(ok);
        }
    }
}
