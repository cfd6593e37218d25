use mdplab::mdp::{make_random_mdp, make_shaping_toy, FiniteMdp};
use mdplab::metrics::hitting_cost_matrix;
use mdplab::rng::seeded;
use mdplab::shaping::{
    check_pi_equivalence, mehc_shaping_report, sample_admissible_potential, shape, toy_potential,
};
use proptest::prelude::*;

/// A random communicating MDP with an admissible potential, if one is found.
fn instance(seed: u64, n: usize, na: usize) -> Option<(FiniteMdp, Vec<f64>)> {
    let mut rng = seeded(seed);
    let mdp = make_random_mdp(&mut rng, n, na, 0.5, 0.05, 0.95);
    let phi = sample_admissible_potential(&mut rng, &mdp)?;
    Some((mdp, phi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_potential_is_identity(seed in any::<u64>(), n in 1usize..7, na in 1usize..4) {
        let mdp = make_random_mdp(&mut seeded(seed), n, na, 0.5, 0.0, 1.0);
        prop_assert_eq!(shape(&mdp, &vec![0.0; n]).unwrap(), mdp);
    }

    #[test]
    fn negated_potential_inverts(seed in any::<u64>(), n in 2usize..7, na in 1usize..4) {
        let Some((mdp, phi)) = instance(seed, n, na) else { return Ok(()); };
        let neg: Vec<f64> = phi.iter().map(|p| -p).collect();
        let back = shape(&shape(&mdp, &phi).unwrap(), &neg).unwrap();
        for (a, b) in back.mean_rewards().iter().zip(mdp.mean_rewards()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn shaping_preserves_every_gain(seed in any::<u64>(), n in 2usize..6, na in 1usize..4) {
        let Some((mdp, phi)) = instance(seed, n, na) else { return Ok(()); };
        let gap = check_pi_equivalence(&mdp, &shape(&mdp, &phi).unwrap(), 20, seed).unwrap();
        prop_assert!(gap <= 1e-9, "gap {gap}");
    }

    #[test]
    fn hitting_costs_shift_by_potential(seed in any::<u64>(), n in 2usize..6, na in 1usize..4) {
        let Some((mdp, phi)) = instance(seed, n, na) else { return Ok(()); };
        let c = hitting_cost_matrix(&mdp);
        let cs = hitting_cost_matrix(&shape(&mdp, &phi).unwrap());
        for s in 0..n {
            for t in 0..n {
                if c[(s, t)].is_finite() {
                    prop_assert!((cs[(s, t)] - (c[(s, t)] + phi[s] - phi[t])).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn mehc_changes_by_at_most_factor_two(seed in any::<u64>(), n in 2usize..6, na in 1usize..4) {
        let Some((mdp, phi)) = instance(seed, n, na) else { return Ok(()); };
        if let Ok(report) = mehc_shaping_report(&mdp, &phi) {
            prop_assert!(report.within_factor_two(), "{report:?}");
        }
    }
}

#[test]
fn worked_example_greedy_actions() {
    let (alpha, beta, eps) = (0.11, 0.1, 0.05);
    let shaped = shape(
        &make_shaping_toy(alpha, beta, eps).unwrap(),
        &toy_potential(alpha, beta, eps),
    )
    .unwrap();
    // a2 (index 1) wins at s1, a1 (index 0) wins at s2.
    assert!(shaped.mean_reward(0, 1) > shaped.mean_reward(0, 0));
    assert!(shaped.mean_reward(1, 0) > shaped.mean_reward(1, 1));
}
