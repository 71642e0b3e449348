//! Property tests for the performance-difference identity and the bound.

use explain_core::analysis::{bound_check, disadvantage, policy_distance_inf, BOUND_TOL};
use explain_core::mdp::{expected_advantage, performance_difference, random, solve_values, PolicyTable, TabularMdp};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn triple(seed: u64, n_s: usize, n_a: usize, gamma: f64) -> (TabularMdp, PolicyTable, PolicyTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mdp = random::mdp(&mut rng, n_s, n_a, gamma);
    let a = random::policy(&mut rng, n_s, n_a);
    let b = random::policy(&mut rng, n_s, n_a);
    (mdp, a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn identity_holds(seed in any::<u64>(), n_s in 1usize..=6, n_a in 1usize..=4, gamma in 0.0f64..0.97) {
        let (mdp, pi, pi_new) = triple(seed, n_s, n_a, gamma);
        let pd = performance_difference(&mdp, &pi_new, &pi).unwrap();
        prop_assert!((pd.direct - pd.decomposed).abs() <= 1e-9);
    }

    #[test]
    fn expected_advantage_vanishes(seed in any::<u64>(), n_s in 1usize..=6, n_a in 1usize..=4, gamma in 0.0f64..0.97) {
        let (mdp, pi, _) = triple(seed, n_s, n_a, gamma);
        let adv = solve_values(&mdp, &pi).unwrap().adv;
        for s in 0..n_s {
            prop_assert!(expected_advantage(pi.row(s), &adv[s]).abs() <= 1e-10);
        }
    }

    #[test]
    fn bound_holds(seed in any::<u64>(), n_s in 1usize..=6, n_a in 2usize..=4, g in 0usize..3) {
        let (mdp, pi_e, pi_i) = triple(seed, n_s, n_a, [0.5, 0.9, 0.95][g]);
        let r = bound_check(&mdp, &pi_e, &pi_i).unwrap();
        prop_assert!(r.holds && r.slack >= -BOUND_TOL);
        prop_assert_eq!(r.rhs, r.adv_term - r.penalty);
        let same = bound_check(&mdp, &pi_e, &pi_e).unwrap();
        prop_assert!(same.slack.abs() <= 1e-9 && same.distance == 0.0);
        prop_assert!(disadvantage(&mdp, &pi_e, &pi_e).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn distance_is_a_metric(seed in any::<u64>(), n_s in 1usize..=6, n_a in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [a, b, c] = [0; 3].map(|_| random::policy(&mut rng, n_s, n_a));
        let ab = policy_distance_inf(&a, &b).unwrap();
        prop_assert_eq!(ab, policy_distance_inf(&b, &a).unwrap());
        prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
        prop_assert!(ab <= policy_distance_inf(&a, &c).unwrap() + policy_distance_inf(&c, &b).unwrap() + 1e-12);
        prop_assert_eq!(policy_distance_inf(&a, &a).unwrap(), 0.0);
    }
}
