use nested_core::entropy::{template_residual, StrategyVector, TemplateStep};
use nested_core::envs::{make_symmetric_env, Environment, RedBlueBus, ScriptedEnv};
use nested_core::policies::{tuned_parameters, NewPolicy};
use nested_core::tree::random_tree;
use nested_core::{
    propagate_scores, LearningRate, Policy, PolicyConfig, PolicyKind, SimilarityTree,
    UncertaintyParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run_bookkeeping(kind: PolicyKind, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = random_tree(&mut rng, 3, 3, 1.0);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let mut env = nested_core::envs::StochasticTreeEnv::new(&t, 0.25, &mut env_rng).unwrap();
    let mut policy = PolicyConfig::tuned(kind).build(&t).unwrap();
    let mut total = vec![0.0; t.num_arms()];
    for round in 1..=300 {
        let inc = env.step(round, &mut env_rng).unwrap();
        let arm = policy.choose(&mut rng).unwrap();
        let x = policy.strategy();
        let sum: f64 = x.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(x.iter().all(|p| *p > 0.0));
        policy
            .feedback(&inc.on_path(&t.lineage_of_arm(arm)))
            .unwrap();
        for (acc, c) in total.iter_mut().zip(policy.last_estimate()) {
            *acc += c;
        }
    }
    for (y, c) in policy.propensities().iter().zip(&total) {
        assert!((y + c).abs() <= 1e-9 * c.abs().max(1.0));
    }
}

#[test]
fn propensities_are_negative_cumulative_estimates() {
    for seed in 0..4 {
        run_bookkeeping(PolicyKind::New, seed);
        run_bookkeeping(PolicyKind::Exp3, seed);
    }
}

#[test]
fn flat_new_is_exp3() {
    for seed in 0..5 {
        let mut setup = ChaCha8Rng::seed_from_u64(seed);
        let (tree, env) = make_symmetric_env(1, 6, 10.0, 0.25, &mut setup).unwrap();
        let mut arms = Vec::new();
        for kind in [PolicyKind::New, PolicyKind::Exp3] {
            let mut env = env.clone();
            let mut env_rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let mut policy = PolicyConfig::tuned(kind).build(&tree).unwrap();
            let mut trace = Vec::new();
            for round in 1..=1000 {
                let inc = env.step(round, &mut env_rng).unwrap();
                let arm = policy.choose(&mut rng).unwrap();
                trace.push((arm, policy.strategy().to_vec()));
                policy
                    .feedback(&inc.on_path(&tree.lineage_of_arm(arm)))
                    .unwrap();
            }
            arms.push((trace, policy.propensities().to_vec()));
        }
        assert_eq!(arms[0], arms[1]);
    }
}

#[test]
fn observed_loss_lowers_probability() {
    let t = SimilarityTree::symmetric(&[2, 2], &[0.5, 0.5]).unwrap();
    let mu = UncertaintyParams::uniform(2, 1.0).unwrap();
    let mut policy = NewPolicy::new(&t, mu.clone(), LearningRate::Constant(0.5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let arm = policy.choose(&mut rng).unwrap();
    let before = policy.strategy()[arm];
    policy.feedback(&[0.3, 0.2]).unwrap();
    let scaled: Vec<f64> = policy.propensities().iter().map(|y| 0.5 * y).collect();
    let after = propagate_scores(&t, &mu, &scaled)
        .unwrap()
        .total_prob(&t, t.leaf_of_arm(arm))
        .unwrap();
    assert!(after < before);
}

/// Replays two NEW rounds on the red/blue bus by hand: closed-form nested
/// logit probabilities for μ = (1, 1), the same uniforms the policy consumes,
/// and the nested estimator written out per class.
#[test]
fn red_blue_bus_two_step_trace() {
    let (tree, mut env) = RedBlueBus::default().build().unwrap();
    let mu = UncertaintyParams::uniform(2, 1.0).unwrap();
    let mut policy = NewPolicy::new(&tree, mu, LearningRate::TunedAnytime).unwrap();
    let mut env_rng = ChaCha8Rng::seed_from_u64(7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut shadow = ChaCha8Rng::seed_from_u64(8);

    let mut y = [0.0f64; 3];
    for round in 1..=2u64 {
        let inc = env.step(round, &mut env_rng).unwrap();
        let arm = policy.choose(&mut rng).unwrap();

        let eta = (3f64.ln() / (2.0 * round as f64)).sqrt();
        let w: Vec<f64> = y.iter().map(|v| (eta * v).exp()).collect();
        let p_bus = (w[0] + w[1]) / (w[0] + w[1] + w[2]);
        let p_red = w[0] / (w[0] + w[1]);
        let u1: f64 = shadow.random();
        let u2: f64 = shadow.random();
        let expected_arm = if u1 < p_bus {
            if u2 < p_red {
                0
            } else {
                1
            }
        } else {
            2
        };
        assert_eq!(arm, expected_arm);

        let lineage = tree.lineage_of_arm(arm);
        let (d1, d2) = (inc.get(lineage[0]), inc.get(lineage[1]));
        policy.feedback(&[d1, d2]).unwrap();
        match arm {
            0 | 1 => {
                let leaf_p = if arm == 0 { p_red } else { 1.0 - p_red };
                y[0] -= d1 / p_bus;
                y[1] -= d1 / p_bus;
                y[arm] -= d2 / (p_bus * leaf_p);
            }
            _ => y[2] -= (d1 + d2) / (1.0 - p_bus),
        }
        for (a, b) in y.iter().zip(policy.propensities()) {
            assert!(
                (a - b).abs() < 1e-12,
                "round {round}: {y:?} vs {:?}",
                policy.propensities()
            );
        }
    }
    // Frozen from the replay above.
    let frozen = [
        -0.6433470727654644,
        -0.6433470727654644,
        -0.22219651578213945,
    ];
    for (a, b) in frozen.iter().zip(policy.propensities()) {
        assert!((a - b).abs() < 1e-12, "{:?}", policy.propensities());
    }
}

#[test]
fn template_inequality_along_trajectories() {
    for seed in 0..5 {
        let mut setup = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut setup, 3, 3, 1.0);
        let mut env = nested_core::envs::StochasticTreeEnv::new(&tree, 0.25, &mut setup).unwrap();
        let tuned = tuned_parameters(&tree);
        let mu = tuned.uncertainty(3).unwrap();
        let mut policy = NewPolicy::new(&tree, mu.clone(), LearningRate::TunedAnytime).unwrap();
        let comparators = [StrategyVector::random(&tree, &mut setup), {
            let mut d = vec![0.0; tree.num_arms()];
            d[0] = 1.0;
            StrategyVector::new(&tree, d).unwrap()
        }];
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
        for round in 1..=200u64 {
            let inc = env.step(round, &mut setup).unwrap();
            let y = policy.propensities().to_vec();
            let arm = policy.choose(&mut rng).unwrap();
            let eta = policy.current_rate();
            policy
                .feedback(&inc.on_path(&tree.lineage_of_arm(arm)))
                .unwrap();
            let step = TemplateStep {
                eta,
                eta_next: tuned.eta(round + 1),
                y: &y,
                y_next: policy.propensities(),
                estimate: policy.last_estimate(),
            };
            for p in &comparators {
                let r = template_residual(&tree, &mu, p, &step).unwrap();
                assert!(r >= -1e-8, "seed {seed} round {round}: {r}");
            }
        }
    }
}

#[test]
fn zero_loss_script_keeps_uniform_play() {
    let t = SimilarityTree::symmetric(&[3, 2], &[0.5, 0.5]).unwrap();
    let mut env = ScriptedEnv::from_entries(&t, 50, &[]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut policy = PolicyConfig::tuned(PolicyKind::New).build(&t).unwrap();
    for round in 1..=50 {
        let inc = env.step(round, &mut rng).unwrap();
        let arm = policy.choose(&mut rng).unwrap();
        for x in policy.strategy() {
            assert!((x - 1.0 / 6.0).abs() < 1e-15);
        }
        policy
            .feedback(&inc.on_path(&t.lineage_of_arm(arm)))
            .unwrap();
    }
}
