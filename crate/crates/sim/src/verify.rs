//! Numerical self-check of the estimator and entropy identities on seeded
//! random trees, printed as one line per check.

use std::fmt;

use anyhow::Result;
use nested_core::entropy::{
    choice_map, class_cost_residual, conjugate_checks, decomposition_residual, fenchel_coupling,
    hrange, hrange_upper_bound, increment_machinery, StrategyVector,
};
use nested_core::estimators::expected_estimator_moments;
use nested_core::tree::random_tree;
use nested_core::{propagate_scores, IncrementVector, SimilarityTree, UncertaintyParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<34} worst {:>11.3e}  tol {:.0e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

fn at_most(name: &'static str, worst: f64, tolerance: f64) -> Check {
    Check {
        name,
        worst,
        tolerance,
        passed: worst <= tolerance,
    }
}

fn random_mu<R: Rng>(rng: &mut R, levels: usize) -> UncertaintyParams {
    let mut mu: Vec<f64> = (0..levels)
        .map(|_| 0.2 + 1.8 * rng.random::<f64>())
        .collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    UncertaintyParams::new(mu).expect("sorted positive temperatures")
}

fn random_scores<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect()
}

fn random_increments<R: Rng>(rng: &mut R, tree: &SimilarityTree) -> Result<IncrementVector> {
    let delta = tree
        .class_ids()
        .map(|c| tree.range(c) * rng.random::<f64>())
        .collect();
    Ok(IncrementVector::new(tree, delta)?)
}

/// Runs every check over `trials` random instances.
pub fn run_checks(seed: u64, trials: usize) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unbiased: f64 = 0.0;
    let mut second: f64 = 0.0;
    let mut aggregate = f64::NEG_INFINITY;
    let mut decomposition: f64 = 0.0;
    let mut value: f64 = 0.0;
    let mut excess = f64::NEG_INFINITY;
    let mut recursion: f64 = 0.0;
    let mut gradient: f64 = 0.0;
    let mut coupling_min = f64::INFINITY;
    let mut coupling_at_mirror: f64 = 0.0;
    let mut power_sum: f64 = 0.0;
    let mut slack = f64::INFINITY;
    let mut class_cost: f64 = 0.0;
    let mut hrange_gap = f64::NEG_INFINITY;
    let mut hrange_equal: f64 = 0.0;

    for i in 0..trials {
        let levels = 1 + i % 4;
        let tree = random_tree(&mut rng, levels, 3, 1.0);
        let mu = random_mu(&mut rng, levels);
        let y = random_scores(&mut rng, tree.num_arms());
        let inc = random_increments(&mut rng, &tree)?;

        let x = propagate_scores(&tree, &mu, &y)?.leaf_distribution(&tree);
        let m = expected_estimator_moments(&tree, &x, &inc)?;
        let caps = IncrementVector::new(&tree, tree.class_ids().map(|c| tree.range(c)).collect())?;
        let at_caps = expected_estimator_moments(&tree, &x, &caps)?;
        for c in tree.class_ids() {
            let d = inc.get(c);
            unbiased = unbiased.max((m.mean[c.index()] - d).abs());
            second = second.max(at_caps.weighted_second_moment[c.index()] - tree.range(c).powi(2));
        }
        aggregate = aggregate.max(at_caps.aggregate - tree.constants().n_eff);

        let p = StrategyVector::random(&tree, &mut rng);
        for c in tree.class_ids() {
            decomposition = decomposition.max(decomposition_residual(&tree, &mu, &p, c)?);
        }
        let report = conjugate_checks(&tree, &mu, &y, 100, &mut rng)?;
        value = value.max(report.value_residual);
        excess = excess.max(report.max_excess);
        recursion = recursion.max(report.recursion_residual);

        let h = 1e-5;
        for arm in 0..tree.num_arms() {
            let mut up = y.clone();
            up[arm] += h;
            let mut down = y.clone();
            down[arm] -= h;
            let fd = (propagate_scores(&tree, &mu, &up)?.root_score()
                - propagate_scores(&tree, &mu, &down)?.root_score())
                / (2.0 * h);
            gradient = gradient.max((fd - x[arm]).abs());
        }

        coupling_min = coupling_min.min(fenchel_coupling(&tree, &mu, &p, &y)?);
        let mirror = choice_map(&tree, &mu, &y)?;
        coupling_at_mirror =
            coupling_at_mirror.max(fenchel_coupling(&tree, &mu, &mirror, &y)?.abs());

        let c: Vec<f64> = (0..tree.num_arms())
            .map(|_| 2.0 * rng.random::<f64>())
            .collect();
        let inc_report = increment_machinery(&tree, &mu, &y, &c)?;
        power_sum = power_sum.max(inc_report.identity_residual);
        slack = slack.min(inc_report.bound_slack);
        let from_inc = increment_machinery(&tree, &mu, &y, &inc.leaf_costs(&tree))?;
        power_sum = power_sum.max(from_inc.identity_residual);
        slack = slack.min(from_inc.bound_slack);
        class_cost = class_cost.max(class_cost_residual(&tree, &mu, &y, &inc)?);

        hrange_gap = hrange_gap.max(hrange(&tree, &mu)? - hrange_upper_bound(&tree, &mu)?);
        let equal = UncertaintyParams::uniform(levels, mu.at_level(1))?;
        hrange_equal = hrange_equal
            .max((hrange(&tree, &equal)? - mu.at_level(1) * (tree.num_arms() as f64).ln()).abs());
    }

    Ok(vec![
        at_most("estimator unbiasedness", unbiased, 1e-12),
        at_most("estimator mean-square (per class)", second, 1e-12),
        at_most("estimator aggregate vs n_eff", aggregate, 1e-9),
        at_most("entropy decomposition", decomposition, 1e-9),
        at_most("conjugate value at mirror point", value, 1e-8),
        at_most("conjugate maximality", excess, 1e-8),
        at_most("conjugate recursion", recursion, 1e-8),
        at_most("gradient of conjugate", gradient, 1e-6),
        at_most("Fenchel coupling nonnegative", -coupling_min, 1e-9),
        at_most("Fenchel coupling at mirror point", coupling_at_mirror, 1e-8),
        at_most("power-sum identity", power_sum, 1e-8),
        at_most("increment bound", -slack, 1e-9),
        at_most("class-cost identity", class_cost, 1e-12),
        at_most("entropy range upper bound", hrange_gap, 1e-12),
        at_most("entropy range, equal temperatures", hrange_equal, 1e-9),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let checks = run_checks(1, 40).unwrap();
        for c in &checks {
            assert!(c.passed, "{c}");
        }
        assert!(checks[0].to_string().starts_with("PASS"));
    }
}
