//! Importance-weighted loss estimators.
//!
//! [`iwe`] is the classic single-level estimator. [`niwe`] follows the
//! top-down draw: each class on the sampled path gets its observed increment
//! divided by the probability of the path prefix that reached it, and every
//! other class gets zero. The per-arm estimate is the sum of the estimates of
//! the classes containing the arm, so a single observation of a coarse class
//! updates all of its arms.

use alloc::vec;
use alloc::vec::Vec;

use crate::choice::SamplePath;
use crate::error::{Error, Result};
use crate::tree::{ClassId, SimilarityTree, RANGE_TOLERANCE};

/// Largest arm count [`expected_estimator_moments`] will enumerate.
pub const MAX_ENUMERATED_ARMS: usize = 10_000;

/// Per-class idiosyncratic losses `δ_C ∈ [0, R_C]`, indexed by class id. The
/// root entry is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementVector {
    delta: Vec<f64>,
}

impl IncrementVector {
    pub fn new(tree: &SimilarityTree, delta: Vec<f64>) -> Result<Self> {
        if delta.len() != tree.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: tree.num_classes(),
                got: delta.len(),
            });
        }
        for class in tree.class_ids() {
            let value = delta[class.index()];
            let range = tree.range(class);
            if !(value >= 0.0 && value <= range + RANGE_TOLERANCE) {
                return Err(Error::IncrementOutOfRange {
                    class: class.index(),
                    value,
                    range,
                });
            }
        }
        Ok(Self { delta })
    }

    pub fn zeros(tree: &SimilarityTree) -> Self {
        Self {
            delta: vec![0.0; tree.num_classes()],
        }
    }

    /// Skips validation; callers guarantee the range invariant.
    pub(crate) fn from_raw(delta: Vec<f64>) -> Self {
        Self { delta }
    }

    pub fn get(&self, class: ClassId) -> f64 {
        self.delta[class.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.delta
    }

    /// `c_α = Σ_{C ∋ α} δ_C`, indexed by arm.
    pub fn leaf_costs(&self, tree: &SimilarityTree) -> Vec<f64> {
        let mut cum = vec![0.0; tree.num_classes()];
        for class in tree.class_ids().skip(1) {
            let parent = tree.parent(class).unwrap_or(ClassId::ROOT);
            cum[class.index()] = cum[parent.index()] + self.delta[class.index()];
        }
        (0..tree.num_arms())
            .map(|arm| cum[tree.leaf_of_arm(arm).index()])
            .collect()
    }

    /// The increments of `classes`, in order: what a semi-bandit learner sees.
    pub fn on_path(&self, classes: &[ClassId]) -> Vec<f64> {
        classes.iter().map(|c| self.delta[c.index()]).collect()
    }

    /// `Σ_C w_C δ_C` for per-class weights `w`.
    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        self.delta.iter().zip(weights).map(|(d, w)| d * w).sum()
    }
}

/// Per-leaf cost vector induced by `increments`.
pub fn leaf_costs(increments: &IncrementVector, tree: &SimilarityTree) -> Vec<f64> {
    increments.leaf_costs(tree)
}

/// Nested estimate: nonzero only on the sampled path.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedIncrements {
    entries: Vec<(ClassId, f64)>,
}

impl EstimatedIncrements {
    pub fn entries(&self) -> &[(ClassId, f64)] {
        &self.entries
    }

    pub fn delta_hat(&self, class: ClassId) -> f64 {
        self.entries
            .iter()
            .find(|(c, _)| *c == class)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn leaf_cost_hat(&self, tree: &SimilarityTree, arm: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(c, _)| tree.arms_in(*c).contains(&arm))
            .map(|(_, v)| v)
            .sum()
    }

    /// `ĉ_α = Σ_{C ∋ α} δ̂_C` for every arm.
    pub fn densify(&self, tree: &SimilarityTree) -> Vec<f64> {
        let mut out = vec![0.0; tree.num_arms()];
        for &(class, value) in &self.entries {
            for &arm in tree.arms_in(class) {
                out[arm] += value;
            }
        }
        out
    }
}

/// Importance-weighted estimate of `costs` after `chosen ~ strategy`.
pub fn iwe(costs: &[f64], strategy: &[f64], chosen: usize) -> Result<Vec<f64>> {
    if costs.len() != strategy.len() {
        return Err(Error::DimensionMismatch {
            expected: strategy.len(),
            got: costs.len(),
        });
    }
    let x = *strategy.get(chosen).ok_or(Error::InvalidArm(chosen))?;
    if x <= 0.0 {
        return Err(Error::ZeroProbabilityArm(chosen));
    }
    let mut out = vec![0.0; costs.len()];
    out[chosen] = costs[chosen] / x;
    Ok(out)
}

/// Nested importance-weighted estimate from the on-path increments
/// `observed` (level 1 first), using the probabilities recorded in `path`.
pub fn niwe(
    tree: &SimilarityTree,
    path: &SamplePath,
    observed: &[f64],
) -> Result<EstimatedIncrements> {
    let levels = tree.num_levels();
    if observed.len() != levels {
        return Err(Error::MissingIncrement {
            expected: levels,
            got: observed.len(),
        });
    }
    if path.classes.len() != levels || path.path_prob_prefix.len() != levels {
        return Err(Error::DimensionMismatch {
            expected: levels,
            got: path.classes.len(),
        });
    }
    let mut entries = Vec::with_capacity(levels);
    for (l, ((&class, &prob), &delta)) in path
        .classes
        .iter()
        .zip(&path.path_prob_prefix)
        .zip(observed)
        .enumerate()
    {
        if prob.is_nan() || prob <= 0.0 {
            return Err(Error::PathProbabilityZero(l + 1));
        }
        if !delta.is_finite() {
            return Err(Error::IncrementOutOfRange {
                class: class.index(),
                value: delta,
                range: tree.range(class),
            });
        }
        entries.push((class, delta / prob));
    }
    Ok(EstimatedIncrements { entries })
}

/// Exact moments of the nested estimator under a fixed strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMoments {
    /// `E[δ̂_C]` per class id (root entry zero).
    pub mean: Vec<f64>,
    /// `E[x_C δ̂_C²]` per class id.
    pub weighted_second_moment: Vec<f64>,
    /// `E[Σ_α x_α ĉ_α²]`.
    pub aggregate: f64,
}

/// Enumerates every root-to-leaf path of the strategy's top-down draw and
/// averages [`niwe`] over them. Requires full support.
pub fn expected_estimator_moments(
    tree: &SimilarityTree,
    strategy: &[f64],
    increments: &IncrementVector,
) -> Result<EstimatorMoments> {
    let n = tree.num_arms();
    if n > MAX_ENUMERATED_ARMS {
        return Err(Error::TooLargeToEnumerate(n));
    }
    if strategy.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: strategy.len(),
        });
    }
    let total: f64 = strategy.iter().sum();
    if strategy.iter().any(|x| !x.is_finite() || *x < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidStrategy);
    }
    if let Some(arm) = strategy.iter().position(|&x| x <= 0.0) {
        return Err(Error::ZeroProbabilityArm(arm));
    }

    let mass: Vec<f64> = tree
        .class_ids()
        .map(|c| tree.arms_in(c).iter().map(|&a| strategy[a]).sum())
        .collect();

    let classes = tree.num_classes();
    let mut mean = vec![0.0; classes];
    let mut second = vec![0.0; classes];
    let mut aggregate = 0.0;
    for arm in 0..n {
        let lineage = tree.lineage_of_arm(arm);
        let mut prefix = Vec::with_capacity(lineage.len());
        let mut running = 1.0;
        let mut parent = ClassId::ROOT;
        for &c in &lineage {
            running *= mass[c.index()] / mass[parent.index()];
            prefix.push(running);
            parent = c;
        }
        let path = SamplePath {
            classes: lineage.clone(),
            arm,
            path_prob_prefix: prefix,
        };
        let est = niwe(tree, &path, &increments.on_path(&lineage))?;
        let weight = strategy[arm];
        for &(c, v) in est.entries() {
            mean[c.index()] += weight * v;
            second[c.index()] += weight * mass[c.index()] * v * v;
        }
        let dense = est.densify(tree);
        let inner: f64 = dense.iter().zip(strategy).map(|(c, x)| x * c * c).sum();
        aggregate += weight * inner;
    }
    Ok(EstimatorMoments {
        mean,
        weighted_second_moment: second,
        aggregate,
    })
}
