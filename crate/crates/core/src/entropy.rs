//! Nested entropy and its convex-analytic companions.
//!
//! The nested entropy `h` is the regularizer whose mirror map is the nested
//! logit choice rule, and whose convex conjugate `h*` is the root score. The
//! functions here evaluate `h`, the conjugate, the Fenchel coupling, the
//! nested power sum and the one-step template inequality, each through code
//! paths independent of score propagation where possible, so the identities
//! tying them together can be checked numerically.
//!
//! Vectors over arms (`x`, `y`, `c`) are indexed by arm; class-level
//! quantities by class id.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, pow};
use rand::Rng;

use crate::choice::{propagate_scores, UncertaintyParams};
use crate::error::{Error, Result};
use crate::estimators::IncrementVector;
use crate::math::{log_sum_exp, xlogx};
use crate::tree::{ClassId, SimilarityTree};

/// Tolerance on `Σ x = 1` accepted by [`StrategyVector::new`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Per-level weights `θ_l = μ_l - μ_{l+1}`, with `μ_{L+1} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyWeights {
    theta: Vec<f64>,
}

impl EntropyWeights {
    pub fn new(mu: &UncertaintyParams) -> Self {
        let m = mu.as_slice();
        let theta = (0..m.len())
            .map(|i| m[i] - m.get(i + 1).copied().unwrap_or(0.0))
            .collect();
        Self { theta }
    }

    /// `θ_level`, for `level` in `1..=L`.
    pub fn at_level(&self, level: usize) -> f64 {
        self.theta[level - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }
}

/// A point of the simplex over arms, with its induced class masses.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyVector {
    x: Vec<f64>,
    masses: Vec<f64>,
}

impl StrategyVector {
    pub fn new(tree: &SimilarityTree, x: Vec<f64>) -> Result<Self> {
        if x.len() != tree.num_arms() {
            return Err(Error::DimensionMismatch {
                expected: tree.num_arms(),
                got: x.len(),
            });
        }
        let total: f64 = x.iter().sum();
        if x.iter().any(|v| !v.is_finite() || *v < 0.0) || (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidStrategy);
        }
        let masses = class_masses(tree, &x);
        Ok(Self { x, masses })
    }

    /// A uniformly random point of the simplex.
    pub fn random<R: Rng + ?Sized>(tree: &SimilarityTree, rng: &mut R) -> Self {
        let mut x: Vec<f64> = (0..tree.num_arms())
            .map(|_| -log(1.0 - rng.random::<f64>()))
            .collect();
        let total: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total);
        let masses = class_masses(tree, &x);
        Self { x, masses }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    /// `x_C = Σ_{α ∈ C} x_α`.
    pub fn mass(&self, class: ClassId) -> f64 {
        self.masses[class.index()]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// Class masses of an arm vector, indexed by class id.
pub fn class_masses(tree: &SimilarityTree, x: &[f64]) -> Vec<f64> {
    tree.class_ids()
        .map(|c| tree.arms_in(c).iter().map(|&a| x[a]).sum())
        .collect()
}

fn subtree(tree: &SimilarityTree, class: ClassId) -> Vec<ClassId> {
    let mut out = vec![class];
    let mut i = 0;
    while i < out.len() {
        out.extend_from_slice(tree.children(out[i]));
        i += 1;
    }
    out
}

/// `h_C(x) = Σ_{l ≥ level(C)} θ_l Σ_{C' ⊆ C at level l} x_{C'} log x_{C'}`;
/// the root (`at = None`) gives the full nested entropy `h(x)`.
pub fn nested_entropy(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    x: &StrategyVector,
    at: Option<ClassId>,
) -> Result<f64> {
    mu.check(tree)?;
    let root = at.unwrap_or(ClassId::ROOT);
    if !tree.contains(root) {
        return Err(Error::UnknownClass(root));
    }
    let theta = EntropyWeights::new(mu);
    Ok(subtree(tree, root)
        .into_iter()
        .filter(|&c| tree.level(c) > 0)
        .map(|c| theta.at_level(tree.level(c)) * xlogx(x.mass(c)))
        .sum())
}

/// `h(x | C) = μ_{l+1} Σ_{C' child of C} x_{C'} log(x_{C'} / x_C)`; zero for
/// leaves and for classes of zero mass.
pub fn conditional_entropy(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    x: &StrategyVector,
    class: ClassId,
) -> Result<f64> {
    mu.check(tree)?;
    if !tree.contains(class) {
        return Err(Error::UnknownClass(class));
    }
    let xc = x.mass(class);
    if tree.is_leaf(class) || xc <= 0.0 {
        return Ok(0.0);
    }
    let temp = mu.at_level(tree.level(class) + 1);
    let sum: f64 = tree
        .children(class)
        .iter()
        .map(|&c| {
            let xk = x.mass(c);
            if xk > 0.0 {
                xk * log(xk / xc)
            } else {
                0.0
            }
        })
        .sum();
    Ok(temp * sum)
}

/// `|h_C(x) - Σ_{C' ⪰ C} h(x | C') - μ_l x_C log x_C|`, with the last term
/// absent at the root.
pub fn decomposition_residual(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    x: &StrategyVector,
    class: ClassId,
) -> Result<f64> {
    let lhs = nested_entropy(tree, mu, x, Some(class))?;
    let mut rhs = 0.0;
    for c in subtree(tree, class) {
        rhs += conditional_entropy(tree, mu, x, c)?;
    }
    let level = tree.level(class);
    if level > 0 {
        rhs += mu.at_level(level) * xlogx(x.mass(class));
    }
    Ok((lhs - rhs).abs())
}

/// `h*(y)`, the root score of `y`.
pub fn conjugate(tree: &SimilarityTree, mu: &UncertaintyParams, y: &[f64]) -> Result<f64> {
    Ok(propagate_scores(tree, mu, y)?.root_score())
}

/// The nested logit strategy `Λ(y)`.
pub fn choice_map(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    y: &[f64],
) -> Result<StrategyVector> {
    let x = propagate_scores(tree, mu, y)?.leaf_distribution(tree);
    let masses = class_masses(tree, &x);
    Ok(StrategyVector { x, masses })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateReport {
    /// `|y_root - (⟨y, Λ(y)⟩ - h(Λ(y)))|`.
    pub value_residual: f64,
    /// Largest `⟨y, x⟩ - h(x) - y_root` over the random draws; should not be
    /// positive.
    pub max_excess: f64,
    /// Largest relative residual of the per-class recursion
    /// `exp(h*_C / μ_{l+1}) = Σ_{C'} exp(h*_{C'} / μ_{l+1})`.
    pub recursion_residual: f64,
}

/// Checks that the root score is the conjugate of the nested entropy: it is
/// attained at `Λ(y)`, dominates `draws` random strategies, and satisfies the
/// class-by-class recursion with `h*_C` computed from the entropy directly.
pub fn conjugate_checks<R: Rng + ?Sized>(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    y: &[f64],
    draws: usize,
    rng: &mut R,
) -> Result<ConjugateReport> {
    let state = propagate_scores(tree, mu, y)?;
    let root = state.root_score();
    let lambda = choice_map(tree, mu, y)?;
    let value_residual =
        (root - (dot(y, lambda.as_slice()) - nested_entropy(tree, mu, &lambda, None)?)).abs();

    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..draws {
        let x = StrategyVector::random(tree, rng);
        let v = dot(y, x.as_slice()) - nested_entropy(tree, mu, &x, None)?;
        max_excess = max_excess.max(v - root);
    }

    let probs = state.class_probabilities(tree);
    let mut restricted = vec![0.0; tree.num_classes()];
    for c in tree.class_ids() {
        let pc = probs[c.index()];
        let mut x = vec![0.0; tree.num_arms()];
        for &a in tree.arms_in(c) {
            x[a] = probs[tree.leaf_of_arm(a).index()] / pc;
        }
        let xc = StrategyVector {
            masses: class_masses(tree, &x),
            x,
        };
        restricted[c.index()] = dot(y, xc.as_slice()) - nested_entropy(tree, mu, &xc, Some(c))?;
    }
    let mut recursion_residual: f64 = 0.0;
    for c in tree.class_ids().filter(|&c| !tree.is_leaf(c)) {
        let temp = mu.at_level(tree.level(c) + 1);
        let z: Vec<f64> = tree
            .children(c)
            .iter()
            .map(|k| restricted[k.index()] / temp)
            .collect();
        let lhs = restricted[c.index()] / temp;
        recursion_residual = recursion_residual.max((exp(lhs - log_sum_exp(&z)) - 1.0).abs());
    }

    Ok(ConjugateReport {
        value_residual,
        max_excess: if draws == 0 { 0.0 } else { max_excess },
        recursion_residual,
    })
}

/// `H = h*(0)`, the range of the nested entropy.
pub fn hrange(tree: &SimilarityTree, mu: &UncertaintyParams) -> Result<f64> {
    conjugate(tree, mu, &vec![0.0; tree.num_arms()])
}

/// `Σ_l μ_l log K_l`, where `K_l` is the largest number of children of a
/// class at level `l - 1`.
pub fn hrange_upper_bound(tree: &SimilarityTree, mu: &UncertaintyParams) -> Result<f64> {
    mu.check(tree)?;
    Ok((1..=tree.num_levels())
        .map(|l| {
            let k = tree
                .classes_at_level(l - 1)
                .iter()
                .map(|&c| tree.children(c).len())
                .max()
                .unwrap_or(1);
            mu.at_level(l) * log(k as f64)
        })
        .sum())
}

/// `min h = -H`.
pub fn min_entropy(tree: &SimilarityTree, mu: &UncertaintyParams) -> Result<f64> {
    hrange(tree, mu).map(|h| -h)
}

/// `F(p, y) = h(p) + h*(y) - ⟨y, p⟩`.
pub fn fenchel_coupling(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    p: &StrategyVector,
    y: &[f64],
) -> Result<f64> {
    Ok(nested_entropy(tree, mu, p, None)? + conjugate(tree, mu, y)? - dot(y, p.as_slice()))
}

/// The nested power sum `σ_{c,y}` of every class, indexed by class id.
///
/// Leaves hold `exp(-c_α / μ_L)`. A class at level `l` averages its
/// children's values under `Λ(· | C)`, raising each to `μ_{l+2} / μ_{l+1}`
/// unless the children are leaves.
pub fn nested_power_sums(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    y: &[f64],
    c: &[f64],
) -> Result<Vec<f64>> {
    if c.len() != tree.num_arms() {
        return Err(Error::DimensionMismatch {
            expected: tree.num_arms(),
            got: c.len(),
        });
    }
    let state = propagate_scores(tree, mu, y)?;
    let levels = tree.num_levels();
    let mut sigma = vec![0.0; tree.num_classes()];
    for (arm, &ca) in c.iter().enumerate() {
        sigma[tree.leaf_of_arm(arm).index()] = exp(-ca / mu.at_level(levels));
    }
    for level in (0..levels).rev() {
        let power = if level + 1 == levels {
            1.0
        } else {
            mu.at_level(level + 2) / mu.at_level(level + 1)
        };
        for &class in tree.classes_at_level(level) {
            sigma[class.index()] = tree
                .children(class)
                .iter()
                .map(|&k| {
                    state.conditional_prob(tree, k).unwrap_or(0.0) * pow(sigma[k.index()], power)
                })
                .sum();
        }
    }
    Ok(sigma)
}

/// `σ_{c,y}(C)` for a single class.
pub fn nested_power_sum(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    y: &[f64],
    c: &[f64],
    at: ClassId,
) -> Result<f64> {
    if !tree.contains(at) {
        return Err(Error::UnknownClass(at));
    }
    Ok(nested_power_sums(tree, mu, y, c)?[at.index()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementReport {
    /// `|h*(y - c) - h*(y) - μ_1 log σ(root)|`.
    pub identity_residual: f64,
    /// `-⟨Λ(y), c⟩ + Σ_α Λ_α c_α² / (2 μ_L) - (h*(y - c) - h*(y))`; the bound
    /// holds when this is nonnegative.
    pub bound_slack: f64,
}

/// Power-sum identity and second-order upper bound for the increment of the
/// conjugate along `-c`, `c ≥ 0`.
pub fn increment_machinery(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    y: &[f64],
    c: &[f64],
) -> Result<IncrementReport> {
    let shifted: Vec<f64> = y.iter().zip(c).map(|(a, b)| a - b).collect();
    let before = conjugate(tree, mu, y)?;
    let after = conjugate(tree, mu, &shifted)?;
    let sigma = nested_power_sum(tree, mu, y, c, ClassId::ROOT)?;
    let identity_residual = (after - before - mu.at_level(1) * log(sigma)).abs();

    let lambda = choice_map(tree, mu, y)?;
    let mu_l = mu.at_level(tree.num_levels());
    let quad: f64 = lambda
        .as_slice()
        .iter()
        .zip(c)
        .map(|(x, ca)| x * ca * ca)
        .sum();
    let bound = -dot(lambda.as_slice(), c) + quad / (2.0 * mu_l);
    Ok(IncrementReport {
        identity_residual,
        bound_slack: bound - (after - before),
    })
}

/// `|⟨Λ(y), c⟩ - Σ_C Λ_C(y) δ_C|` where `c` is the leaf cost of `increments`.
pub fn class_cost_residual(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    y: &[f64],
    increments: &IncrementVector,
) -> Result<f64> {
    let lambda = choice_map(tree, mu, y)?;
    let leaf = dot(lambda.as_slice(), &increments.leaf_costs(tree));
    let class = increments.weighted_sum(lambda.masses());
    Ok((leaf - class).abs())
}

/// One step of a recorded NEW trajectory: the propensities before and after
/// the update, the rates used at `t` and `t + 1`, and the estimate applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateStep<'a> {
    pub eta: f64,
    pub eta_next: f64,
    pub y: &'a [f64],
    pub y_next: &'a [f64],
    pub estimate: &'a [f64],
}

/// `RHS - LHS` of the per-step template inequality against comparator `p`:
///
/// `⟨ĉ, x_t - p⟩ ≤ E_t - E_{t+1} + (1/η_{t+1} - 1/η_t)(h(p) - min h)
///                + F(x_t, η_t Y_{t+1}) / η_t`,
///
/// with `E_t = F(p, η_t Y_t) / η_t` and `x_t = Λ(η_t Y_t)`. Requires
/// `η_{t+1} ≤ η_t`.
pub fn template_residual(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    p: &StrategyVector,
    step: &TemplateStep<'_>,
) -> Result<f64> {
    let scale = |eta: f64, v: &[f64]| -> Vec<f64> { v.iter().map(|y| eta * y).collect() };
    let (eta, eta_next) = (step.eta, step.eta_next);
    let x_t = choice_map(tree, mu, &scale(eta, step.y))?;
    let e_t = fenchel_coupling(tree, mu, p, &scale(eta, step.y))? / eta;
    let e_next = fenchel_coupling(tree, mu, p, &scale(eta_next, step.y_next))? / eta_next;
    let gap = nested_entropy(tree, mu, p, None)? - min_entropy(tree, mu)?;
    let coupling = fenchel_coupling(tree, mu, &x_t, &scale(eta, step.y_next))? / eta;
    let rhs = e_t - e_next + (1.0 / eta_next - 1.0 / eta) * gap + coupling;
    let lhs = dot(step.estimate, x_t.as_slice()) - dot(step.estimate, p.as_slice());
    Ok(rhs - lhs)
}
