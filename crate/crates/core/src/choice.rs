//! The nested logit choice rule.
//!
//! Leaf propensity scores are propagated up the tree: a class's score is the
//! temperature-weighted log-sum-exp of its children's scores, using the
//! temperature `μ_l` of the children's level. The choice then walks down from
//! the root, picking a child of the current class with probability
//! `exp((y_child - y_parent) / μ_l)`.
//!
//! All probabilities are kept as log-conditionals; products along a lineage
//! are sums of logs, exponentiated once.

use alloc::vec;
use alloc::vec::Vec;

use libm::exp;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, sample_log_categorical};
use crate::tree::{ClassId, SimilarityTree};

/// Per-level temperatures `μ_1 ≥ … ≥ μ_L > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyParams {
    mu: Vec<f64>,
}

impl UncertaintyParams {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || mu.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(Error::InvalidUncertainty);
        }
        if mu.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidUncertainty);
        }
        Ok(Self { mu })
    }

    /// The same temperature at every level.
    pub fn uniform(levels: usize, mu: f64) -> Result<Self> {
        Self::new(vec![mu; levels])
    }

    pub fn num_levels(&self) -> usize {
        self.mu.len()
    }

    /// Temperature of level `level`, for `level` in `1..=L`.
    pub fn at_level(&self, level: usize) -> f64 {
        self.mu[level - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }

    pub(crate) fn check(&self, tree: &SimilarityTree) -> Result<()> {
        if self.mu.len() != tree.num_levels() {
            return Err(Error::LevelMismatch {
                expected: tree.num_levels(),
                got: self.mu.len(),
            });
        }
        Ok(())
    }
}

/// Propagated scores of every class, plus the log-conditional choice
/// probability of each class given its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreState {
    scores: Vec<f64>,
    log_cond: Vec<f64>,
}

/// A top-down draw: one class per level, and the running path
/// probabilities actually used to draw it.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    /// Classes at levels `1..=L`.
    pub classes: Vec<ClassId>,
    pub arm: usize,
    /// `path_prob_prefix[l-1]` is the probability of the first `l` draws.
    pub path_prob_prefix: Vec<f64>,
}

/// Backward score propagation from the leaf profile `leaf_scores` (indexed by
/// arm).
pub fn propagate_scores(
    tree: &SimilarityTree,
    mu: &UncertaintyParams,
    leaf_scores: &[f64],
) -> Result<ScoreState> {
    mu.check(tree)?;
    if leaf_scores.len() != tree.num_arms() {
        return Err(Error::DimensionMismatch {
            expected: tree.num_arms(),
            got: leaf_scores.len(),
        });
    }
    let n = tree.num_classes();
    let mut scores = vec![0.0; n];
    let mut log_cond = vec![0.0; n];
    for (arm, &y) in leaf_scores.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::NonFiniteScore(arm));
        }
        scores[tree.leaf_of_arm(arm).index()] = y;
    }

    let mut z = Vec::new();
    for level in (0..tree.num_levels()).rev() {
        let temp = mu.at_level(level + 1);
        for &class in tree.classes_at_level(level) {
            let kids = tree.children(class);
            z.clear();
            z.extend(kids.iter().map(|c| scores[c.index()] / temp));
            let lse = log_sum_exp(&z);
            scores[class.index()] = temp * lse;
            for (c, zc) in kids.iter().zip(&z) {
                log_cond[c.index()] = zc - lse;
            }
        }
    }
    Ok(ScoreState { scores, log_cond })
}

impl ScoreState {
    pub fn root_score(&self) -> f64 {
        self.scores[ClassId::ROOT.index()]
    }

    pub fn class_score(&self, class: ClassId) -> f64 {
        self.scores[class.index()]
    }

    pub fn log_conditional_prob(&self, tree: &SimilarityTree, child: ClassId) -> Result<f64> {
        if !tree.contains(child) {
            return Err(Error::UnknownClass(child));
        }
        if tree.parent(child).is_none() {
            return Err(Error::RootHasNoParent);
        }
        Ok(self.log_cond[child.index()])
    }

    /// Probability of choosing `child` once its parent has been chosen.
    pub fn conditional_prob(&self, tree: &SimilarityTree, child: ClassId) -> Result<f64> {
        self.log_conditional_prob(tree, child).map(exp)
    }

    pub fn log_total_prob(&self, tree: &SimilarityTree, class: ClassId) -> Result<f64> {
        let lineage = tree.lineage(class)?;
        if lineage.is_empty() {
            return Err(Error::RootHasNoParent);
        }
        Ok(lineage
            .iter()
            .fold(0.0, |acc, c| acc + self.log_cond[c.index()]))
    }

    /// Probability that the top-down draw passes through `class`.
    pub fn total_prob(&self, tree: &SimilarityTree, class: ClassId) -> Result<f64> {
        self.log_total_prob(tree, class).map(exp)
    }

    /// Total probability of every class (root = 1), indexed by class id.
    pub fn class_probabilities(&self, tree: &SimilarityTree) -> Vec<f64> {
        let mut log_tot = vec![0.0; tree.num_classes()];
        for class in tree.class_ids().skip(1) {
            let parent = tree.parent(class).unwrap_or(ClassId::ROOT);
            log_tot[class.index()] = log_tot[parent.index()] + self.log_cond[class.index()];
        }
        let mut out: Vec<f64> = log_tot.into_iter().map(exp).collect();
        out[ClassId::ROOT.index()] = 1.0;
        out
    }

    /// The induced mixed strategy over arms.
    pub fn leaf_distribution(&self, tree: &SimilarityTree) -> Vec<f64> {
        let probs = self.class_probabilities(tree);
        (0..tree.num_arms())
            .map(|arm| probs[tree.leaf_of_arm(arm).index()])
            .collect()
    }

    /// Draw one class per level, top-down, consuming exactly one uniform per
    /// level (inverse CDF over the children in order).
    pub fn sample_path<R: Rng + ?Sized>(&self, tree: &SimilarityTree, rng: &mut R) -> SamplePath {
        let levels = tree.num_levels();
        let mut classes = Vec::with_capacity(levels);
        let mut prefix = Vec::with_capacity(levels);
        let mut cur = ClassId::ROOT;
        let mut acc = 0.0;
        for _ in 0..levels {
            let u: f64 = rng.random();
            let kids = tree.children(cur);
            let pick = sample_log_categorical(kids.iter().map(|c| self.log_cond[c.index()]), u);
            cur = kids[pick];
            acc += self.log_cond[cur.index()];
            classes.push(cur);
            prefix.push(exp(acc));
        }
        SamplePath {
            classes,
            arm: tree.arm_of_leaf(cur).unwrap_or(0),
            path_prob_prefix: prefix,
        }
    }
}
