//! Online policies behind a choose/feedback protocol.
//!
//! [`NewPolicy`] plays the nested logit choice over the scaled cumulative
//! propensities `η_t Y_t` and updates `Y` with the nested estimator.
//! [`Exp3Policy`] is exponential weights over the flat arm set with the
//! classic importance-weighted estimator. With a single level and equal
//! temperatures the two perform the same floating-point operations in the same
//! order, so they produce identical trajectories from identical randomness.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::RngCore;

use crate::choice::SamplePath;
use crate::choice::{propagate_scores, UncertaintyParams};
use crate::error::{Error, Result};
use crate::estimators::niwe;
use crate::math::{log_sum_exp, sample_log_categorical};
use crate::tree::SimilarityTree;

/// Floor applied to `n_eff` before tuning, so degenerate trees still get a
/// positive temperature.
const MIN_N_EFF: f64 = 1e-12;

/// Learning-rate schedule `η_t`, `t ≥ 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LearningRate {
    /// `η_t = √(ln N / (2t))`.
    #[default]
    TunedAnytime,
    Constant(f64),
    /// `η_t = table[t-1]`; the last entry repeats past the end.
    Table(Vec<f64>),
}

impl LearningRate {
    pub fn at(&self, t: u64, num_arms: usize) -> f64 {
        match self {
            LearningRate::TunedAnytime => tuned_eta(t, num_arms),
            LearningRate::Constant(eta) => *eta,
            LearningRate::Table(table) => {
                let i = (t.max(1) - 1) as usize;
                table[i.min(table.len() - 1)]
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearningRate::TunedAnytime => Ok(()),
            LearningRate::Constant(eta) if eta.is_finite() && *eta > 0.0 => Ok(()),
            LearningRate::Constant(_) => Err(Error::InvalidLearningRate(
                "constant rate must be positive and finite",
            )),
            LearningRate::Table(t) if t.is_empty() => {
                Err(Error::InvalidLearningRate("rate table is empty"))
            }
            LearningRate::Table(t) if t.iter().all(|e| e.is_finite() && *e > 0.0) => Ok(()),
            LearningRate::Table(_) => Err(Error::InvalidLearningRate(
                "rate table entries must be positive and finite",
            )),
        }
    }
}

fn tuned_eta(t: u64, num_arms: usize) -> f64 {
    sqrt(log(num_arms as f64).max(0.0) / (2.0 * t.max(1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    New,
    Exp3,
}

/// Everything needed to instantiate a policy on a tree. Unset temperatures
/// fall back to the tuned values.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// NEW only.
    pub mu: Option<UncertaintyParams>,
    /// EXP3 only.
    pub temperature: Option<f64>,
    pub learning_rate: LearningRate,
}

impl PolicyConfig {
    pub fn tuned(kind: PolicyKind) -> Self {
        Self {
            kind,
            mu: None,
            temperature: None,
            learning_rate: LearningRate::TunedAnytime,
        }
    }

    pub fn build<'a>(&self, tree: &'a SimilarityTree) -> Result<Box<dyn Policy + 'a>> {
        Ok(match self.kind {
            PolicyKind::New => {
                let mu = match &self.mu {
                    Some(mu) => mu.clone(),
                    None => tuned_parameters(tree).uncertainty(tree.num_levels())?,
                };
                Box::new(NewPolicy::new(tree, mu, self.learning_rate.clone())?)
            }
            PolicyKind::Exp3 => {
                let temp = self
                    .temperature
                    .unwrap_or_else(|| exp3_temperature(tree.num_arms()));
                Box::new(Exp3Policy::new(tree, temp, self.learning_rate.clone())?)
            }
        })
    }
}

pub trait Policy {
    fn num_arms(&self) -> usize;

    /// Completed rounds.
    fn rounds(&self) -> u64;

    /// Draw the arm for round `rounds() + 1`.
    fn choose(&mut self, rng: &mut dyn RngCore) -> Result<usize>;

    /// The mixed strategy the last `choose` sampled from.
    fn strategy(&self) -> &[f64];

    /// Report the increments observed along the chosen arm's lineage,
    /// level 1 first.
    fn feedback(&mut self, observed: &[f64]) -> Result<()>;

    /// Cumulative propensities `Y`.
    fn propensities(&self) -> &[f64];

    /// Learning rate used by the last `choose`.
    fn current_rate(&self) -> f64;

    /// Dense per-arm loss estimate from the last feedback.
    fn last_estimate(&self) -> &[f64];
}

/// The nested exponential weights policy.
#[derive(Debug, Clone)]
pub struct NewPolicy<'a> {
    tree: &'a SimilarityTree,
    mu: UncertaintyParams,
    rate: LearningRate,
    y: Vec<f64>,
    rounds: u64,
    eta: f64,
    strategy: Vec<f64>,
    pending: Option<SamplePath>,
    last_estimate: Vec<f64>,
}

impl<'a> NewPolicy<'a> {
    pub fn new(
        tree: &'a SimilarityTree,
        mu: UncertaintyParams,
        rate: LearningRate,
    ) -> Result<Self> {
        mu.check(tree)?;
        rate.validate()?;
        let n = tree.num_arms();
        Ok(Self {
            tree,
            mu,
            rate,
            y: vec![0.0; n],
            rounds: 0,
            eta: 0.0,
            strategy: vec![1.0 / n as f64; n],
            pending: None,
            last_estimate: vec![0.0; n],
        })
    }

    pub fn uncertainty(&self) -> &UncertaintyParams {
        &self.mu
    }

    /// The sample path of the pending choice, if any.
    pub fn pending_path(&self) -> Option<&SamplePath> {
        self.pending.as_ref()
    }
}

impl Policy for NewPolicy<'_> {
    fn num_arms(&self) -> usize {
        self.tree.num_arms()
    }

    fn rounds(&self) -> u64 {
        self.rounds
    }

    fn choose(&mut self, rng: &mut dyn RngCore) -> Result<usize> {
        if self.pending.is_some() {
            return Err(Error::ChoicePending);
        }
        let t = self.rounds + 1;
        self.eta = self.rate.at(t, self.num_arms());
        let scaled: Vec<f64> = self.y.iter().map(|y| self.eta * y).collect();
        let state = propagate_scores(self.tree, &self.mu, &scaled)?;
        self.strategy = state.leaf_distribution(self.tree);
        let path = state.sample_path(self.tree, rng);
        let arm = path.arm;
        self.pending = Some(path);
        Ok(arm)
    }

    fn strategy(&self) -> &[f64] {
        &self.strategy
    }

    fn feedback(&mut self, observed: &[f64]) -> Result<()> {
        let path = self.pending.as_ref().ok_or(Error::StaleFeedback)?;
        let est = niwe(self.tree, path, observed)?;
        self.last_estimate = est.densify(self.tree);
        for (y, c) in self.y.iter_mut().zip(&self.last_estimate) {
            *y -= c;
        }
        self.pending = None;
        self.rounds += 1;
        Ok(())
    }

    fn propensities(&self) -> &[f64] {
        &self.y
    }

    fn current_rate(&self) -> f64 {
        self.eta
    }

    fn last_estimate(&self) -> &[f64] {
        &self.last_estimate
    }
}

/// Exponential weights over the arms with temperature `τ`: the strategy is
/// `softmax(η_t Y / τ)`.
#[derive(Debug, Clone)]
pub struct Exp3Policy {
    temperature: f64,
    rate: LearningRate,
    /// Arms in the order the tree lists its leaves; sampling walks this order.
    order: Vec<usize>,
    y: Vec<f64>,
    rounds: u64,
    eta: f64,
    strategy: Vec<f64>,
    pending: Option<usize>,
    last_estimate: Vec<f64>,
}

impl Exp3Policy {
    pub fn new(tree: &SimilarityTree, temperature: f64, rate: LearningRate) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidUncertainty);
        }
        rate.validate()?;
        let n = tree.num_arms();
        let order = tree
            .classes_at_level(tree.num_levels())
            .iter()
            .filter_map(|&c| tree.arm_of_leaf(c))
            .collect();
        Ok(Self {
            temperature,
            rate,
            order,
            y: vec![0.0; n],
            rounds: 0,
            eta: 0.0,
            strategy: vec![1.0 / n as f64; n],
            pending: None,
            last_estimate: vec![0.0; n],
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

impl Policy for Exp3Policy {
    fn num_arms(&self) -> usize {
        self.y.len()
    }

    fn rounds(&self) -> u64 {
        self.rounds
    }

    fn choose(&mut self, rng: &mut dyn RngCore) -> Result<usize> {
        if self.pending.is_some() {
            return Err(Error::ChoicePending);
        }
        let t = self.rounds + 1;
        self.eta = self.rate.at(t, self.num_arms());
        let z: Vec<f64> = self
            .order
            .iter()
            .map(|&a| (self.eta * self.y[a]) / self.temperature)
            .collect();
        let lse = log_sum_exp(&z);
        let logp: Vec<f64> = z.iter().map(|zi| zi - lse).collect();
        for (&a, lp) in self.order.iter().zip(&logp) {
            self.strategy[a] = exp(0.0 + lp);
        }
        let u: f64 = rand::Rng::random(rng);
        let arm = self.order[sample_log_categorical(logp.iter().copied(), u)];
        self.pending = Some(arm);
        Ok(arm)
    }

    fn strategy(&self) -> &[f64] {
        &self.strategy
    }

    fn feedback(&mut self, observed: &[f64]) -> Result<()> {
        let arm = self.pending.ok_or(Error::StaleFeedback)?;
        let cost = observed.iter().fold(0.0, |acc, d| acc + d);
        let x = self.strategy[arm];
        if x.is_nan() || x <= 0.0 {
            return Err(Error::ZeroProbabilityArm(arm));
        }
        self.last_estimate.iter_mut().for_each(|c| *c = 0.0);
        self.last_estimate[arm] = 0.0 + cost / x;
        for (y, c) in self.y.iter_mut().zip(&self.last_estimate) {
            *y -= c;
        }
        self.pending = None;
        self.rounds += 1;
        Ok(())
    }

    fn propensities(&self) -> &[f64] {
        &self.y
    }

    fn current_rate(&self) -> f64 {
        self.eta
    }

    fn last_estimate(&self) -> &[f64] {
        &self.last_estimate
    }
}

/// Tuned constants for NEW on a given tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedParameters {
    /// Common temperature `√(n_eff / 2)`.
    pub mu: f64,
    pub n_eff: f64,
    pub num_arms: usize,
}

impl TunedParameters {
    pub fn eta(&self, t: u64) -> f64 {
        tuned_eta(t, self.num_arms)
    }

    /// `2√(n_eff ln N T)`.
    pub fn regret_bound(&self, horizon: u64) -> f64 {
        2.0 * sqrt(self.n_eff * log(self.num_arms as f64).max(0.0) * horizon as f64)
    }

    pub fn uncertainty(&self, levels: usize) -> Result<UncertaintyParams> {
        UncertaintyParams::uniform(levels, self.mu)
    }
}

pub fn tuned_parameters(tree: &SimilarityTree) -> TunedParameters {
    let n_eff = tree.constants().n_eff;
    TunedParameters {
        mu: sqrt(n_eff.max(MIN_N_EFF) / 2.0),
        n_eff,
        num_arms: tree.num_arms(),
    }
}

/// `√(N / 2)`: the flat tree's tuned temperature.
pub fn exp3_temperature(num_arms: usize) -> f64 {
    sqrt(num_arms as f64 / 2.0)
}

/// `2√(N ln N T)`.
pub fn exp3_regret_bound(num_arms: usize, horizon: u64) -> f64 {
    let n = num_arms as f64;
    2.0 * sqrt(n * log(n).max(0.0) * horizon as f64)
}
