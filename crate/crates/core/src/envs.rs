//! Loss-generating environments.
//!
//! Each round an environment emits one increment per class. Stochastic
//! environments draw exactly one uniform per non-root class, in class-id
//! order, so a seed fully determines the sequence.

use alloc::vec;
use alloc::vec::Vec;

use libm::pow;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::estimators::IncrementVector;
use crate::tree::{ClassId, NodeSpec, RangeConvention, SimilarityTree, TreeSpec, RANGE_TOLERANCE};

pub use crate::estimators::leaf_costs;

pub const DEFAULT_BANDWIDTH: f64 = 0.25;

pub trait Environment {
    /// Increments for round `t` (1-based).
    fn step(&mut self, t: u64, rng: &mut dyn RngCore) -> Result<IncrementVector>;

    /// Stationary per-class means, when the environment has them.
    fn mean_increments(&self) -> Option<&IncrementVector>;
}

/// Independent uniform increments around fixed per-class means.
///
/// Class `C` with mean `m` and range `R` draws from `[m - w, m + w]` with
/// `w = min(β R, m, R - m)`: the bandwidth `β R` shrunk just enough to stay
/// inside `[0, R]`, which keeps the mean exactly `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticTreeEnv {
    means: IncrementVector,
    ranges: Vec<f64>,
    half_width: Vec<f64>,
}

impl StochasticTreeEnv {
    /// Means drawn uniformly on `[0, R_C]`, in class-id order.
    pub fn new<R: Rng + ?Sized>(
        tree: &SimilarityTree,
        bandwidth: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let means = tree
            .class_ids()
            .map(|c| {
                if c == ClassId::ROOT {
                    0.0
                } else {
                    tree.range(c) * rng.random::<f64>()
                }
            })
            .collect();
        Self::with_means(tree, means, bandwidth)
    }

    pub fn with_means(tree: &SimilarityTree, means: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&bandwidth) {
            return Err(Error::InvalidEnvironment("bandwidth must lie in [0, 1]"));
        }
        let means = IncrementVector::new(tree, means)?;
        let ranges: Vec<f64> = tree.class_ids().map(|c| tree.range(c)).collect();
        let half_width = means
            .as_slice()
            .iter()
            .zip(&ranges)
            .map(|(&m, &r)| (bandwidth * r).min(m).min(r - m).max(0.0))
            .collect();
        Ok(Self {
            means,
            ranges,
            half_width,
        })
    }

    pub fn means(&self) -> &IncrementVector {
        &self.means
    }

    pub fn mean_leaf_costs(&self, tree: &SimilarityTree) -> Vec<f64> {
        self.means.leaf_costs(tree)
    }

    /// Arm with the smallest mean cost; ties go to the lowest index.
    pub fn best_arm(&self, tree: &SimilarityTree) -> usize {
        let costs = self.mean_leaf_costs(tree);
        let mut best = 0;
        for (arm, &c) in costs.iter().enumerate() {
            if c < costs[best] {
                best = arm;
            }
        }
        best
    }
}

impl Environment for StochasticTreeEnv {
    fn step(&mut self, _t: u64, rng: &mut dyn RngCore) -> Result<IncrementVector> {
        let mut delta = vec![0.0; self.ranges.len()];
        let means = self.means.as_slice();
        for (i, d) in delta.iter_mut().enumerate().skip(1) {
            let u: f64 = rng.random();
            let w = self.half_width[i];
            *d = (means[i] - w + 2.0 * w * u).clamp(0.0, self.ranges[i]);
        }
        Ok(IncrementVector::from_raw(delta))
    }

    fn mean_increments(&self) -> Option<&IncrementVector> {
        Some(&self.means)
    }
}

/// The bus/car commuting example: level 1 is `[bus, car]`, the bus has
/// `colors` children, the car a single child. Colors carry no cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedBlueBus {
    pub colors: usize,
    pub car_mean: f64,
    pub bus_mean: f64,
    pub bandwidth: f64,
}

impl Default for RedBlueBus {
    fn default() -> Self {
        Self {
            colors: 2,
            car_mean: 0.3,
            bus_mean: 0.6,
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }
}

impl RedBlueBus {
    /// Arms `0..colors` are the buses, arm `colors` is the car.
    pub fn tree(&self) -> Result<SimilarityTree> {
        if self.colors < 2 {
            return Err(Error::InvalidEnvironment("need at least two bus colors"));
        }
        let node = |id, level, parent, range| NodeSpec {
            id,
            level,
            parent,
            range,
        };
        let (bus, car) = (1, 2);
        let mut nodes = vec![
            node(0, 0, None, 0.0),
            node(bus, 1, Some(0), 1.0),
            node(car, 1, Some(0), 1.0),
        ];
        for k in 0..self.colors {
            nodes.push(node(3 + k, 2, Some(bus), 0.0));
        }
        nodes.push(node(3 + self.colors, 2, Some(car), 0.0));
        SimilarityTree::build(&TreeSpec::Explicit {
            levels: 2,
            nodes,
            arms: None,
            convention: RangeConvention::PerClass,
        })
    }

    pub fn build(&self) -> Result<(SimilarityTree, StochasticTreeEnv)> {
        let tree = self.tree()?;
        let mut means = vec![0.0; tree.num_classes()];
        let level1 = tree.classes_at_level(1);
        means[level1[0].index()] = self.bus_mean;
        means[level1[1].index()] = self.car_mean;
        let env = StochasticTreeEnv::with_means(&tree, means, self.bandwidth)?;
        Ok((tree, env))
    }
}

/// Replays a fixed increment table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedEnv {
    rows: Vec<IncrementVector>,
}

impl ScriptedEnv {
    pub fn new(rows: Vec<IncrementVector>) -> Self {
        Self { rows }
    }

    /// Builds a `horizon`-round table from sparse `(t, class, delta)`
    /// entries; anything unspecified is zero. Later duplicates win.
    pub fn from_entries(
        tree: &SimilarityTree,
        horizon: u64,
        entries: &[(u64, usize, f64)],
    ) -> Result<Self> {
        let mut table = vec![vec![0.0; tree.num_classes()]; horizon as usize];
        for &(t, class, value) in entries {
            if t == 0 || t > horizon {
                return Err(Error::ScriptExhausted(t));
            }
            if class >= tree.num_classes() {
                return Err(Error::UnknownClass(ClassId(class)));
            }
            let range = tree.range(ClassId(class));
            if !(value >= 0.0 && value <= range + RANGE_TOLERANCE) {
                return Err(Error::RangeViolationInScript {
                    round: t,
                    class,
                    value,
                });
            }
            table[t as usize - 1][class] = value;
        }
        let rows = table
            .into_iter()
            .map(|row| IncrementVector::new(tree, row))
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn horizon(&self) -> u64 {
        self.rows.len() as u64
    }
}

impl Environment for ScriptedEnv {
    fn step(&mut self, t: u64, _rng: &mut dyn RngCore) -> Result<IncrementVector> {
        if t == 0 {
            return Err(Error::ScriptExhausted(t));
        }
        self.rows
            .get(t as usize - 1)
            .cloned()
            .ok_or(Error::ScriptExhausted(t))
    }

    fn mean_increments(&self) -> Option<&IncrementVector> {
        None
    }
}

/// `M`-ary tree of depth `L` whose per-level ranges decay geometrically by
/// `ratio` and sum to one along every path; means are then drawn as in
/// [`StochasticTreeEnv::new`].
pub fn make_symmetric_env<R: Rng + ?Sized>(
    levels: usize,
    children: usize,
    ratio: f64,
    bandwidth: f64,
    rng: &mut R,
) -> Result<(SimilarityTree, StochasticTreeEnv)> {
    if levels == 0 {
        return Err(Error::InvalidEnvironment("need at least one level"));
    }
    if children < 2 {
        return Err(Error::InvalidEnvironment(
            "need at least two children per class",
        ));
    }
    if !(ratio.is_finite() && ratio > 1.0) {
        return Err(Error::InvalidEnvironment("range decay ratio must exceed 1"));
    }
    let raw: Vec<f64> = (0..levels).map(|l| pow(ratio, -(l as f64))).collect();
    let total: f64 = raw.iter().sum();
    let ranges: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let tree = SimilarityTree::symmetric(&vec![children; levels], &ranges)?;
    let env = StochasticTreeEnv::new(&tree, bandwidth, rng)?;
    Ok((tree, env))
}
