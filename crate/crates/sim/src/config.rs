//! Experiment configuration (JSON).
//!
//! ```json
//! {
//!   "environment": {"kind": "red_blue_bus", "colors": 2},
//!   "policies": [{"name": "NEW", "kind": "new"}, {"name": "EXP3", "kind": "exp3"}],
//!   "horizon": 1000,
//!   "base_seed": 0, "num_seeds": 20,
//!   "output_dir": "out/red_blue_bus",
//!   "record_every": 10
//! }
//! ```
//!
//! `stochastic` and `scripted` environments need a `tree` (inline, or
//! `{"path": "..."}`); `symmetric` and `red_blue_bus` build their own.
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nested_core::envs::{RedBlueBus, DEFAULT_BANDWIDTH};
use nested_core::{LearningRate, PolicyConfig, PolicyKind, SimilarityTree, UncertaintyParams};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::tree_file::TreeFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeSource>,
    pub environment: EnvironmentConfig,
    pub policies: Vec<PolicyEntry>,
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Compare tuned NEW's seed-averaged regret with its bound.
    #[serde(default)]
    pub bound_check: bool,
}

fn default_record_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeSource {
    File { path: PathBuf },
    Inline(TreeFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    /// Means uniform on `[0, R_C]` per seed, unless given (indexed by class
    /// id in breadth-first order).
    Stochastic {
        #[serde(default = "default_bandwidth")]
        bandwidth: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        means: Option<Vec<f64>>,
    },
    Symmetric {
        levels: usize,
        children: usize,
        #[serde(default = "default_ratio")]
        ratio: f64,
        #[serde(default = "default_bandwidth")]
        bandwidth: f64,
    },
    RedBlueBus {
        #[serde(default = "default_colors")]
        colors: usize,
        #[serde(default = "default_car_mean")]
        car_mean: f64,
        #[serde(default = "default_bus_mean")]
        bus_mean: f64,
        #[serde(default = "default_bandwidth")]
        bandwidth: f64,
    },
    Scripted {
        path: PathBuf,
    },
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH
}
fn default_ratio() -> f64 {
    10.0
}
fn default_colors() -> usize {
    RedBlueBus::default().colors
}
fn default_car_mean() -> f64 {
    RedBlueBus::default().car_mean
}
fn default_bus_mean() -> f64 {
    RedBlueBus::default().bus_mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub name: String,
    pub kind: KindName,
    /// NEW: per-level temperatures; tuned `√(n_eff/2)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    /// EXP3: temperature; `√(N/2)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub learning_rate: RateConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    New,
    Exp3,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConfig {
    #[default]
    TunedAnytime,
    Constant(f64),
    Table(Vec<f64>),
}

impl PolicyEntry {
    pub fn policy_config(&self) -> Result<PolicyConfig> {
        let mu = self
            .mu
            .clone()
            .map(UncertaintyParams::new)
            .transpose()
            .with_context(|| format!("policy {}: invalid mu", self.name))?;
        Ok(PolicyConfig {
            kind: match self.kind {
                KindName::New => PolicyKind::New,
                KindName::Exp3 => PolicyKind::Exp3,
            },
            mu,
            temperature: self.temperature,
            learning_rate: match &self.learning_rate {
                RateConfig::TunedAnytime => LearningRate::TunedAnytime,
                RateConfig::Constant(e) => LearningRate::Constant(*e),
                RateConfig::Table(t) => LearningRate::Table(t.clone()),
            },
        })
    }

    /// Tuned NEW: the configuration the regret bound applies to.
    pub fn is_tuned_new(&self) -> bool {
        self.kind == KindName::New
            && self.mu.is_none()
            && self.learning_rate == RateConfig::TunedAnytime
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(TreeSource::File { path }) = &mut self.tree {
            fix(path);
        }
        if let EnvironmentConfig::Scripted { path } = &mut self.environment {
            fix(path);
        }
        if let Some(out) = &mut self.output_dir {
            fix(out);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        if self.record_every == 0 {
            bail!("record_every must be at least 1");
        }
        if self.seed_list().is_empty() {
            bail!("at least one seed is required");
        }
        if self.policies.is_empty() {
            bail!("at least one policy is required");
        }
        let mut names = BTreeSet::new();
        for p in &self.policies {
            if !names.insert(p.name.as_str()) {
                bail!("duplicate policy name {}", p.name);
            }
            p.policy_config()?;
        }
        match (&self.environment, &self.tree) {
            (EnvironmentConfig::Stochastic { .. } | EnvironmentConfig::Scripted { .. }, None) => {
                bail!("this environment needs a tree")
            }
            (
                EnvironmentConfig::Symmetric { .. } | EnvironmentConfig::RedBlueBus { .. },
                Some(_),
            ) => {
                bail!("this environment builds its own tree; remove `tree`")
            }
            _ => Ok(()),
        }
    }

    /// Explicit `seeds`, else `base_seed, base_seed + 1, …` (`num_seeds`, default 1).
    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.num_seeds.unwrap_or(1) as u64)
                .map(|i| self.base_seed.wrapping_add(i))
                .collect(),
        }
    }

    /// Replace the seed set by `n` consecutive seeds from the first one.
    pub fn override_num_seeds(&mut self, n: usize) {
        let base = self
            .seeds
            .as_ref()
            .and_then(|s| s.first().copied())
            .unwrap_or(self.base_seed);
        self.seeds = None;
        self.base_seed = base;
        self.num_seeds = Some(n);
    }

    pub fn tree_file(&self) -> Result<Option<TreeFile>> {
        match &self.tree {
            None => Ok(None),
            Some(TreeSource::Inline(t)) => Ok(Some(t.clone())),
            Some(TreeSource::File { path }) => TreeFile::load(path).map(Some),
        }
    }

    /// The tree the experiment runs on (generated environments included).
    pub fn structure(&self) -> Result<SimilarityTree> {
        match &self.environment {
            EnvironmentConfig::Symmetric {
                levels,
                children,
                ratio,
                bandwidth,
            } => {
                // Means are irrelevant here; only the shape is kept.
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
                let (tree, _) = nested_core::envs::make_symmetric_env(
                    *levels, *children, *ratio, *bandwidth, &mut rng,
                )?;
                Ok(tree)
            }
            EnvironmentConfig::RedBlueBus {
                colors,
                car_mean,
                bus_mean,
                bandwidth,
            } => Ok(RedBlueBus {
                colors: *colors,
                car_mean: *car_mean,
                bus_mean: *bus_mean,
                bandwidth: *bandwidth,
            }
            .tree()?),
            _ => match self.tree_file()? {
                Some(f) => f.build(),
                None => bail!("this environment needs a tree"),
            },
        }
    }
}
