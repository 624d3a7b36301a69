//! Seeded multi-run execution and regret accounting.
//!
//! Every (policy, seed) pair is an isolated run with two random streams: one
//! for the environment and one for the policy. Both derive from the seed
//! alone, so every policy faces the same increment sequence for a given seed,
//! and the whole experiment is a pure function of its configuration.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{Context, Result};
use nested_core::envs::{make_symmetric_env, Environment, RedBlueBus, StochasticTreeEnv};
use nested_core::policies::tuned_parameters;
use nested_core::{IncrementVector, SimilarityTree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EnvironmentConfig, ExperimentConfig};
use crate::script::load_script;
use crate::stats::{summarize_values, Summary};

const ENV_STREAM: u64 = 0x656e_7669_726f_6e00;
const POLICY_STREAM: u64 = 0x706f_6c69_6379_0000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `splitmix64(seed ^ splitmix64(tag))`.
pub fn stream_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

pub fn env_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, ENV_STREAM))
}

pub fn policy_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, POLICY_STREAM))
}

/// One row of `trajectories.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub run_id: usize,
    pub policy: String,
    pub seed: u64,
    pub t: u64,
    pub regret_expected: f64,
    pub regret_realized: f64,
    pub avg_reward: f64,
    pub arm: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: usize,
    pub policy: String,
    pub seed: u64,
    pub final_regret_expected: f64,
    pub final_regret_realized: f64,
    pub final_avg_reward: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<TrajectoryRow>,
    pub summary: RunSummary,
}

/// Seed-averaged regret of tuned NEW against `2√(n_eff ln N t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub policy: String,
    pub bound_at_horizon: f64,
    pub mean_at_horizon: f64,
    pub stderr_at_horizon: f64,
    /// Recorded rounds where the mean exceeded the bound.
    pub violations: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub summary: BTreeMap<String, PolicySummary>,
    pub bound_checks: Vec<BoundCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub final_regret: Summary,
}

/// Environment for one seed, with the tree it runs on.
pub fn build_environment(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(SimilarityTree, Box<dyn Environment + Send>, ChaCha8Rng)> {
    let mut rng = env_rng(seed);
    let (tree, env): (SimilarityTree, Box<dyn Environment + Send>) = match &cfg.environment {
        EnvironmentConfig::Stochastic { bandwidth, means } => {
            let tree = cfg.structure()?;
            let env = match means {
                Some(m) => StochasticTreeEnv::with_means(&tree, m.clone(), *bandwidth)?,
                None => StochasticTreeEnv::new(&tree, *bandwidth, &mut rng)?,
            };
            (tree, Box::new(env))
        }
        EnvironmentConfig::Symmetric {
            levels,
            children,
            ratio,
            bandwidth,
        } => {
            let (tree, env) = make_symmetric_env(*levels, *children, *ratio, *bandwidth, &mut rng)?;
            (tree, Box::new(env))
        }
        EnvironmentConfig::RedBlueBus {
            colors,
            car_mean,
            bus_mean,
            bandwidth,
        } => {
            let (tree, env) = RedBlueBus {
                colors: *colors,
                car_mean: *car_mean,
                bus_mean: *bus_mean,
                bandwidth: *bandwidth,
            }
            .build()?;
            (tree, Box::new(env))
        }
        EnvironmentConfig::Scripted { path } => {
            let tree = cfg.structure()?;
            let env = load_script(path, &tree, cfg.horizon)?;
            (tree, Box::new(env))
        }
    };
    Ok((tree, env, rng))
}

/// Runs policy `policy_index` of `cfg` on `seed`.
pub fn run_single(
    cfg: &ExperimentConfig,
    policy_index: usize,
    seed: u64,
    run_id: usize,
) -> Result<RunRecord> {
    let entry = &cfg.policies[policy_index];
    let (tree, mut env, mut env_rng) = build_environment(cfg, seed)?;
    let mut policy = entry
        .policy_config()?
        .build(&tree)
        .with_context(|| format!("building policy {}", entry.name))?;
    let mut policy_rng = policy_rng(seed);

    let mean_costs = env.mean_increments().map(|m| m.leaf_costs(&tree));
    let best_mean = mean_costs
        .as_ref()
        .map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min));

    let started = Instant::now();
    let n = tree.num_arms();
    let mut cumulative = vec![0.0; n];
    let mut incurred_expected = 0.0;
    let mut chosen_total = 0.0;
    let mut regret_expected = 0.0;
    let mut regret_realized = 0.0;
    let mut avg_reward = 1.0;
    let mut rows = Vec::with_capacity((cfg.horizon / cfg.record_every + 1) as usize);

    for t in 1..=cfg.horizon {
        let inc: IncrementVector = env.step(t, &mut env_rng)?;
        let arm = policy.choose(&mut policy_rng)?;
        let x = policy.strategy();
        let costs = inc.leaf_costs(&tree);

        incurred_expected += dot(x, &costs);
        chosen_total += costs[arm];
        for (acc, c) in cumulative.iter_mut().zip(&costs) {
            *acc += c;
        }
        let best_realized = cumulative.iter().cloned().fold(f64::INFINITY, f64::min);
        regret_realized = incurred_expected - best_realized;
        regret_expected = match (&mean_costs, best_mean) {
            (Some(means), Some(best)) => regret_expected + dot(x, means) - best,
            _ => regret_realized,
        };
        avg_reward = 1.0 - chosen_total / t as f64;

        policy.feedback(&inc.on_path(&tree.lineage_of_arm(arm)))?;

        if t % cfg.record_every == 0 || t == cfg.horizon {
            rows.push(TrajectoryRow {
                run_id,
                policy: entry.name.clone(),
                seed,
                t,
                regret_expected,
                regret_realized,
                avg_reward,
                arm,
            });
        }
    }

    Ok(RunRecord {
        rows,
        summary: RunSummary {
            run_id,
            policy: entry.name.clone(),
            seed,
            final_regret_expected: regret_expected,
            final_regret_realized: regret_realized,
            final_avg_reward: avg_reward,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs every (policy, seed) pair in parallel. Run ids enumerate policies
/// first, then seeds, in configuration order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let seeds = cfg.seed_list();
    let per_policy = seeds.len();
    let jobs: Vec<(usize, u64, usize)> = (0..cfg.policies.len())
        .flat_map(|p| {
            seeds
                .iter()
                .enumerate()
                .map(move |(i, &s)| (p, s, p * per_policy + i))
        })
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(p, seed, id)| run_single(cfg, p, seed, id))
        .collect::<Result<Vec<_>>>()?;

    let summary = summarize(&runs);
    let bound_checks = if cfg.bound_check {
        bound_checks(cfg, &runs)?
    } else {
        Vec::new()
    };
    Ok(ExperimentResult {
        runs,
        summary,
        bound_checks,
    })
}

/// Final expected regret statistics per policy.
pub fn summarize(runs: &[RunRecord]) -> BTreeMap<String, PolicySummary> {
    let mut by_policy: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in runs {
        by_policy
            .entry(r.summary.policy.clone())
            .or_default()
            .push(r.summary.final_regret_expected);
    }
    by_policy
        .into_iter()
        .map(|(name, values)| {
            (
                name,
                PolicySummary {
                    final_regret: summarize_values(&values),
                },
            )
        })
        .collect()
}

fn bound_checks(cfg: &ExperimentConfig, runs: &[RunRecord]) -> Result<Vec<BoundCheck>> {
    if matches!(cfg.environment, EnvironmentConfig::Scripted { .. }) {
        return Ok(Vec::new());
    }
    let tuned = tuned_parameters(&cfg.structure()?);
    let mut out = Vec::new();
    for entry in cfg.policies.iter().filter(|p| p.is_tuned_new()) {
        let mine: Vec<&RunRecord> = runs
            .iter()
            .filter(|r| r.summary.policy == entry.name)
            .collect();
        let mut per_t: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for r in &mine {
            for row in &r.rows {
                per_t.entry(row.t).or_default().push(row.regret_expected);
            }
        }
        let violations = per_t
            .iter()
            .filter(|(t, v)| summarize_values(v).mean > tuned.regret_bound(**t))
            .map(|(t, _)| *t)
            .collect();
        let finals: Vec<f64> = mine
            .iter()
            .map(|r| r.summary.final_regret_expected)
            .collect();
        let s = summarize_values(&finals);
        out.push(BoundCheck {
            policy: entry.name.clone(),
            bound_at_horizon: tuned.regret_bound(cfg.horizon),
            mean_at_horizon: s.mean,
            stderr_at_horizon: s.std / (finals.len() as f64).sqrt(),
            violations,
        });
    }
    Ok(out)
}
