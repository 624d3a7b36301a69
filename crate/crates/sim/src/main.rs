use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use nested_core::entropy::hrange;
use nested_core::policies::tuned_parameters;
use nested_sim::{output, run_experiment, verify, ExperimentConfig, TreeFile};

#[derive(Parser)]
#[command(
    name = "nested-bandits",
    version,
    about = "Nested exponential weights simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trajectories and summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's `output_dir`, else `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of consecutive seeds, overriding the config.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Check the estimator and entropy identities on random trees.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Print the structural constants and tuned parameters of a tree.
    Constants {
        #[arg(long)]
        tree: PathBuf,
    },
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seeds,
            horizon,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(n) = seeds {
                cfg.override_num_seeds(n);
            }
            if let Some(t) = horizon {
                cfg.horizon = t;
            }
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let result = run_experiment(&cfg)?;
            output::write_all(&dir, &result)?;
            for (name, s) in &result.summary {
                let r = &s.final_regret;
                println!(
                    "{name}: final regret mean {:.3} std {:.3} median {:.3}",
                    r.mean, r.std, r.median
                );
            }
            for b in &result.bound_checks {
                println!(
                    "{}: bound {:.3} at T, mean {:.3} ± {:.3}, {} recorded rounds above bound",
                    b.policy,
                    b.bound_at_horizon,
                    b.mean_at_horizon,
                    b.stderr_at_horizon,
                    b.violations.len()
                );
            }
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed, trials } => {
            let checks = verify::run_checks(seed, trials)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Constants { tree } => {
            let tree = TreeFile::load(&tree)?.build()?;
            let k = tree.constants();
            let tuned = tuned_parameters(&tree);
            let mu = tuned.uncertainty(tree.num_levels())?;
            println!("levels        {}", tree.num_levels());
            println!("arms N        {}", tree.num_arms());
            println!("classes m     {:?}", k.class_counts);
            println!("rms ranges R  {:?}", k.rms_ranges);
            println!("n_eff         {}", k.n_eff);
            println!("rho           {}", k.price_of_affinity);
            println!("H (tuned mu)  {}", hrange(&tree, &mu)?);
            println!("tuned mu      {} at every level", tuned.mu);
            println!(
                "eta_t         sqrt(ln N / (2 t)); eta_1 = {}, eta_1000 = {}",
                tuned.eta(1),
                tuned.eta(1000)
            );
            println!(
                "bound(T)      2 sqrt(n_eff ln N T); bound(1000) = {}",
                tuned.regret_bound(1000)
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
