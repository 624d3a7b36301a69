//! Result files.
//!
//! - `trajectories.csv`: header
//!   `run_id,policy,seed,t,regret_expected,regret_realized,avg_reward,arm`,
//!   rows ordered by run id then `t`.
//! - `summary.json`: `{policy: {final_regret: {mean,std,q25,median,q75,min,max}}}`.
//! - `runs.json`: per-run finals and wall times (the only nondeterministic
//!   output).
//! - `bound_check.json`: written when bound checking is enabled.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use crate::runner::{ExperimentResult, PolicySummary, RunRecord, TrajectoryRow};

pub const TRAJECTORY_HEADER: [&str; 8] = [
    "run_id",
    "policy",
    "seed",
    "t",
    "regret_expected",
    "regret_realized",
    "avg_reward",
    "arm",
];

pub fn write_trajectories<W: Write>(writer: W, runs: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut ordered: Vec<&RunRecord> = runs.iter().collect();
    ordered.sort_by_key(|r| r.summary.run_id);
    // Written explicitly so an empty experiment still has the header.
    w.write_record(TRAJECTORY_HEADER)?;
    for run in ordered {
        for row in &run.rows {
            w.write_record(&[
                row.run_id.to_string(),
                row.policy.clone(),
                row.seed.to_string(),
                row.t.to_string(),
                row.regret_expected.to_string(),
                row.regret_realized.to_string(),
                row.avg_reward.to_string(),
                row.arm.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories<R: std::io::Read>(reader: R) -> Result<Vec<TrajectoryRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map_err(anyhow::Error::from))
        .collect()
}

pub fn write_summary<W: Write>(writer: W, summary: &BTreeMap<String, PolicySummary>) -> Result<()> {
    serde_json::to_writer_pretty(writer, summary)?;
    Ok(())
}

pub fn write_all(dir: &Path, result: &ExperimentResult) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    };
    write_trajectories(create("trajectories.csv")?, &result.runs)?;
    write_summary(create("summary.json")?, &result.summary)?;
    let runs: Vec<_> = result.runs.iter().map(|r| &r.summary).collect();
    serde_json::to_writer_pretty(create("runs.json")?, &runs)?;
    if !result.bound_checks.is_empty() {
        serde_json::to_writer_pretty(create("bound_check.json")?, &result.bound_checks)?;
    }
    Ok(())
}
