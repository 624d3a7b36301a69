//! Scripted increment tables: CSV with header `t,class_id,delta`.
//!
//! `class_id` is the node id from the tree file. Rounds or classes that do
//! not appear get a zero increment.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nested_core::envs::ScriptedEnv;
use nested_core::SimilarityTree;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptRow {
    pub t: u64,
    pub class_id: usize,
    pub delta: f64,
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<ScriptRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "class_id", "delta"] {
        bail!(
            "script header must be `t,class_id,delta`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        );
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.with_context(|| format!("script row {}", i + 2)))
        .collect()
}

/// Builds a replayable environment covering at least `horizon` rounds.
pub fn script_env(tree: &SimilarityTree, rows: &[ScriptRow], horizon: u64) -> Result<ScriptedEnv> {
    let rounds = rows.iter().map(|r| r.t).max().unwrap_or(0).max(horizon);
    let entries = rows
        .iter()
        .map(|r| {
            let class = tree
                .class_by_source_id(r.class_id)
                .with_context(|| format!("script refers to unknown class id {}", r.class_id))?;
            Ok((r.t, class.index(), r.delta))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScriptedEnv::from_entries(tree, rounds, &entries)?)
}

pub fn load_script(path: &Path, tree: &SimilarityTree, horizon: u64) -> Result<ScriptedEnv> {
    let file =
        std::fs::File::open(path).with_context(|| format!("opening script {}", path.display()))?;
    let rows = read_rows(file).with_context(|| format!("reading script {}", path.display()))?;
    script_env(tree, &rows, horizon)
}

pub fn write_rows<W: std::io::Write>(writer: W, rows: &[ScriptRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
