//! JSON tree descriptions.
//!
//! Two shapes are accepted:
//!
//! ```json
//! {"levels": 2, "nodes": [{"id": 0, "level": 0, "parent": null, "range": 0.0}, ...],
//!  "arms": [3, 4, 5], "range_convention": "per_class"}
//! {"symmetric": {"children": [3, 3], "ranges": [0.9, 0.1]}}
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use nested_core::tree::{NodeSpec, RangeConvention};
use nested_core::{SimilarityTree, TreeSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeFile {
    Symmetric { symmetric: SymmetricTree },
    Explicit(ExplicitTree),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricTree {
    pub children: Vec<usize>,
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitTree {
    pub levels: usize,
    pub nodes: Vec<NodeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arms: Option<Vec<usize>>,
    #[serde(default)]
    pub range_convention: Convention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    PerClass,
    PerParent,
}

impl TreeFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading tree file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing tree file {}", path.display()))
    }

    pub fn to_spec(&self) -> TreeSpec {
        match self {
            TreeFile::Symmetric { symmetric } => TreeSpec::Symmetric {
                children: symmetric.children.clone(),
                ranges: symmetric.ranges.clone(),
            },
            TreeFile::Explicit(t) => TreeSpec::Explicit {
                levels: t.levels,
                nodes: t
                    .nodes
                    .iter()
                    .map(|n| NodeSpec {
                        id: n.id,
                        level: n.level,
                        parent: n.parent,
                        range: n.range,
                    })
                    .collect(),
                arms: t.arms.clone(),
                convention: match t.range_convention {
                    Convention::PerClass => RangeConvention::PerClass,
                    Convention::PerParent => RangeConvention::PerParent,
                },
            },
        }
    }

    pub fn build(&self) -> Result<SimilarityTree> {
        Ok(SimilarityTree::build(&self.to_spec())?)
    }

    /// Explicit description of an existing tree, with its original node ids.
    pub fn from_tree(tree: &SimilarityTree) -> Self {
        match tree.to_spec() {
            TreeSpec::Explicit {
                levels,
                nodes,
                arms,
                ..
            } => TreeFile::Explicit(ExplicitTree {
                levels,
                nodes: nodes
                    .into_iter()
                    .map(|n| NodeEntry {
                        id: n.id,
                        level: n.level,
                        parent: n.parent,
                        range: n.range,
                    })
                    .collect(),
                arms,
                range_convention: Convention::PerClass,
            }),
            TreeSpec::Symmetric { children, ranges } => TreeFile::Symmetric {
                symmetric: SymmetricTree { children, ranges },
            },
        }
    }
}
