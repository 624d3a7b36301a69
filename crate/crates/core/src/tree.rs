//! Similarity structures: a tower of nested partitions of the arm set,
//! stored as a rooted tree whose level-`l` nodes are the classes of the
//! `l`-th attribute.
//!
//! Class ids are assigned breadth-first from the root, children in the order
//! they were given, so ids at a level are contiguous and every parent has a
//! smaller id than its children. Iterating ids in reverse therefore visits
//! children before parents.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Absolute slack allowed on the per-leaf range normalization.
pub const RANGE_TOLERANCE: f64 = 1e-12;

/// Dense index of a class over all levels; the root is `ClassId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub usize);

impl ClassId {
    pub const ROOT: ClassId = ClassId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// How the `range` field of an explicit node list is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangeConvention {
    /// `range` bounds the node's own increment.
    #[default]
    PerClass,
    /// `range` bounds the increments of the node's children; each child
    /// inherits its parent's value.
    PerParent,
}

/// One node of an explicit tree description.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub range: f64,
}

/// Input to [`SimilarityTree::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum TreeSpec {
    /// Explicit node list. `arms` lists leaf ids in arm order; when absent the
    /// arms follow breadth-first leaf order.
    Explicit {
        levels: usize,
        nodes: Vec<NodeSpec>,
        arms: Option<Vec<usize>>,
        convention: RangeConvention,
    },
    /// Every level-`(l-1)` class has `children[l-1]` children, and every
    /// level-`l` class has range `ranges[l-1]`.
    Symmetric {
        children: Vec<usize>,
        ranges: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    level: usize,
    parent: Option<ClassId>,
    children: Vec<ClassId>,
    range: f64,
    arm: Option<usize>,
    arms: Vec<usize>,
}

/// An immutable, validated similarity structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTree {
    levels: usize,
    nodes: Vec<Node>,
    level_classes: Vec<Vec<ClassId>>,
    arm_leaf: Vec<ClassId>,
    /// Node id each class had in the `TreeSpec` it was built from.
    source_ids: Vec<usize>,
}

/// Structural constants, indexed by `level - 1` for levels `1..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeConstants {
    /// Number of classes `m` at each level.
    pub class_counts: Vec<usize>,
    /// Root-mean-square range of the classes at each level.
    pub rms_ranges: Vec<f64>,
    /// Largest number of children of a level-`(l-1)` class.
    pub max_children: Vec<usize>,
    /// Effective number of alternatives, `(Σ_l √m_l · R̄_l)²`.
    pub n_eff: f64,
    /// `√(N / n_eff)`; infinite when every range is zero.
    pub price_of_affinity: f64,
}

impl SimilarityTree {
    pub fn build(spec: &TreeSpec) -> Result<Self> {
        match spec {
            TreeSpec::Symmetric { children, ranges } => Self::symmetric(children, ranges),
            TreeSpec::Explicit {
                levels,
                nodes,
                arms,
                convention,
            } => Self::explicit(*levels, nodes, arms.as_deref(), *convention),
        }
    }

    /// Symmetric tree with `children[l]` children per level-`l` class and
    /// range `ranges[l]` on every level-`(l+1)` class.
    pub fn symmetric(children: &[usize], ranges: &[f64]) -> Result<Self> {
        if children.is_empty() {
            return Err(Error::NoLeaves);
        }
        if children.len() != ranges.len() {
            return Err(Error::MalformedTree(
                "children and ranges must have one entry per level",
            ));
        }
        let levels = children.len();
        let mut nodes = vec![NodeSpec {
            id: 0,
            level: 0,
            parent: None,
            range: 0.0,
        }];
        let mut frontier = vec![0usize];
        for (l, (&m, &r)) in children.iter().zip(ranges).enumerate() {
            if m == 0 {
                return Err(Error::EmptyClass(frontier[0]));
            }
            let mut next = Vec::with_capacity(frontier.len() * m);
            for &parent in &frontier {
                for _ in 0..m {
                    let id = nodes.len();
                    nodes.push(NodeSpec {
                        id,
                        level: l + 1,
                        parent: Some(parent),
                        range: r,
                    });
                    next.push(id);
                }
            }
            frontier = next;
        }
        Self::explicit(levels, &nodes, None, RangeConvention::PerClass)
    }

    fn explicit(
        levels: usize,
        specs: &[NodeSpec],
        arms: Option<&[usize]>,
        convention: RangeConvention,
    ) -> Result<Self> {
        if levels == 0 || specs.is_empty() {
            return Err(Error::NoLeaves);
        }
        let mut by_id = BTreeMap::new();
        for (pos, s) in specs.iter().enumerate() {
            if by_id.insert(s.id, pos).is_some() {
                return Err(Error::MalformedTree("duplicate node id"));
            }
            if s.level > levels {
                return Err(Error::MalformedTree(
                    "node level exceeds the number of levels",
                ));
            }
            if !s.range.is_finite() || s.range < 0.0 {
                return Err(Error::InvalidRange {
                    id: s.id,
                    range: s.range,
                });
            }
        }

        let mut root = None;
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); specs.len()];
        for (pos, s) in specs.iter().enumerate() {
            match s.parent {
                None => {
                    if s.level != 0 || root.is_some() {
                        return Err(Error::MalformedTree(
                            "exactly one parentless node, at level 0, is required",
                        ));
                    }
                    root = Some(pos);
                }
                Some(pid) => {
                    let &ppos = by_id
                        .get(&pid)
                        .ok_or(Error::MalformedTree("unknown parent id"))?;
                    if specs[ppos].level + 1 != s.level {
                        return Err(Error::NonNestedPartition {
                            child: s.id,
                            child_level: s.level,
                            parent_level: specs[ppos].level,
                        });
                    }
                    kids[ppos].push(pos);
                }
            }
        }
        let root = root.ok_or(Error::MalformedTree("missing root"))?;

        // Breadth-first relabelling.
        let mut order = Vec::with_capacity(specs.len());
        let mut new_id = vec![usize::MAX; specs.len()];
        order.push(root);
        new_id[root] = 0;
        let mut head = 0;
        while head < order.len() {
            let pos = order[head];
            head += 1;
            let s = &specs[pos];
            if s.level < levels && kids[pos].is_empty() {
                return Err(Error::EmptyClass(s.id));
            }
            for &k in &kids[pos] {
                new_id[k] = order.len();
                order.push(k);
            }
        }
        // Every non-root node has a parent one level up, so all are reachable.
        debug_assert_eq!(order.len(), specs.len());

        let mut nodes: Vec<Node> = order
            .iter()
            .map(|&pos| {
                let s = &specs[pos];
                let parent = s.parent.map(|pid| ClassId(new_id[by_id[&pid]]));
                let range = match (convention, s.parent) {
                    (_, None) => 0.0,
                    (RangeConvention::PerClass, Some(_)) => s.range,
                    (RangeConvention::PerParent, Some(pid)) => specs[by_id[&pid]].range,
                };
                Node {
                    level: s.level,
                    parent,
                    children: kids[pos].iter().map(|&k| ClassId(new_id[k])).collect(),
                    range,
                    arm: None,
                    arms: Vec::new(),
                }
            })
            .collect();

        let bfs_leaves: Vec<ClassId> = (0..nodes.len())
            .filter(|&i| nodes[i].level == levels)
            .map(ClassId)
            .collect();
        if bfs_leaves.is_empty() {
            return Err(Error::NoLeaves);
        }
        let arm_leaf = match arms {
            None => bfs_leaves,
            Some(list) => {
                let mut seen = vec![false; nodes.len()];
                let mut out = Vec::with_capacity(list.len());
                for id in list {
                    let &pos = by_id
                        .get(id)
                        .ok_or(Error::MalformedTree("arm refers to an unknown node"))?;
                    let cid = new_id[pos];
                    if nodes[cid].level != levels || seen[cid] {
                        return Err(Error::MalformedTree(
                            "arms must list every leaf exactly once",
                        ));
                    }
                    seen[cid] = true;
                    out.push(ClassId(cid));
                }
                if out.len() != bfs_leaves.len() {
                    return Err(Error::MalformedTree(
                        "arms must list every leaf exactly once",
                    ));
                }
                out
            }
        };

        for (arm, &leaf) in arm_leaf.iter().enumerate() {
            nodes[leaf.0].arm = Some(arm);
            let mut cur = Some(leaf);
            let mut sum = 0.0;
            while let Some(c) = cur {
                nodes[c.0].arms.push(arm);
                sum += nodes[c.0].range;
                cur = nodes[c.0].parent;
            }
            if sum > 1.0 + RANGE_TOLERANCE {
                return Err(Error::RangeNormalizationViolated { arm, sum });
            }
        }

        let mut level_classes = vec![Vec::new(); levels + 1];
        for (i, n) in nodes.iter().enumerate() {
            level_classes[n.level].push(ClassId(i));
        }

        Ok(Self {
            levels,
            nodes,
            level_classes,
            arm_leaf,
            source_ids: order.iter().map(|&pos| specs[pos].id).collect(),
        })
    }

    /// Number of attributes `L` (leaves live at level `L`).
    pub fn num_levels(&self) -> usize {
        self.levels
    }

    pub fn num_arms(&self) -> usize {
        self.arm_leaf.len()
    }

    /// Total number of classes, root included.
    pub fn num_classes(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, class: ClassId) -> bool {
        class.0 < self.nodes.len()
    }

    fn node(&self, class: ClassId) -> &Node {
        &self.nodes[class.0]
    }

    pub fn level(&self, class: ClassId) -> usize {
        self.node(class).level
    }

    pub fn parent(&self, class: ClassId) -> Option<ClassId> {
        self.node(class).parent
    }

    pub fn children(&self, class: ClassId) -> &[ClassId] {
        &self.node(class).children
    }

    /// Upper bound on the class's own increment (zero for the root).
    pub fn range(&self, class: ClassId) -> f64 {
        self.node(class).range
    }

    pub fn is_leaf(&self, class: ClassId) -> bool {
        self.node(class).level == self.levels
    }

    pub fn leaf_of_arm(&self, arm: usize) -> ClassId {
        self.arm_leaf[arm]
    }

    pub fn arm_of_leaf(&self, class: ClassId) -> Option<usize> {
        self.node(class).arm
    }

    /// Arms contained in `class`, in arm order of discovery.
    pub fn arms_in(&self, class: ClassId) -> &[usize] {
        &self.node(class).arms
    }

    /// The node id `class` carried in its `TreeSpec`.
    pub fn source_id(&self, class: ClassId) -> usize {
        self.source_ids[class.0]
    }

    pub fn class_by_source_id(&self, id: usize) -> Option<ClassId> {
        self.source_ids.iter().position(|&s| s == id).map(ClassId)
    }

    pub fn classes_at_level(&self, level: usize) -> &[ClassId] {
        &self.level_classes[level]
    }

    pub fn class_ids(&self) -> impl DoubleEndedIterator<Item = ClassId> + ExactSizeIterator {
        (0..self.nodes.len()).map(ClassId)
    }

    /// Root's child down to `class`, inclusive. Empty for the root.
    pub fn lineage(&self, class: ClassId) -> Result<Vec<ClassId>> {
        if !self.contains(class) {
            return Err(Error::UnknownClass(class));
        }
        let mut out = Vec::with_capacity(self.level(class));
        let mut cur = class;
        while let Some(p) = self.parent(cur) {
            out.push(cur);
            cur = p;
        }
        out.reverse();
        Ok(out)
    }

    pub fn lineage_of_arm(&self, arm: usize) -> Vec<ClassId> {
        // Leaves always exist, so this cannot fail.
        self.lineage(self.leaf_of_arm(arm)).unwrap_or_default()
    }

    /// Sum of the ranges along the arm's lineage.
    pub fn path_range_sum(&self, arm: usize) -> f64 {
        self.lineage_of_arm(arm)
            .iter()
            .map(|&c| self.range(c))
            .sum()
    }

    pub fn constants(&self) -> TreeConstants {
        let levels = self.levels;
        let mut class_counts = vec![0usize; levels];
        let mut square_sums = vec![0.0f64; levels];
        let mut max_children = vec![0usize; levels];
        for n in &self.nodes {
            if n.level >= 1 {
                class_counts[n.level - 1] += 1;
                square_sums[n.level - 1] += n.range * n.range;
            }
            if n.level < levels {
                max_children[n.level] = max_children[n.level].max(n.children.len());
            }
        }
        let rms_ranges = class_counts
            .iter()
            .zip(&square_sums)
            .map(|(&m, &s)| libm::sqrt(s / m as f64))
            .collect();
        // (Σ_l √S_l)² expanded so that a single nonzero level yields S_l exactly.
        let mut n_eff: f64 = square_sums.iter().sum();
        for i in 0..levels {
            for j in i + 1..levels {
                n_eff += 2.0 * libm::sqrt(square_sums[i] * square_sums[j]);
            }
        }
        let price_of_affinity = if n_eff > 0.0 {
            libm::sqrt(self.num_arms() as f64 / n_eff)
        } else {
            f64::INFINITY
        };
        TreeConstants {
            class_counts,
            rms_ranges,
            max_children,
            n_eff,
            price_of_affinity,
        }
    }

    /// Explicit description with the original node ids, listed in class-id
    /// order, so that rebuilding reproduces this tree exactly.
    pub fn to_spec(&self) -> TreeSpec {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeSpec {
                id: self.source_ids[i],
                level: n.level,
                parent: n.parent.map(|p| self.source_ids[p.0]),
                range: n.range,
            })
            .collect();
        TreeSpec::Explicit {
            levels: self.levels,
            nodes,
            arms: Some(self.arm_leaf.iter().map(|c| self.source_ids[c.0]).collect()),
            convention: RangeConvention::PerClass,
        }
    }
}

/// Random valid tree for randomized verification: `levels` levels, each
/// internal class with `1..=max_children` children (the root gets at least
/// two), random ranges rescaled so the largest path sum is `path_budget`.
pub fn random_tree<R: Rng + ?Sized>(
    rng: &mut R,
    levels: usize,
    max_children: usize,
    path_budget: f64,
) -> SimilarityTree {
    let max_children = max_children.max(2);
    let mut nodes = vec![NodeSpec {
        id: 0,
        level: 0,
        parent: None,
        range: 0.0,
    }];
    let mut frontier = vec![0usize];
    for l in 1..=levels {
        let mut next = Vec::new();
        for &p in &frontier {
            let lo = if l == 1 { 2 } else { 1 };
            let m = rng.random_range(lo..=max_children);
            for _ in 0..m {
                let id = nodes.len();
                nodes.push(NodeSpec {
                    id,
                    level: l,
                    parent: Some(p),
                    range: rng.random::<f64>(),
                });
                next.push(id);
            }
        }
        frontier = next;
    }
    // Rescale so the worst path sums to the budget.
    let mut path = vec![0.0; nodes.len()];
    let mut worst: f64 = 0.0;
    for i in 1..nodes.len() {
        let p = nodes[i].parent.unwrap_or(0);
        path[i] = path[p] + nodes[i].range;
        if nodes[i].level == levels {
            worst = worst.max(path[i]);
        }
    }
    let budget = path_budget.clamp(0.0, 1.0);
    let scale = if worst > 0.0 { budget / worst } else { 0.0 };
    for n in nodes.iter_mut().skip(1) {
        n.range = (n.range * scale).min(1.0);
    }
    // Guard the last ulp: scaling can land a hair over the budget.
    SimilarityTree::explicit(levels, &nodes, None, RangeConvention::PerClass)
        .or_else(|_| {
            for n in nodes.iter_mut().skip(1) {
                n.range *= 1.0 - 1e-12;
            }
            SimilarityTree::explicit(levels, &nodes, None, RangeConvention::PerClass)
        })
        .expect("rescaled random tree is valid")
}
