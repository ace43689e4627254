//! Leaf-wise (best-first) and level-wise (breadth-first) tree growth.

use serde::{Deserialize, Serialize};

use crate::Scalar;

use super::binning::{BinLayout, BinnedData};
use super::histogram::{
    best_split_sorted, find_best_split_in, leaf_value, prefers_histogram, sort_rows_by_bin, BinSplit, BinStats, NodeHistogram,
    SplitCandidate,
};
use super::tree::{Node, NodeKind, SplitRule, Tree};
use super::GbdtError;

/// How a tree is grown.
///
/// Leaf-wise growth splits the frontier leaf of largest gain until
/// `num_leaves` leaves exist, with no L2 term in the gain. Level-wise growth
/// expands every node of one depth before the next, shrinking leaves with
/// `l2_leaf_reg`; `border_count` caps its numeric bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthStrategy {
    LeafWise {
        num_leaves: usize,
        min_child_samples: usize,
        max_depth: usize,
    },
    LevelWise {
        depth: usize,
        l2_leaf_reg: f64,
        border_count: usize,
    },
}

impl GrowthStrategy {
    pub fn validate(&self) -> Result<(), GbdtError> {
        match *self {
            GrowthStrategy::LeafWise {
                num_leaves,
                min_child_samples,
                max_depth,
            } => {
                if num_leaves < 2 {
                    return Err(GbdtError::Invalid("num_leaves must be at least 2".into()));
                }
                if min_child_samples < 1 {
                    return Err(GbdtError::Invalid("min_child_samples must be at least 1".into()));
                }
                if max_depth < 1 || (max_depth < usize::BITS as usize && num_leaves > 1usize << max_depth) {
                    return Err(GbdtError::Invalid(format!(
                        "num_leaves {num_leaves} exceeds 2^max_depth (max_depth {max_depth})"
                    )));
                }
            }
            GrowthStrategy::LevelWise {
                depth,
                l2_leaf_reg,
                border_count,
            } => {
                if depth < 1 {
                    return Err(GbdtError::Invalid("depth must be at least 1".into()));
                }
                if !(l2_leaf_reg >= 0.0 && l2_leaf_reg.is_finite()) {
                    return Err(GbdtError::Invalid("l2_leaf_reg must be finite and >= 0".into()));
                }
                if border_count < 2 {
                    return Err(GbdtError::Invalid("border_count must be at least 2".into()));
                }
            }
        }
        Ok(())
    }

    /// L2 term of the gain and leaf formulas.
    pub fn lambda(&self) -> f64 {
        match self {
            GrowthStrategy::LeafWise { .. } => 0.0,
            GrowthStrategy::LevelWise { l2_leaf_reg, .. } => *l2_leaf_reg,
        }
    }

    pub fn min_child_samples(&self) -> usize {
        match self {
            GrowthStrategy::LeafWise { min_child_samples, .. } => *min_child_samples,
            GrowthStrategy::LevelWise { .. } => 1,
        }
    }

    pub fn max_depth(&self) -> usize {
        match self {
            GrowthStrategy::LeafWise { max_depth, .. } => *max_depth,
            GrowthStrategy::LevelWise { depth, .. } => *depth,
        }
    }

    pub fn is_leaf_wise(&self) -> bool {
        matches!(self, GrowthStrategy::LeafWise { .. })
    }
}

struct Grower<'a, T> {
    data: &'a BinnedData<T>,
    grad: &'a [T],
    hess: &'a [T],
    lambda: T,
    min_child: usize,
    /// Row indices; every node owns a contiguous range, ascending within it.
    rows: Vec<u32>,
    /// Per feature `f`, `sorted[f·n + i]` for `i` in a small node's range
    /// holds that node's rows ordered by bin.
    sorted: Vec<u32>,
    scratch: Vec<u32>,
    counts: Vec<usize>,
    /// Side of the latest partition, per row: `true` = left.
    side: Vec<bool>,
    arena: Vec<Node<T>>,
}

/// How a node's split search reads its statistics.
enum Scan<T> {
    Fresh,
    Hist(NodeHistogram<T>),
    /// The node's range of `sorted` is up to date.
    Sorted,
}

/// A node still open for splitting: its range of `rows` and best candidate.
struct Open<T> {
    id: usize,
    start: usize,
    end: usize,
    depth: usize,
    best: Option<SplitCandidate<T>>,
    scan: Scan<T>,
}

impl<T: Scalar> Grower<'_, T> {
    fn stats(&self, start: usize, end: usize) -> BinStats<T> {
        let mut s = BinStats::default();
        for &r in &self.rows[start..end] {
            s.grad = s.grad + self.grad[r as usize];
            s.hess = s.hess + self.hess[r as usize];
            s.count += 1;
        }
        s
    }

    fn open(&mut self, start: usize, end: usize, depth: usize, can_split: bool, scan: Scan<T>) -> Open<T> {
        let s = self.stats(start, end);
        let id = self.arena.len();
        self.arena.push(Node::leaf(leaf_value(&s, self.lambda), s.hess));
        let mut node = Open {
            id,
            start,
            end,
            depth,
            best: None,
            scan: Scan::Fresh,
        };
        if !can_split || end - start < 2 * self.min_child {
            return node;
        }
        let stride = self.rows.len();
        let scan = match scan {
            Scan::Fresh if prefers_histogram(self.data, end - start) => {
                Scan::Hist(NodeHistogram::build(self.data, &self.rows[start..end], self.grad, self.hess))
            }
            Scan::Fresh => {
                sort_rows_by_bin(self.data, &self.rows[start..end], &mut self.sorted, stride, start, &mut self.counts);
                Scan::Sorted
            }
            other => other,
        };
        node.best = match &scan {
            Scan::Hist(h) => find_best_split_in(h, self.lambda, self.min_child),
            _ => best_split_sorted(
                self.data,
                &self.sorted,
                stride,
                start,
                s,
                self.grad,
                self.hess,
                self.lambda,
                self.min_child,
            ),
        };
        if node.best.is_some() {
            node.scan = scan;
        }
        node
    }

    /// Stable in-place partition of the node's rows; returns the first right index.
    fn partition(&mut self, start: usize, end: usize, feature: usize, split: BinSplit) -> usize {
        let bins = &self.data.features[feature].bins;
        self.scratch.clear();
        let mut w = start;
        for i in start..end {
            let r = self.rows[i];
            let go_left = split.goes_left(bins[r as usize]);
            self.side[r as usize] = go_left;
            if go_left {
                self.rows[w] = r;
                w += 1;
            } else {
                self.scratch.push(r);
            }
        }
        self.rows[w..end].copy_from_slice(&self.scratch);
        w
    }

    /// Stable partition of every feature's sorted range by `side`.
    fn partition_sorted(&mut self, start: usize, end: usize) {
        let stride = self.rows.len();
        for f in 0..self.data.features.len() {
            let seg = &mut self.sorted[f * stride + start..f * stride + end];
            self.scratch.clear();
            let mut w = 0;
            for i in 0..seg.len() {
                let r = seg[i];
                if self.side[r as usize] {
                    seg[w] = r;
                    w += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            seg[w..].copy_from_slice(&self.scratch);
        }
    }

    /// Scan states for the two children of a split node.
    fn child_scans(&mut self, parent: Scan<T>, (ls, le): (usize, usize), (rs, re): (usize, usize)) -> (Scan<T>, Scan<T>) {
        match parent {
            Scan::Hist(mut h) => {
                let (nl, nr) = (le - ls, re - rs);
                if !(prefers_histogram(self.data, nl) && prefers_histogram(self.data, nr)) {
                    return (Scan::Fresh, Scan::Fresh);
                }
                // build the smaller child; the parent minus it is the sibling
                let small = if nl <= nr { (ls, le) } else { (rs, re) };
                let hs = NodeHistogram::build(self.data, &self.rows[small.0..small.1], self.grad, self.hess);
                h.subtract_in_place(&hs);
                if nl <= nr {
                    (Scan::Hist(hs), Scan::Hist(h))
                } else {
                    (Scan::Hist(h), Scan::Hist(hs))
                }
            }
            Scan::Sorted => {
                self.partition_sorted(ls, re);
                (Scan::Sorted, Scan::Sorted)
            }
            Scan::Fresh => (Scan::Fresh, Scan::Fresh),
        }
    }

    /// Turns an open leaf into a split node and opens its two children.
    fn expand(&mut self, node: Open<T>, can_split: bool) -> (Open<T>, Open<T>) {
        let best = node.best.expect("split candidate");
        let mid = self.partition(node.start, node.end, best.feature, best.split);
        debug_assert_eq!(mid - node.start, best.left.count);
        let rule = split_rule(self.data, best.feature, best.split);
        let cover = self.arena[node.id].cover;
        let (lrange, rrange) = ((node.start, mid), (mid, node.end));
        let (lscan, rscan) = if can_split {
            self.child_scans(node.scan, lrange, rrange)
        } else {
            (Scan::Fresh, Scan::Fresh)
        };
        let depth = node.depth + 1;
        let left = self.open(lrange.0, lrange.1, depth, can_split, lscan);
        let right = self.open(rrange.0, rrange.1, depth, can_split, rscan);
        self.arena[node.id] = Node {
            cover,
            kind: NodeKind::Split {
                feature: best.feature,
                rule,
                left: left.id,
                right: right.id,
                gain: best.gain,
            },
        };
        (left, right)
    }
}

fn split_rule<T: Scalar>(data: &BinnedData<T>, feature: usize, split: BinSplit) -> SplitRule<T> {
    match (&data.features[feature].layout, split) {
        (BinLayout::Ordered { edges }, BinSplit::Prefix(b)) => SplitRule::Threshold(edges[b]),
        (_, BinSplit::OneLevel(c)) => SplitRule::Levels(vec![c as u32]),
        (BinLayout::Categorical { .. }, BinSplit::Prefix(b)) => SplitRule::Levels((0..=b as u32).collect()),
    }
}

/// Grows one regression tree on `rows` from per-row gradients and hessians
/// (already multiplied by any sampling weights).
pub fn grow_tree<T: Scalar>(
    data: &BinnedData<T>,
    grad: &[T],
    hess: &[T],
    rows: &[usize],
    strategy: &GrowthStrategy,
) -> Result<Tree<T>, GbdtError> {
    strategy.validate()?;
    if rows.is_empty() || data.n_rows == 0 {
        return Err(GbdtError::Invalid("cannot grow a tree on zero rows".into()));
    }
    if grad.len() != data.n_rows || hess.len() != data.n_rows {
        return Err(GbdtError::Invalid("gradient/hessian length differs from the row count".into()));
    }
    if rows.iter().any(|&r| r >= data.n_rows) {
        return Err(GbdtError::Invalid("row index out of range".into()));
    }
    let mut sorted_rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    sorted_rows.sort_unstable();
    sorted_rows.dedup();
    Ok(grow_by_node(data, grad, hess, sorted_rows, strategy))
}

/// Node-by-node growth: histograms (with sibling subtraction) for large
/// nodes, bin-sorted row lists for small ones.
fn grow_by_node<T: Scalar>(data: &BinnedData<T>, grad: &[T], hess: &[T], sorted_rows: Vec<u32>, strategy: &GrowthStrategy) -> Tree<T> {
    let n = sorted_rows.len();
    let mut g = Grower {
        data,
        grad,
        hess,
        lambda: T::of(strategy.lambda()),
        min_child: strategy.min_child_samples(),
        rows: sorted_rows,
        sorted: vec![0; n * data.features.len()],
        scratch: Vec::new(),
        counts: Vec::new(),
        side: vec![false; data.n_rows],
        arena: Vec::new(),
    };
    let max_depth = strategy.max_depth();
    let root = g.open(0, n, 0, max_depth > 0, Scan::Fresh);

    match *strategy {
        GrowthStrategy::LeafWise { num_leaves, .. } => {
            let mut frontier = vec![root];
            let mut leaves = 1;
            while leaves < num_leaves {
                // largest gain wins; ties go to the leaf created first
                let pick = frontier
                    .iter()
                    .enumerate()
                    .filter_map(|(i, o)| o.best.as_ref().map(|b| (i, o.id, b.gain)))
                    .fold(None::<(usize, usize, T)>, |acc, (i, id, gain)| match acc {
                        Some((_, id0, g0)) if g0 > gain || (g0 == gain && id0 < id) => acc,
                        _ => Some((i, id, gain)),
                    });
                let Some((i, _, _)) = pick else { break };
                let node = frontier.swap_remove(i);
                let can = node.depth + 1 < max_depth;
                let (left, right) = g.expand(node, can);
                frontier.push(left);
                frontier.push(right);
                leaves += 1;
            }
        }
        GrowthStrategy::LevelWise { .. } => {
            let mut level = vec![root];
            while !level.is_empty() {
                let mut next = Vec::new();
                for node in level {
                    if node.best.is_none() {
                        continue;
                    }
                    let can = node.depth + 1 < max_depth;
                    let (left, right) = g.expand(node, can);
                    next.push(left);
                    next.push(right);
                }
                level = next;
            }
        }
    }
    Tree::from_arena(g.arena, 0)
}
