use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Routing rule of a split node. Rows satisfying the rule go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(rename_all = "snake_case")]
pub enum SplitRule<T> {
    /// `x <= threshold`; NaN goes right.
    Threshold(T),
    /// Category code in the set.
    Levels(Vec<u32>),
}

impl<T: Scalar> SplitRule<T> {
    #[inline]
    pub fn goes_left(&self, x: T) -> bool {
        match self {
            SplitRule::Threshold(t) => x <= *t,
            SplitRule::Levels(set) => x.to_u32().is_some_and(|code| x >= T::zero() && set.contains(&code)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(rename_all = "snake_case")]
pub enum NodeKind<T> {
    Leaf {
        value: T,
    },
    Split {
        feature: usize,
        rule: SplitRule<T>,
        left: usize,
        right: usize,
        /// Loss reduction recorded when the split was chosen.
        gain: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Node<T> {
    /// Training weight that reached the node (row count without sampling weights).
    pub cover: T,
    #[serde(flatten)]
    pub kind: NodeKind<T>,
}

impl<T: Scalar> Node<T> {
    pub fn leaf(value: T, cover: T) -> Self {
        Self {
            cover,
            kind: NodeKind::Leaf { value },
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

/// Binary regression tree stored as a pre-order node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn single_leaf(value: T, cover: T) -> Self {
        Self {
            nodes: vec![Node::leaf(value, cover)],
        }
    }

    /// Rebuilds the node list in pre-order starting from `root`.
    pub fn from_arena(arena: Vec<Node<T>>, root: usize) -> Self {
        let mut nodes = Vec::with_capacity(arena.len());
        fn visit<T: Scalar>(arena: &[Node<T>], id: usize, out: &mut Vec<Node<T>>) -> usize {
            let pos = out.len();
            out.push(arena[id].clone());
            if let NodeKind::Split { left, right, .. } = arena[id].kind {
                let l = visit(arena, left, out);
                let r = visit(arena, right, out);
                if let NodeKind::Split {
                    left: ref mut nl,
                    right: ref mut nr,
                    ..
                } = out[pos].kind
                {
                    *nl = l;
                    *nr = r;
                }
            }
            pos
        }
        visit(&arena, root, &mut nodes);
        Self { nodes }
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[T]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id].kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Split {
                    feature,
                    rule,
                    left,
                    right,
                    ..
                } => {
                    id = if rule.goes_left(row[*feature]) { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        match self.nodes[self.leaf_index(row)].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => unreachable!(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Depth of the deepest leaf (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn go<T: Scalar>(t: &Tree<T>, id: usize) -> usize {
            match t.nodes[id].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Features used by at least one split, ascending.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Split { feature, .. } => Some(feature),
                NodeKind::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Cover-weighted mean of the leaf values.
    pub fn expected_value(&self) -> T {
        fn go<T: Scalar>(t: &Tree<T>, id: usize) -> T {
            let n = &t.nodes[id];
            match n.kind {
                NodeKind::Leaf { value } => value,
                NodeKind::Split { left, right, .. } => {
                    let (l, r) = (&t.nodes[left], &t.nodes[right]);
                    (l.cover * go(t, left) + r.cover * go(t, right)) / n.cover
                }
            }
        }
        go(self, 0)
    }

    /// Multiplies every leaf value by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for n in &mut out.nodes {
            if let NodeKind::Leaf { value } = &mut n.kind {
                *value = *value * factor;
            }
        }
        out
    }

    /// Checks child indices and `cover(parent) = cover(left) + cover(right)`
    /// within `tol` relative.
    pub fn check_structure(&self, tol: T) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let NodeKind::Split { left, right, .. } = n.kind {
                if left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len() {
                    return Err(format!("node {i} has invalid children"));
                }
                let sum = self.nodes[left].cover + self.nodes[right].cover;
                if (sum - n.cover).abs() > tol * n.cover.abs().max(T::one()) {
                    return Err(format!(
                        "node {i}: cover {} != {} + {}",
                        n.cover, self.nodes[left].cover, self.nodes[right].cover
                    ));
                }
            }
        }
        Ok(())
    }
}
