use crate::gbdt::{NodeKind, Tree};
use crate::Scalar;

use super::{check_tree, ShapError};

/// Attribution of one tree's output for one row.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeExplanation<T> {
    /// One entry per input feature; unused features are exactly zero.
    pub phi: Vec<T>,
    /// Cover-weighted mean leaf value; `expected + Σ phi = tree(x)`.
    pub expected: T,
}

#[derive(Debug, Clone, Copy)]
struct PathElem<T> {
    feature: usize,
    zero: T,
    one: T,
    weight: T,
}

const NO_FEATURE: usize = usize::MAX;

/// Path-dependent Tree SHAP for a single tree and row.
pub fn tree_shap_single<T: Scalar>(tree: &Tree<T>, x: &[T]) -> Result<TreeExplanation<T>, ShapError> {
    check_tree(tree, x.len())?;
    let mut phi = vec![T::zero(); x.len()];
    accumulate(tree, x, T::one(), &mut phi);
    Ok(TreeExplanation {
        phi,
        expected: tree.expected_value(),
    })
}

/// Adds `scale · φ(tree, x)` into `phi`. The tree must have passed `check_tree`.
pub(crate) fn accumulate<T: Scalar>(tree: &Tree<T>, x: &[T], scale: T, phi: &mut [T]) {
    let depth = tree.depth();
    // room for every recursion level's copy of the path
    let mut paths = vec![
        PathElem {
            feature: NO_FEATURE,
            zero: T::zero(),
            one: T::zero(),
            weight: T::zero(),
        };
        (depth + 2) * (depth + 3) / 2
    ];
    recurse(tree, x, scale, phi, 0, &mut paths, 0, 0, T::one(), T::one(), NO_FEATURE);
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Scalar>(
    tree: &Tree<T>,
    x: &[T],
    scale: T,
    phi: &mut [T],
    node: usize,
    paths: &mut [PathElem<T>],
    offset: usize,
    len: usize,
    zero: T,
    one: T,
    feature: usize,
) {
    // this level's path lives right after the parent's (which has `len` entries)
    let (parent, rest) = paths.split_at_mut(offset + len);
    let path = &mut rest[..len + 1];
    path[..len].copy_from_slice(&parent[offset..offset + len]);
    extend(path, len, zero, one, feature);
    let mut depth = len;

    let n = &tree.nodes[node];
    match &n.kind {
        NodeKind::Leaf { value } => {
            for i in 1..=depth {
                let w = unwound_sum(path, depth, i);
                let e = path[i];
                phi[e.feature] = phi[e.feature] + scale * w * (e.one - e.zero) * *value;
            }
        }
        NodeKind::Split {
            feature: split,
            rule,
            left,
            right,
            ..
        } => {
            let (hot, cold) = if rule.goes_left(x[*split]) {
                (*left, *right)
            } else {
                (*right, *left)
            };
            let mut in_zero = T::one();
            let mut in_one = T::one();
            if let Some(k) = (1..=depth).find(|&k| path[k].feature == *split) {
                in_zero = path[k].zero;
                in_one = path[k].one;
                unwind(path, depth, k);
                depth -= 1;
            }
            let hot_frac = tree.nodes[hot].cover / n.cover;
            let cold_frac = tree.nodes[cold].cover / n.cover;
            let child_offset = offset + len;
            recurse(
                tree,
                x,
                scale,
                phi,
                hot,
                paths,
                child_offset,
                depth + 1,
                hot_frac * in_zero,
                in_one,
                *split,
            );
            recurse(
                tree,
                x,
                scale,
                phi,
                cold,
                paths,
                child_offset,
                depth + 1,
                cold_frac * in_zero,
                T::zero(),
                *split,
            );
        }
    }
}

/// Appends a feature to the path (at index `depth`) and updates the
/// permutation weights of all subset sizes.
fn extend<T: Scalar>(path: &mut [PathElem<T>], depth: usize, zero: T, one: T, feature: usize) {
    path[depth] = PathElem {
        feature,
        zero,
        one,
        weight: if depth == 0 { T::one() } else { T::zero() },
    };
    let d1 = T::of_usize(depth + 1);
    for i in (0..depth).rev() {
        path[i + 1].weight = path[i + 1].weight + one * path[i].weight * T::of_usize(i + 1) / d1;
        path[i].weight = zero * path[i].weight * T::of_usize(depth - i) / d1;
    }
}

/// Inverse of `extend` for the element at `k`; the path shrinks by one.
fn unwind<T: Scalar>(path: &mut [PathElem<T>], depth: usize, k: usize) {
    let PathElem { one, zero, .. } = path[k];
    let d1 = T::of_usize(depth + 1);
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != T::zero() {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / (T::of_usize(i + 1) * one);
            next = tmp - path[i].weight * zero * T::of_usize(depth - i) / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * T::of_usize(depth - i));
        }
    }
    for i in k..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

/// Total permutation weight of the path with element `k` removed.
fn unwound_sum<T: Scalar>(path: &[PathElem<T>], depth: usize, k: usize) -> T {
    let PathElem { one, zero, .. } = path[k];
    let d1 = T::of_usize(depth + 1);
    let mut next = path[depth].weight;
    let mut total = T::zero();
    for i in (0..depth).rev() {
        if one != T::zero() {
            let tmp = next * d1 / (T::of_usize(i + 1) * one);
            total = total + tmp;
            next = path[i].weight - tmp * zero * T::of_usize(depth - i) / d1;
        } else {
            total = total + path[i].weight * d1 / (zero * T::of_usize(depth - i));
        }
    }
    total
}
