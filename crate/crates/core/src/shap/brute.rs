use crate::gbdt::{NodeKind, Tree};
use crate::Scalar;

use super::{check_tree, ShapError};

pub const MAX_BRUTE_FORCE_FEATURES: usize = 12;

/// Exact Shapley values by enumerating every subset of the tree's features.
///
/// The value of a coalition `S` is the path-dependent conditional
/// expectation: splits on features in `S` follow `x`, all others average
/// their children by cover. Costs `O(2^d · nodes)` for `d` used features.
pub fn brute_force_shapley<T: Scalar>(tree: &Tree<T>, x: &[T]) -> Result<Vec<T>, ShapError> {
    check_tree(tree, x.len())?;
    let used = tree.used_features();
    let d = used.len();
    if d > MAX_BRUTE_FORCE_FEATURES {
        return Err(ShapError::TooManyFeatures(d));
    }
    let values: Vec<T> = (0..1usize << d).map(|mask| coalition_value(tree, x, &used, mask)).collect();

    // |S|!(d-|S|-1)!/d!
    let mut fact = vec![T::one(); d + 1];
    for i in 1..=d {
        fact[i] = fact[i - 1] * T::of_usize(i);
    }
    let mut phi = vec![T::zero(); x.len()];
    for (j, &feature) in used.iter().enumerate() {
        let bit = 1 << j;
        let mut acc = T::zero();
        for mask in 0..1usize << d {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[d - s - 1] / fact[d];
            acc = acc + w * (values[mask | bit] - values[mask]);
        }
        phi[feature] = acc;
    }
    Ok(phi)
}

fn coalition_value<T: Scalar>(tree: &Tree<T>, x: &[T], used: &[usize], mask: usize) -> T {
    fn go<T: Scalar>(tree: &Tree<T>, x: &[T], known: &dyn Fn(usize) -> bool, id: usize) -> T {
        let n = &tree.nodes[id];
        match &n.kind {
            NodeKind::Leaf { value } => *value,
            NodeKind::Split {
                feature,
                rule,
                left,
                right,
                ..
            } => {
                if known(*feature) {
                    let next = if rule.goes_left(x[*feature]) { *left } else { *right };
                    go(tree, x, known, next)
                } else {
                    let (l, r) = (&tree.nodes[*left], &tree.nodes[*right]);
                    (l.cover * go(tree, x, known, *left) + r.cover * go(tree, x, known, *right)) / n.cover
                }
            }
        }
    }
    let known = |f: usize| used.iter().position(|&u| u == f).is_some_and(|j| mask & (1 << j) != 0);
    go(tree, x, &known, 0)
}
