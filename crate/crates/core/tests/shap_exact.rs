//! Tree SHAP against two independent Shapley oracles on random trees, and
//! additivity / linearity / dummy checks on fitted ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapcausal::dataset::{Column, ColumnData, ColumnKind, ColumnRole, ColumnSchema, NumericColumn, Table};
use shapcausal::gbdt::{fit, BoostParams, GrowthStrategy, Node, NodeKind, SplitRule, Tree};
use shapcausal::shap::{brute_force_shapley, explain_ensemble, tree_shap_single};

/// Random tree with ≤ `max_leaves` leaves over `n_features` features,
/// random thresholds and random (consistent) covers.
fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, max_leaves: usize) -> Tree<f64> {
    let leaves = rng.random_range(1..=max_leaves);
    // grow by splitting random leaves
    let mut arena: Vec<Node<f64>> = vec![Node::leaf(0.0, 0.0)];
    let mut open = vec![0usize];
    while open.len() < leaves {
        let pick = open.swap_remove(rng.random_range(0..open.len()));
        let l = arena.len();
        arena.push(Node::leaf(0.0, 0.0));
        arena.push(Node::leaf(0.0, 0.0));
        arena[pick].kind = NodeKind::Split {
            feature: rng.random_range(0..n_features),
            rule: SplitRule::Threshold(rng.random_range(-1.0..1.0)),
            left: l,
            right: l + 1,
            gain: 0.0,
        };
        open.push(l);
        open.push(l + 1);
    }
    for &leaf in &open {
        arena[leaf] = Node::leaf(rng.random_range(-10.0..10.0), rng.random_range(1..50) as f64);
    }
    fn fill(arena: &mut Vec<Node<f64>>, id: usize) -> f64 {
        if let NodeKind::Split { left, right, .. } = arena[id].kind {
            let c = fill(arena, left) + fill(arena, right);
            arena[id].cover = c;
        }
        arena[id].cover
    }
    fill(&mut arena, 0);
    Tree::from_arena(arena, 0)
}

/// Shapley values as the average marginal contribution over all orderings
/// of the used features.
fn permutation_shapley(tree: &Tree<f64>, x: &[f64]) -> Vec<f64> {
    fn value(tree: &Tree<f64>, x: &[f64], known: &[bool], id: usize) -> f64 {
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
                if known[*feature] {
                    value(tree, x, known, if rule.goes_left(x[*feature]) { *left } else { *right })
                } else {
                    (tree.nodes[*left].cover * value(tree, x, known, *left) + tree.nodes[*right].cover * value(tree, x, known, *right))
                        / n.cover
                }
            }
        }
    }
    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }
    let used = tree.used_features();
    let perms = permutations(&used);
    let mut phi = vec![0.0; x.len()];
    for p in &perms {
        let mut known = vec![false; x.len()];
        let mut prev = value(tree, x, &known, 0);
        for &f in p {
            known[f] = true;
            let v = value(tree, x, &known, 0);
            phi[f] += v - prev;
            prev = v;
        }
    }
    for v in &mut phi {
        *v /= perms.len() as f64;
    }
    phi
}

#[test]
fn tree_shap_matches_brute_force_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let n_features = rng.random_range(1..=5);
        let tree = random_tree(&mut rng, n_features, 16);
        tree.check_structure(1e-12).unwrap();
        let x: Vec<f64> = (0..n_features).map(|_| rng.random_range(-1.2..1.2)).collect();
        let fast = tree_shap_single(&tree, &x).unwrap();
        let brute = brute_force_shapley(&tree, &x).unwrap();
        let perm = permutation_shapley(&tree, &x);
        for j in 0..n_features {
            worst = worst.max((fast.phi[j] - brute[j]).abs());
            assert!((brute[j] - perm[j]).abs() < 1e-9, "oracles disagree");
        }
        let total = fast.expected + fast.phi.iter().sum::<f64>();
        assert!((total - tree.predict_row(&x)).abs() < 1e-9);
    }
    assert!(worst < 1e-9, "max |tree shap − brute force| = {worst:e}");
}

#[test]
fn depth_two_unequal_covers() {
    let tree = Tree::from_arena(
        vec![
            Node {
                cover: 10.0,
                kind: NodeKind::Split {
                    feature: 0,
                    rule: SplitRule::Threshold(0.5),
                    left: 1,
                    right: 2,
                    gain: 0.0,
                },
            },
            Node {
                cover: 7.0,
                kind: NodeKind::Split {
                    feature: 1,
                    rule: SplitRule::Threshold(0.0),
                    left: 3,
                    right: 4,
                    gain: 0.0,
                },
            },
            Node::leaf(-4.0, 3.0),
            Node::leaf(1.0, 2.0),
            Node::leaf(8.0, 5.0),
        ],
        0,
    );
    for x in [[0.0f64, -1.0], [0.0, 1.0], [1.0, -1.0], [1.0, 1.0]] {
        let fast = tree_shap_single(&tree, &x).unwrap();
        let brute = brute_force_shapley(&tree, &x).unwrap();
        for j in 0..2 {
            assert!((fast.phi[j] - brute[j]).abs() <= 1e-9);
        }
    }
}

fn synthetic(n: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    // x3 never influences the target
    let y: Vec<f64> = (0..n)
        .map(|i| 10.0 * cols[0][i] + 5.0 * (cols[1][i] > 0.5) as u8 as f64 * cols[2][i] + rng.random_range(-0.1..0.1))
        .collect();
    let mut columns: Vec<Column> = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| Column {
            schema: ColumnSchema::numeric(format!("x{j}")),
            data: ColumnData::Numeric(NumericColumn::from_values(v)),
        })
        .collect();
    columns.push(Column {
        schema: ColumnSchema::new("y", ColumnKind::Numeric, ColumnRole::Target),
        data: ColumnData::Numeric(NumericColumn::from_values(y)),
    });
    Table::new(columns).unwrap()
}

#[test]
fn ensemble_additivity_both_families() {
    let t = synthetic(400, 1);
    for strategy in [
        GrowthStrategy::LeafWise {
            num_leaves: 8,
            min_child_samples: 5,
            max_depth: 4,
        },
        GrowthStrategy::LevelWise {
            depth: 4,
            l2_leaf_reg: 1.0,
            border_count: 64,
        },
    ] {
        let model = fit::<f64>(&t, &BoostParams::new(strategy, 0.1, 60)).unwrap();
        let m = explain_ensemble(&model, &t).unwrap();
        let pred = model.predict(&t).unwrap();
        for i in 0..t.n_rows() {
            assert!((m.reconstruct(i) - pred[i]).abs() <= 1e-9 * pred[i].abs().max(1.0));
        }
    }
}

#[test]
fn ensemble_linearity_and_empty_ensemble() {
    let t = synthetic(200, 2);
    let strategy = GrowthStrategy::LevelWise {
        depth: 3,
        l2_leaf_reg: 1.0,
        border_count: 32,
    };
    let model = fit::<f64>(&t, &BoostParams::new(strategy, 0.3, 2)).unwrap();
    let m = explain_ensemble(&model, &t).unwrap();
    let x = model.encode(&t).unwrap();
    for i in 0..t.n_rows() {
        let mut sum = vec![0.0; 4];
        for tree in &model.trees {
            let e = tree_shap_single(tree, x.row(i)).unwrap();
            for j in 0..4 {
                sum[j] += 0.3 * e.phi[j];
            }
        }
        for j in 0..4 {
            assert!((m.row(i)[j] - sum[j]).abs() < 1e-12);
        }
    }

    let mut empty = model.clone();
    empty.trees.clear();
    let m = explain_ensemble(&empty, &t).unwrap();
    assert_eq!(m.base_value, model.base_score);
    assert!(m.values.iter().all(|&v| v == 0.0));
}

#[test]
fn unused_feature_has_zero_attribution() {
    let t = synthetic(300, 3);
    let strategy = GrowthStrategy::LeafWise {
        num_leaves: 6,
        min_child_samples: 10,
        max_depth: 3,
    };
    let model = fit::<f64>(&t, &BoostParams::new(strategy, 0.1, 30)).unwrap();
    let used: Vec<usize> = model.trees.iter().flat_map(|t| t.used_features()).collect();
    let m = explain_ensemble(&model, &t).unwrap();
    for j in 0..4 {
        if !used.contains(&j) {
            assert!((0..t.n_rows()).all(|i| m.row(i)[j] == 0.0));
        }
    }
}

#[test]
fn f32_explanations_are_additive() {
    let t = synthetic(200, 4);
    let strategy = GrowthStrategy::LevelWise {
        depth: 3,
        l2_leaf_reg: 1.0,
        border_count: 32,
    };
    let model = fit::<f32>(&t, &BoostParams::new(strategy, 0.1, 20)).unwrap();
    let m = explain_ensemble(&model, &t).unwrap();
    let pred = model.predict(&t).unwrap();
    for i in 0..t.n_rows() {
        assert!((m.reconstruct(i) - pred[i]).abs() <= 1e-4 * pred[i].abs().max(1.0));
    }
}
