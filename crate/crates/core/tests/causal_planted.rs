//! DML, pseudo-outcomes, CATE and policy trees on planted ground truth.

use shapcausal::causal::synthetic::{confounded_linear, two_regime};
use shapcausal::causal::{
    constant_policy_benefit, dml_effect, fit_cate_tree, fit_policy_tree, pseudo_outcomes, whatif, DmlConfig, SplitTest, TreatmentKind,
    TreatmentSpec,
};
use shapcausal::dataset::CellValue;
use shapcausal::gbdt::{fit, BoostParams, GrowthStrategy};

fn spec(t: &shapcausal::dataset::Table, name: &str) -> TreatmentSpec {
    TreatmentSpec::infer(t, name).unwrap()
}

#[test]
fn recovers_planted_linear_effect() {
    let mut covered = 0;
    for seed in 0..5 {
        let data = confounded_linear(2000, 5.0, seed);
        let s = spec(&data, "treatment");
        assert_eq!(s.kind, TreatmentKind::Continuous);
        let fit = dml_effect(
            &data,
            &s,
            "outcome",
            &DmlConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let e = &fit.effects[0];
        assert_eq!(e.contrast, "num");
        if (e.ate - 5.0).abs() <= 3.0 * e.stderr {
            covered += 1;
        }
        assert!(e.p_value < 1e-6);
    }
    assert!(covered >= 4, "{covered}/5 intervals covered the planted effect");
}

#[test]
fn null_effect_is_not_significant() {
    let mut rejected = 0;
    for seed in 0..5 {
        let data = confounded_linear(2000, 0.0, 100 + seed);
        let fit = dml_effect(
            &data,
            &spec(&data, "treatment"),
            "outcome",
            &DmlConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        if fit.effects[0].p_value <= 0.05 {
            rejected += 1;
        }
    }
    assert!(rejected <= 1);
}

#[test]
fn folds_never_see_their_own_rows() {
    let data = confounded_linear(300, 1.0, 7);
    let fit = dml_effect(&data, &spec(&data, "treatment"), "outcome", &DmlConfig::default()).unwrap();
    let mut seen = vec![0; fit.rows.len()];
    for fold in &fit.folds {
        for &i in fold {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1), "every row is held out exactly once");
    assert!(fit.y_residual.iter().all(|v| v.is_finite()));
}

#[test]
fn pseudo_outcome_mean_equals_ate_and_cate_recovers_regimes() {
    let data = two_regime(5000, 2.0, 6.0, 11);
    let s = spec(&data, "treated");
    assert_eq!(s.kind, TreatmentKind::Binary);
    let fit = dml_effect(&data, &s, "outcome", &DmlConfig::default()).unwrap();
    let psi = pseudo_outcomes(&fit).unwrap();
    let mean = psi.iter().sum::<f64>() / psi.len() as f64;
    assert!((mean - fit.effects[0].ate).abs() <= 1e-9 * fit.effects[0].ate.abs().max(1.0));

    let x = data.select_rows(&fit.rows).drop_columns(&["treated", "outcome"]);
    let tree = fit_cate_tree(&psi, &x, 1, 100).unwrap();
    let split = tree.nodes[0].split.as_ref().expect("root split");
    assert_eq!(split.feature, "age");
    let SplitTest::Threshold(t) = split.test else { panic!() };
    assert!((t - 40.0).abs() < 4.0);
    let (l, r) = (tree.nodes[split.left].mean, tree.nodes[split.right].mean);
    assert!((l - 2.0).abs() <= 0.2 && (r - 6.0).abs() <= 0.6, "leaf means {l} {r}");

    for cost in [0.0, 3.0, 5.0, 8.0] {
        let p = fit_policy_tree(&psi, &x, cost, 2, 50).unwrap();
        let net = p.net_benefit(&psi, &x).unwrap();
        let best_constant = constant_policy_benefit(&psi, cost, true).max(constant_policy_benefit(&psi, cost, false));
        assert!(net >= best_constant, "cost {cost}: {net} < {best_constant}");
    }
}

#[test]
fn homogeneous_effect_tree_stays_flat() {
    let data = two_regime(5000, 3.0, 3.0, 5);
    let fit = dml_effect(&data, &spec(&data, "treated"), "outcome", &DmlConfig::default()).unwrap();
    let psi = pseudo_outcomes(&fit).unwrap();
    let mean = psi.iter().sum::<f64>() / psi.len() as f64;
    assert!((mean - 3.0).abs() < 0.3);
    let x = data.select_rows(&fit.rows).drop_columns(&["treated", "outcome"]);
    let tree = fit_cate_tree(&psi, &x, 1, 100).unwrap();
    if let Some(s) = &tree.nodes[0].split {
        let (l, r) = (tree.nodes[s.left].mean, tree.nodes[s.right].mean);
        assert!((l - r).abs() < 1.5, "spurious heterogeneity {l} vs {r}");
    }
}

#[test]
fn whatif_null_intervention_and_hand_traversal() {
    let data = two_regime(400, 2.0, 6.0, 3);
    let strategy = GrowthStrategy::LevelWise {
        depth: 3,
        l2_leaf_reg: 1.0,
        border_count: 64,
    };
    let model = fit::<f64>(&data, &BoostParams::new(strategy, 0.2, 1)).unwrap();
    // null intervention: every row already has its own value
    let one = data.select_rows(&[0]);
    let current = one.numeric("treated").unwrap().values[0];
    let r = whatif(&model, &one, "treated", &CellValue::Number(current)).unwrap();
    assert_eq!(r.n_affected, 0);
    assert_eq!(r.baseline_mean, r.counterfactual_mean);

    let flipped = 1.0 - current;
    let r = whatif(&model, &one, "treated", &CellValue::Number(flipped)).unwrap();
    assert_eq!(r.n_affected, 1);
    let mut row = model.encode(&one).unwrap().row(0).to_vec();
    let j = model.feature_names().iter().position(|n| n == "treated").unwrap();
    row[j] = flipped;
    let by_hand = model.base_score + model.learning_rate * model.trees[0].predict_row(&row);
    assert_eq!(r.counterfactual_mean, by_hand);

    let twice = whatif(
        &model,
        &data
            .assign("treated", &(0..400).collect::<Vec<_>>(), &CellValue::Number(1.0))
            .unwrap(),
        "treated",
        &CellValue::Number(1.0),
    )
    .unwrap();
    let once = whatif(&model, &data, "treated", &CellValue::Number(1.0)).unwrap();
    assert_eq!(twice.baseline_mean, once.counterfactual_mean);
    assert_eq!(twice.n_affected, 0);
}
