//! Fits both growth strategies on the bundled housing data and prints
//! test R², wall time, and Tree SHAP time / additivity on the test split. Usage: `ames_fit [csv] [n_trees] [strategy index]`.

use std::time::Instant;

use shapcausal::dataset::{ames_categorical_columns, clean_table, derive_features, load_table, read_header, split, Schema};
use shapcausal::gbdt::{fit, r2_score, BoostParams, GrowthStrategy};
use shapcausal::shap::explain_ensemble;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let path = args.get(1).map_or("data/ames.csv", String::as_str);
    let n_trees: usize = args.get(2).map_or(Ok(500), |s| s.parse())?;
    let header = read_header(path)?;
    let schema = Schema::from_names(&header, "Id", "SalePrice", &ames_categorical_columns())?;
    let table = clean_table(&derive_features(&load_table(path, &schema)?)?);
    let parts = split(&table, 0.8, 42)?;
    let actual = parts.test.target()?;
    let strategies = [
        GrowthStrategy::LeafWise {
            num_leaves: 8,
            min_child_samples: 20,
            max_depth: 10,
        },
        GrowthStrategy::LeafWise {
            num_leaves: 1024,
            min_child_samples: 20,
            max_depth: 10,
        },
        GrowthStrategy::LevelWise {
            depth: 5,
            l2_leaf_reg: 1.0,
            border_count: 255,
        },
        GrowthStrategy::LevelWise {
            depth: 10,
            l2_leaf_reg: 1.0,
            border_count: 255,
        },
    ];
    let only: Option<usize> = args.get(3).map(|s| s.parse()).transpose()?;
    for (i, s) in strategies.into_iter().enumerate() {
        if only.is_some_and(|o| o != i) {
            continue;
        }
        let t0 = Instant::now();
        let model = fit::<f64>(&parts.train, &BoostParams::new(s.clone(), 0.1, n_trees))?;
        let pred = model.predict(&parts.test)?;
        println!("{s:?}: test r2 {:.4} in {:.2?}", r2_score(&pred, &actual)?, t0.elapsed());
        let t1 = Instant::now();
        let m = explain_ensemble(&model, &parts.test)?;
        let worst = (0..m.n_rows)
            .map(|i| ((m.reconstruct(i) - pred[i]) / pred[i]).abs())
            .fold(0.0, f64::max);
        println!("  shap {:.2?}, max relative residual {worst:e}", t1.elapsed());
    }
    Ok(())
}
