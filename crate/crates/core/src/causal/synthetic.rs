//! Data generators with planted causal effects, used to validate the
//! estimators against known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Column, ColumnData, ColumnKind, ColumnRole, ColumnSchema, NumericColumn, Table};

fn numeric(name: &str, role: ColumnRole, values: Vec<f64>) -> Column {
    Column {
        schema: ColumnSchema::new(name, ColumnKind::Numeric, role),
        data: ColumnData::Numeric(NumericColumn::from_values(values)),
    }
}

/// `Y = θ·T + g(X) + ε`, `T = m(X) + ν` with ten standard-normal
/// covariates `x0..x9`; `x0`, `x1` and `x2` confound (they drive both `T`
/// and `Y`). Columns: covariates, `treatment`, target `outcome`.
pub fn confounded_linear(n: usize, theta: f64, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let x: Vec<[f64; 10]> = (0..n).map(|_| std::array::from_fn(|_| z())).collect();
    let t: Vec<f64> = x
        .iter()
        .map(|r| 0.8 * r[0] + 0.5 * (std::f64::consts::PI * r[1] / 2.0).sin() + 0.3 * r[2] * r[2] + z())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .zip(&t)
        .map(|(r, &t)| theta * t + 2.0 * r[0] + r[1] * r[1] + 1.5 * r[3].sin() + 0.5 * r[4] - r[2] + z())
        .collect();
    let mut cols: Vec<Column> = (0..10)
        .map(|j| numeric(&format!("x{j}"), ColumnRole::Feature, x.iter().map(|r| r[j]).collect()))
        .collect();
    cols.push(numeric("treatment", ColumnRole::Feature, t));
    cols.push(numeric("outcome", ColumnRole::Target, y));
    Table::new(cols).expect("generated columns are consistent")
}

/// Binary treatment with effect `low` when `age ≤ 40` and `high` above.
/// `age ~ U(0, 80)`, `x1..x4` standard normal; the propensity depends on
/// `x1` only, so it is balanced across the two regimes.
/// Columns: `age`, `x1..x4`, `treated`, target `outcome`.
pub fn two_regime(n: usize, low: f64, high: f64, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut age = Vec::with_capacity(n);
    let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 4];
    let mut treated = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random_range(0.0..80.0);
        let x: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let p = 1.0 / (1.0 + (-0.5 * x[0]).exp());
        let t = f64::from(u8::from(rng.random::<f64>() < p));
        let effect = if a > 40.0 { high } else { low };
        let noise: f64 = StandardNormal.sample(&mut rng);
        y.push(effect * t + 0.05 * a + x[0] + x[1] * x[1] + noise);
        age.push(a);
        for j in 0..4 {
            xs[j].push(x[j]);
        }
        treated.push(t);
    }
    let mut cols = vec![numeric("age", ColumnRole::Feature, age)];
    for (j, v) in xs.into_iter().enumerate() {
        cols.push(numeric(&format!("x{}", j + 1), ColumnRole::Feature, v));
    }
    cols.push(numeric("treated", ColumnRole::Feature, treated));
    cols.push(numeric("outcome", ColumnRole::Target, y));
    Table::new(cols).expect("generated columns are consistent")
}
