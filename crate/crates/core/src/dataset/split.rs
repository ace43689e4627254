use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::table::Table;
use super::DataError;

/// Disjoint, exhaustive train/test partition of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train: Table,
    pub test: Table,
    pub seed: u64,
    pub ratio: f64,
    /// Source row indices, ascending.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Seeded uniform partition with `floor(n * ratio)` training rows.
pub fn split(t: &Table, ratio: f64, seed: u64) -> Result<SplitPair, DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::Split(format!("ratio {ratio} is outside (0, 1)")));
    }
    let n = t.n_rows();
    let n_train = (n as f64 * ratio).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(DataError::Split(format!("ratio {ratio} on {n} rows leaves an empty partition")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_rows = order[..n_train].to_vec();
    let mut test_rows = order[n_train..].to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(SplitPair {
        train: t.select_rows(&train_rows),
        test: t.select_rows(&test_rows),
        seed,
        ratio,
        train_rows,
        test_rows,
    })
}
