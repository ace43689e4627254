//! Gradient-based one-side sampling.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Scalar;

use super::GbdtError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GossParams {
    pub top_rate: f64,
    pub other_rate: f64,
}

impl Default for GossParams {
    fn default() -> Self {
        Self {
            top_rate: 0.2,
            other_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GossSample<T> {
    /// Selected rows, ascending.
    pub rows: Vec<usize>,
    /// Weight of each selected row, aligned with `rows`.
    pub weights: Vec<T>,
}

/// Keeps the `ceil(a·n)` rows of largest `|g|` at weight 1 and draws
/// `ceil(b·n)` of the remaining rows uniformly at weight `(1 − a) / b`.
/// Ties in `|g|` keep the lower row index.
pub fn goss_sample<T: Scalar>(gradients: &[T], top_rate: f64, other_rate: f64, seed: u64) -> Result<GossSample<T>, GbdtError> {
    let n = gradients.len();
    if n == 0 {
        return Err(GbdtError::Invalid("GOSS on an empty gradient vector".into()));
    }
    if !(0.0..=1.0).contains(&top_rate) || !(0.0..=1.0).contains(&other_rate) {
        return Err(GbdtError::Invalid("GOSS rates must lie in [0, 1]".into()));
    }
    if top_rate + other_rate > 1.0 + 1e-12 {
        return Err(GbdtError::Invalid(format!("GOSS rates sum to {} > 1", top_rate + other_rate)));
    }
    let n_top = ((top_rate * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        gradients[j]
            .abs()
            .partial_cmp(&gradients[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let rest = &order[n_top..];
    let n_other = if other_rate > 0.0 {
        ((other_rate * n as f64).ceil() as usize).min(rest.len())
    } else {
        0
    };

    let mut picked: Vec<(usize, T)> = order[..n_top].iter().map(|&r| (r, T::one())).collect();
    if n_other > 0 {
        let w = T::of((1.0 - top_rate) / other_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in index::sample(&mut rng, rest.len(), n_other) {
            picked.push((rest[k], w));
        }
    }
    picked.sort_unstable_by_key(|p| p.0);
    let (rows, weights) = picked.into_iter().unzip();
    Ok(GossSample { rows, weights })
}
