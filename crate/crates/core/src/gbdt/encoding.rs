//! Ordered target statistics for categorical features.

use super::GbdtError;

/// Encodes category codes with target statistics that only look backwards.
///
/// Rows are visited in `permutation` order; each row gets
/// `(sum of earlier same-category targets + a·p) / (earlier count + a)`
/// with prior `p` and prior weight `a`, and only then contributes its own
/// target. A row's encoding therefore never depends on its own target or on
/// any row later in the permutation.
pub fn ordered_target_encode(
    codes: &[u32],
    target: &[f64],
    permutation: &[usize],
    prior: f64,
    prior_weight: f64,
) -> Result<Vec<f64>, GbdtError> {
    let n = codes.len();
    if target.len() != n || permutation.len() != n {
        return Err(GbdtError::Invalid("codes, target and permutation differ in length".into()));
    }
    let mut seen = vec![false; n];
    for &p in permutation {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(GbdtError::Invalid("permutation is not a bijection".into()));
        }
    }
    let n_levels = codes.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut sums = vec![0.0; n_levels];
    let mut counts = vec![0.0; n_levels];
    let mut encoded = vec![0.0; n];
    for &row in permutation {
        let c = codes[row] as usize;
        encoded[row] = (sums[c] + prior_weight * prior) / (counts[c] + prior_weight);
        sums[c] += target[row];
        counts[c] += 1.0;
    }
    Ok(encoded)
}

/// Whole-sample statistic per level, used when encoding rows at prediction time.
pub fn full_target_statistics(codes: &[u32], n_levels: usize, target: &[f64], prior: f64, prior_weight: f64) -> Vec<f64> {
    let mut sums = vec![0.0; n_levels];
    let mut counts = vec![0.0; n_levels];
    for (&c, &y) in codes.iter().zip(target) {
        sums[c as usize] += y;
        counts[c as usize] += 1.0;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, n)| (s + prior_weight * prior) / (n + prior_weight))
        .collect()
}
