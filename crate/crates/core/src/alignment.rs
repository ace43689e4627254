//! Rank agreement between attribution importance and causal significance.
//!
//! `C` lists causally significant features by ascending p-value, `F_m` the
//! model's features by descending mean |SHAP|. Both are cut to their common
//! features and densely re-ranked to `1..n` (relative order preserved), so
//! Spearman's `ρ = 1 − 6Σd²/(n(n²−1))` stays in `[−1, 1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{causal_ranking, CausalEffect};
use crate::shap::ImportanceRanking;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("the ranked lists share no features")]
    EmptyIntersection,
    #[error("rank correlation needs at least 2 common features, found {0}")]
    TooFew(usize),
    #[error("rank vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("not a permutation of 1..n: {0:?}")]
    NotPermutation(Vec<usize>),
    #[error("duplicate feature `{0}` in a ranked list")]
    Duplicate(String),
    #[error("k must be at least 2")]
    SmallK,
}

/// Common features ordered by position in `F_m`, with dense ranks in both lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub common: Vec<String>,
    pub r_c: Vec<usize>,
    pub r_f: Vec<usize>,
}

fn check_unique(list: &[String]) -> Result<(), AlignmentError> {
    let mut seen = std::collections::HashSet::new();
    for s in list {
        if !seen.insert(s.as_str()) {
            return Err(AlignmentError::Duplicate(s.clone()));
        }
    }
    Ok(())
}

/// Dense ranks (1-based) of `positions`, preserving their order.
fn dense_rank(positions: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by_key(|&i| positions[i]);
    let mut ranks = vec![0; positions.len()];
    for (rank, i) in order.into_iter().enumerate() {
        ranks[i] = rank + 1;
    }
    ranks
}

pub fn rank_intersection(c: &[String], f_m: &[String]) -> Result<Intersection, AlignmentError> {
    check_unique(c)?;
    check_unique(f_m)?;
    let mut common = Vec::new();
    let mut pos_c = Vec::new();
    let mut pos_f = Vec::new();
    for (i, name) in f_m.iter().enumerate() {
        if let Some(j) = c.iter().position(|x| x == name) {
            common.push(name.clone());
            pos_c.push(j);
            pos_f.push(i);
        }
    }
    if common.is_empty() {
        return Err(AlignmentError::EmptyIntersection);
    }
    Ok(Intersection {
        common,
        r_c: dense_rank(&pos_c),
        r_f: dense_rank(&pos_f),
    })
}

/// `1 − 6Σd²/(n(n²−1))` with `Σd²` and both products in exact integers.
pub fn spearman_rho<T: Scalar>(r_c: &[usize], r_f: &[usize]) -> Result<T, AlignmentError> {
    let n = r_c.len();
    if n != r_f.len() {
        return Err(AlignmentError::LengthMismatch(n, r_f.len()));
    }
    if n < 2 {
        return Err(AlignmentError::TooFew(n));
    }
    for r in [r_c, r_f] {
        let mut seen = vec![false; n + 1];
        if r.iter().any(|&v| v == 0 || v > n || std::mem::replace(&mut seen[v], true)) {
            return Err(AlignmentError::NotPermutation(r.to_vec()));
        }
    }
    let sum_d2: u128 = r_c.iter().zip(r_f).map(|(&a, &b)| (a.abs_diff(b) as u128).pow(2)).sum();
    let n = n as u128;
    let num = 6 * sum_d2;
    let den = n * (n * n - 1);
    Ok(T::one() - T::of(num as f64) / T::of(den as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignOptions {
    /// Length of `F_m`; `None` keeps every feature with nonzero importance.
    pub k: Option<usize>,
    /// Effects with a larger p-value are not causally significant.
    pub alpha: f64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self { k: None, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AlignmentResult<T> {
    /// Causal list C, ascending p-value.
    pub c: Vec<String>,
    /// Importance list F_m.
    pub f_m: Vec<String>,
    pub common: Vec<String>,
    pub r_c: Vec<usize>,
    pub r_f: Vec<usize>,
    /// `r_c − r_f` per common feature.
    pub d: Vec<i64>,
    pub n: usize,
    pub rho: T,
}

/// Top-`k` nonzero-importance features of `ranking`.
pub fn top_features<T: Scalar>(ranking: &ImportanceRanking<T>, k: Option<usize>) -> Vec<String> {
    let mut names = ranking.nonzero_names();
    if let Some(k) = k {
        names.truncate(k);
    }
    names
}

/// Aligns one model's importance order with the causal order.
///
/// With `union_with`, `F_m` becomes this model's ranking restricted to its
/// own top features plus the given ones (e.g. another model's top-k), still
/// in this model's importance order.
pub fn align_report<T: Scalar>(
    shap_ranking: &ImportanceRanking<T>,
    causal_table: &[CausalEffect],
    opts: &AlignOptions,
    union_with: Option<&[String]>,
) -> Result<AlignmentResult<T>, AlignmentError> {
    if opts.k.is_some_and(|k| k < 2) {
        return Err(AlignmentError::SmallK);
    }
    let c = causal_ranking(causal_table, opts.alpha);
    let mut f_m = top_features(shap_ranking, opts.k);
    if let Some(extra) = union_with {
        let keep: Vec<String> = f_m.iter().chain(extra).cloned().collect();
        f_m = shap_ranking.names().into_iter().filter(|n| keep.contains(n)).collect();
    }
    let ix = rank_intersection(&c, &f_m)?;
    let rho = spearman_rho::<T>(&ix.r_c, &ix.r_f)?;
    let d = ix.r_c.iter().zip(&ix.r_f).map(|(&a, &b)| a as i64 - b as i64).collect();
    Ok(AlignmentResult {
        c,
        f_m,
        n: ix.common.len(),
        common: ix.common,
        r_c: ix.r_c,
        r_f: ix.r_f,
        d,
        rho,
    })
}
