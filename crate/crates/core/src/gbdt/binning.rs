//! Quantile binning of numeric features.

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, Table};
use crate::Scalar;

use super::GbdtError;

/// Upper bin edges from the empirical quantiles of `values`.
///
/// With at most `border_count` distinct finite values every value gets its own
/// bin; otherwise edge `k` is the sorted value at position `ceil(k·n/B) − 1`,
/// and coinciding edges collapse. Non-finite values are ignored. An empty or
/// constant input yields at most one bin.
pub fn bin_edges<T: Scalar>(values: &[T], border_count: usize) -> Vec<T> {
    let mut sorted: Vec<T> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= border_count.max(1) {
        return distinct;
    }
    let n = sorted.len();
    let b = border_count.max(1);
    let mut edges: Vec<T> = (1..=b).map(|k| sorted[(k * n).div_ceil(b) - 1]).collect();
    edges.dedup();
    edges
}

/// Index of the bin holding `v`: the first edge `>= v`. Values above the
/// last edge, and NaN, land in the last bin.
#[inline]
pub fn bin_of<T: Scalar>(edges: &[T], v: T) -> usize {
    if edges.is_empty() {
        return 0;
    }
    if v.is_nan() {
        return edges.len() - 1;
    }
    edges.partition_point(|e| *e < v).min(edges.len() - 1)
}

/// How a feature's bins are laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum BinLayout<T> {
    /// Ordered bins with upper edges; splits are prefixes.
    Ordered { edges: Vec<T> },
    /// One bin per category code; splits are one-vs-rest.
    Categorical { n_levels: usize },
}

impl<T: Scalar> BinLayout<T> {
    pub fn n_bins(&self) -> usize {
        match self {
            BinLayout::Ordered { edges } => edges.len().max(1),
            BinLayout::Categorical { n_levels } => (*n_levels).max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BinnedFeature<T> {
    pub layout: BinLayout<T>,
    pub bins: Vec<u16>,
    /// Row indices ordered by bin, ascending within a bin.
    pub order: Vec<u32>,
}

/// Stable counting sort of row indices by bin.
fn order_by_bin(bins: &[u16], n_bins: usize) -> Vec<u32> {
    let mut start = vec![0usize; n_bins + 1];
    for &b in bins {
        start[b as usize + 1] += 1;
    }
    for i in 1..start.len() {
        start[i] += start[i - 1];
    }
    let mut order = vec![0u32; bins.len()];
    for (r, &b) in bins.iter().enumerate() {
        order[start[b as usize]] = r as u32;
        start[b as usize] += 1;
    }
    order
}

/// Column-major binned training matrix.
#[derive(Debug, Clone)]
pub struct BinnedData<T> {
    pub n_rows: usize,
    pub features: Vec<BinnedFeature<T>>,
}

/// A training feature prior to binning.
pub enum RawFeature<'a, T> {
    Numeric(&'a [T]),
    Categorical { codes: &'a [u32], n_levels: usize },
}

impl<T: Scalar> BinnedData<T> {
    /// Histogram cells over all features.
    pub fn n_cells(&self) -> usize {
        self.features.iter().map(|f| f.layout.n_bins()).sum()
    }

    pub fn build(features: &[RawFeature<'_, T>], border_count: usize) -> Result<Self, GbdtError> {
        let n_rows = match features.first() {
            Some(RawFeature::Numeric(v)) => v.len(),
            Some(RawFeature::Categorical { codes, .. }) => codes.len(),
            None => 0,
        };
        let max_bins = u16::MAX as usize;
        let features = features
            .iter()
            .map(|f| match f {
                RawFeature::Numeric(values) => {
                    let edges = bin_edges(values, border_count.min(max_bins));
                    let bins: Vec<u16> = values.iter().map(|&v| bin_of(&edges, v) as u16).collect();
                    let order = order_by_bin(&bins, edges.len().max(1));
                    Ok(BinnedFeature {
                        layout: BinLayout::Ordered { edges },
                        bins,
                        order,
                    })
                }
                RawFeature::Categorical { codes, n_levels } => {
                    if *n_levels > max_bins {
                        return Err(GbdtError::Invalid(format!("{n_levels} categories exceed the supported {max_bins}")));
                    }
                    if codes.iter().any(|&c| c as usize >= *n_levels) {
                        return Err(GbdtError::Invalid("category code out of range".into()));
                    }
                    let bins: Vec<u16> = codes.iter().map(|&c| c as u16).collect();
                    let order = order_by_bin(&bins, *n_levels);
                    Ok(BinnedFeature {
                        layout: BinLayout::Categorical { n_levels: *n_levels },
                        bins,
                        order,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if features.iter().any(|f| f.bins.len() != n_rows) {
            return Err(GbdtError::Invalid("feature columns differ in length".into()));
        }
        Ok(Self { n_rows, features })
    }
}

/// Bin edges for every numeric column of a table, keyed by column order.
/// Missing cells are excluded from the quantiles.
pub fn bin_features(t: &Table, border_count: usize) -> Result<Vec<(String, Vec<f64>)>, GbdtError> {
    if border_count < 2 {
        return Err(GbdtError::Invalid("border_count must be at least 2".into()));
    }
    Ok(t.features()
        .filter_map(|c| match &c.data {
            ColumnData::Numeric(n) => {
                let present: Vec<f64> = (0..n.values.len()).filter_map(|r| n.get(r)).collect();
                Some((c.schema.name.clone(), bin_edges(&present, border_count)))
            }
            ColumnData::Categorical(_) => None,
        })
        .collect())
}
