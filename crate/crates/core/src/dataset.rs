use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{BdtError, Result};

/// Observed `[min, max]` of one feature, used to map thresholds onto the
/// normalized `[0, 1]` proposal scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    /// Width used for scaling; a constant feature gets width 1.
    pub fn scale(&self) -> f64 {
        let w = self.width();
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }

    pub fn normalize(&self, value: f64) -> f64 {
        (value - self.min) / self.scale()
    }
}

/// A labeled feature matrix.
///
/// Features are stored row-major. Alongside the raw values the dataset keeps,
/// per feature, the dense rank of every value among the distinct values of
/// that column; counting distinct values inside a tree node then needs no
/// sorting.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    label_name: String,
    class_names: Vec<String>,
    n_rows: usize,
    n_features: usize,
    ranges: Vec<FeatureRange>,
    // column-major: ranks[j * n_rows + i]
    ranks: Vec<u32>,
    distinct: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from row vectors. Class names default to `"0"`, `"1"`, ...
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_count: usize,
    ) -> Result<Self> {
        let class_names = (0..class_count).map(|c| c.to_string()).collect();
        Self::with_names(rows, labels, feature_names, "label".into(), class_names)
    }

    pub fn with_names(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        label_name: String,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n = rows.len();
        let m = feature_names.len();
        let mut flat = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(BdtError::Input(format!("row {i} has {} values, expected {m}", row.len())));
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(flat, labels, feature_names, label_name, class_names)
    }

    /// Builds a dataset from a row-major flat feature buffer.
    pub fn from_flat(
        features: Vec<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        label_name: String,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let m = feature_names.len();
        let c = class_names.len();
        if m == 0 {
            return Err(BdtError::Input("dataset needs at least one feature".into()));
        }
        if c < 2 {
            return Err(BdtError::Input("dataset needs at least two classes".into()));
        }
        if !features.len().is_multiple_of(m) {
            return Err(BdtError::Input("feature buffer is not a whole number of rows".into()));
        }
        let n = features.len() / m;
        if n < 2 {
            return Err(BdtError::Input(format!("dataset needs at least two rows, got {n}")));
        }
        if labels.len() != n {
            return Err(BdtError::Input(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= c) {
            return Err(BdtError::Input(format!("label {y} at row {i} is not below class count {c}")));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(BdtError::Input(format!("non-finite value at row {}, feature {}", pos / m, pos % m)));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(BdtError::Input(format!("duplicate feature name '{name}'")));
            }
        }

        let mut ranges = Vec::with_capacity(m);
        let mut ranks = vec![0u32; n * m];
        let mut distinct = Vec::with_capacity(m);
        let mut order: Vec<usize> = (0..n).collect();
        for j in 0..m {
            let col = |i: usize| features[i * m + j];
            order.sort_by(|&a, &b| col(a).total_cmp(&col(b)));
            let mut rank = 0u32;
            for w in 0..n {
                if w > 0 && col(order[w]) != col(order[w - 1]) {
                    rank += 1;
                }
                ranks[j * n + order[w]] = rank;
            }
            distinct.push(rank as usize + 1);
            ranges.push(FeatureRange { min: col(order[0]), max: col(order[n - 1]) });
        }

        Ok(Self {
            features,
            labels,
            feature_names,
            label_name,
            class_names,
            n_rows: n,
            n_features: m,
            ranges,
            ranks,
            distinct,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// Row-major feature buffer.
    pub fn feature_buffer(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn ranges(&self) -> &[FeatureRange] {
        &self.ranges
    }

    /// Dense rank of `value(i, j)` among the distinct values of column `j`.
    #[inline]
    pub fn rank(&self, i: usize, j: usize) -> u32 {
        self.ranks[j * self.n_rows + i]
    }

    /// Number of distinct values in column `j`.
    pub fn distinct_count(&self, j: usize) -> usize {
        self.distinct[j]
    }

    pub fn max_distinct(&self) -> usize {
        self.distinct.iter().copied().max().unwrap_or(0)
    }

    /// Per-class row counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// A new dataset made of the given rows, in the given order. Schema and
    /// class names carry over; ranks and ranges are recomputed.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut flat = Vec::with_capacity(rows.len() * self.n_features);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.n_rows {
                return Err(BdtError::Input(format!("row index {i} out of range")));
            }
            flat.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::from_flat(flat, labels, self.feature_names.clone(), self.label_name.clone(), self.class_names.clone())
    }
}

/// Checks that `x` has `m` finite entries.
pub(crate) fn check_point(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(BdtError::Schema { expected: m, actual: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(BdtError::Input("feature vector contains non-finite values".into()));
    }
    Ok(())
}
