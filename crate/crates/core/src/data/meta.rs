use serde::{Deserialize, Serialize};

use super::stats::{pearson, skewness, sorted_observed, tukey_fences, variance};
use super::{ColumnData, Dataset};

/// Columns with `|skewness|` above this are reported as skewed.
pub const SKEWED_COLUMN_THRESHOLD: f64 = 1.0;

/// Named positions inside a [`StateVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaFeature {
    Log10Rows,
    NCols,
    FracMissing,
    FracCategorical,
    MeanAbsSkewness,
    MaxAbsSkewness,
    FracOutlierCells,
    MeanAbsPairwiseCorrelation,
    NClasses,
    MajorityClassFraction,
    FracZeroVarianceCols,
    PipelineLength,
}

impl MetaFeature {
    pub const ALL: [MetaFeature; StateVector::DIM] = [
        MetaFeature::Log10Rows,
        MetaFeature::NCols,
        MetaFeature::FracMissing,
        MetaFeature::FracCategorical,
        MetaFeature::MeanAbsSkewness,
        MetaFeature::MaxAbsSkewness,
        MetaFeature::FracOutlierCells,
        MetaFeature::MeanAbsPairwiseCorrelation,
        MetaFeature::NClasses,
        MetaFeature::MajorityClassFraction,
        MetaFeature::FracZeroVarianceCols,
        MetaFeature::PipelineLength,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MetaFeature::Log10Rows => "log10_rows",
            MetaFeature::NCols => "n_cols",
            MetaFeature::FracMissing => "frac_missing",
            MetaFeature::FracCategorical => "frac_categorical",
            MetaFeature::MeanAbsSkewness => "mean_abs_skewness",
            MetaFeature::MaxAbsSkewness => "max_abs_skewness",
            MetaFeature::FracOutlierCells => "frac_outlier_cells",
            MetaFeature::MeanAbsPairwiseCorrelation => "mean_abs_pairwise_correlation",
            MetaFeature::NClasses => "n_classes",
            MetaFeature::MajorityClassFraction => "majority_class_fraction",
            MetaFeature::FracZeroVarianceCols => "frac_zero_variance_cols",
            MetaFeature::PipelineLength => "pipeline_length",
        }
    }
}

/// Fixed-length numeric description of a dataset at some point of a
/// pipeline. Used both as the retrieval key of the experience pool and as
/// the source of prompt statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub [f64; StateVector::DIM]);

impl StateVector {
    pub const DIM: usize = 12;

    pub fn get(&self, f: MetaFeature) -> f64 {
        self.0[f.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn squared_l2(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

struct NumericColumnStats {
    skew: f64,
    outliers: usize,
    observed: usize,
    zero_variance: bool,
}

fn numeric_stats(cells: &[Option<f64>]) -> NumericColumnStats {
    let sorted = sorted_observed(cells);
    let (lo, hi) = tukey_fences(&sorted);
    NumericColumnStats {
        skew: skewness(&sorted),
        outliers: sorted.iter().filter(|&&x| x < lo || x > hi).count(),
        observed: sorted.len(),
        zero_variance: variance(&sorted) == 0.0,
    }
}

/// Computes the 12 meta-features of `d`. All statistics are independent of
/// row order.
pub fn compute_meta_features(d: &Dataset, pipeline_len: usize) -> StateVector {
    let n_rows = d.n_rows();
    let n_cols = d.n_cols();
    let total_cells = n_rows * n_cols;

    let mut missing = 0usize;
    let mut categorical = 0usize;
    let mut zero_var = 0usize;
    let mut skews = Vec::new();
    let mut outliers = 0usize;
    let mut observed_numeric = 0usize;
    let mut numeric_cols: Vec<&[Option<f64>]> = Vec::new();

    for col in d.columns() {
        missing += col.data.missing_count();
        match &col.data {
            ColumnData::Numeric(cells) => {
                let s = numeric_stats(cells);
                skews.push(s.skew.abs());
                outliers += s.outliers;
                observed_numeric += s.observed;
                if s.zero_variance {
                    zero_var += 1;
                }
                numeric_cols.push(cells);
            }
            ColumnData::Categorical(cells) => {
                categorical += 1;
                let mut seen: Vec<&String> = cells.iter().flatten().collect();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() <= 1 {
                    zero_var += 1;
                }
            }
        }
    }

    let mut corr_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..numeric_cols.len() {
        for j in i + 1..numeric_cols.len() {
            corr_sum += pearson(numeric_cols[i], numeric_cols[j]).abs();
            pairs += 1;
        }
    }

    let classes = d.classes();
    let majority = classes
        .iter()
        .map(|c| d.target().iter().filter(|t| *t == c).count())
        .max()
        .unwrap_or(0);

    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let mean_skew = if skews.is_empty() {
        0.0
    } else {
        skews.iter().sum::<f64>() / skews.len() as f64
    };

    StateVector([
        (n_rows as f64).log10(),
        n_cols as f64,
        ratio(missing, total_cells),
        ratio(categorical, n_cols),
        mean_skew,
        skews.iter().copied().fold(0.0, f64::max),
        ratio(outliers, observed_numeric),
        if pairs == 0 {
            0.0
        } else {
            corr_sum / pairs as f64
        },
        classes.len() as f64,
        ratio(majority, n_rows),
        ratio(zero_var, n_cols),
        pipeline_len as f64,
    ])
}

/// Human-readable statistics rendered into advisor prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_rows: usize,
    pub n_cols: usize,
    pub has_missing: bool,
    pub n_numeric: usize,
    pub n_categorical: usize,
    pub skewed_columns: Vec<String>,
    /// Column name and percentage of its observed cells outside the Tukey fences.
    pub outlier_columns: Vec<(String, f64)>,
}

impl DatasetSummary {
    pub fn feature_types(&self) -> String {
        match (self.n_numeric, self.n_categorical) {
            (_, 0) => "All numerical".to_string(),
            (0, _) => "All categorical".to_string(),
            (n, c) => format!("Mixed ({n} numerical, {c} categorical)"),
        }
    }
}

pub fn summarize(d: &Dataset) -> DatasetSummary {
    let mut skewed = Vec::new();
    let mut outlier_columns = Vec::new();
    let mut n_numeric = 0;
    for col in d.columns() {
        if let ColumnData::Numeric(cells) = &col.data {
            n_numeric += 1;
            let s = numeric_stats(cells);
            if s.skew.abs() > SKEWED_COLUMN_THRESHOLD {
                skewed.push(col.name.clone());
            }
            if s.outliers > 0 {
                outlier_columns.push((
                    col.name.clone(),
                    100.0 * s.outliers as f64 / s.observed as f64,
                ));
            }
        }
    }
    DatasetSummary {
        n_rows: d.n_rows(),
        n_cols: d.n_cols(),
        has_missing: d.has_missing(),
        n_numeric,
        n_categorical: d.n_cols() - n_numeric,
        skewed_columns: skewed,
        outlier_columns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;

    fn labels(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| if i % 3 == 0 { "a" } else { "b" }.to_string())
            .collect()
    }

    #[test]
    fn symmetric_column_has_no_skew_or_missing() {
        let d = Dataset::new(vec![Column::dense("a", &[0.0, 5.0, 10.0])], "y", labels(3)).unwrap();
        let v = compute_meta_features(&d, 0);
        assert_eq!(v.get(MetaFeature::FracMissing), 0.0);
        assert_eq!(v.get(MetaFeature::MeanAbsSkewness), 0.0);
        assert_eq!(v.get(MetaFeature::NCols), 1.0);
        assert_eq!(v.get(MetaFeature::NClasses), 2.0);
        assert!((v.get(MetaFeature::MajorityClassFraction) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn missing_fraction_counts_cells() {
        let d = Dataset::new(
            vec![Column::numeric("a", vec![Some(1.0), None, Some(3.0)])],
            "y",
            labels(3),
        )
        .unwrap();
        let v = compute_meta_features(&d, 2);
        assert!((v.get(MetaFeature::FracMissing) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(v.get(MetaFeature::PipelineLength), 2.0);
    }

    #[test]
    fn iqr_rule_flags_single_outlier() {
        // Sorted [1,1,1,1,100]: Q1 = Q3 = 1, IQR = 0, fences [1, 1].
        let d = Dataset::new(
            vec![Column::dense("a", &[1.0, 1.0, 100.0, 1.0, 1.0])],
            "y",
            labels(5),
        )
        .unwrap();
        let v = compute_meta_features(&d, 0);
        assert!((v.get(MetaFeature::FracOutlierCells) - 0.2).abs() < 1e-15);
        let s = summarize(&d);
        assert_eq!(s.outlier_columns, vec![("a".to_string(), 20.0)]);
    }

    #[test]
    fn log_rows_of_reference_size() {
        let n = 16693;
        let cols = (0..10)
            .map(|c| Column::dense(format!("f{c}"), &vec![c as f64; n]))
            .collect();
        let d = Dataset::new(cols, "y", labels(n)).unwrap();
        let v = compute_meta_features(&d, 0);
        assert!((v.get(MetaFeature::Log10Rows) - 4.2226).abs() < 1e-4);
        assert_eq!(v.get(MetaFeature::FracMissing), 0.0);
        assert_eq!(v.get(MetaFeature::NCols), 10.0);
        assert_eq!(v.get(MetaFeature::FracZeroVarianceCols), 1.0);
    }

    #[test]
    fn correlation_and_categorical_fraction() {
        let d = Dataset::new(
            vec![
                Column::dense("a", &[1.0, 2.0, 3.0, 4.0]),
                Column::dense("b", &[2.0, 4.0, 6.0, 8.0]),
                Column::categorical(
                    "c",
                    ["x", "y", "x", "y"]
                        .iter()
                        .map(|s| Some(s.to_string()))
                        .collect(),
                ),
            ],
            "y",
            labels(4),
        )
        .unwrap();
        let v = compute_meta_features(&d, 0);
        assert!((v.get(MetaFeature::MeanAbsPairwiseCorrelation) - 1.0).abs() < 1e-12);
        assert!((v.get(MetaFeature::FracCategorical) - 1.0 / 3.0).abs() < 1e-15);
        let s = summarize(&d);
        assert_eq!(s.feature_types(), "Mixed (2 numerical, 1 categorical)");
    }
}
