//! Tabular datasets: typed feature columns with missing cells plus a
//! categorical class label.

mod csv_io;
mod meta;
mod split;
pub(crate) mod stats;

use std::collections::BTreeSet;
use std::path::PathBuf;

use thiserror::Error;

pub use csv_io::{load_csv, load_csv_with};
pub use meta::{compute_meta_features, summarize, DatasetSummary, MetaFeature, StateVector};
pub use split::{split, split_indices, SplitIndices, SplitSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("target column `{0}` not present in header")]
    MissingTargetColumn(String),
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("target has a missing value at row {0}")]
    TargetHasMissing(usize),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{name}` has {got} cells, expected {expected}")]
    RaggedColumn {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("invalid split specification: {0}")]
    InvalidSplit(String),
    #[error("split too small: {0}")]
    SplitTooSmall(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Cell storage for one feature column. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn missing_count(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            ColumnData::Categorical(v) => v.iter().filter(|c| c.is_none()).count(),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, cells: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(cells),
        }
    }

    /// Convenience constructor for a fully observed numeric column.
    pub fn dense(name: impl Into<String>, values: &[f64]) -> Self {
        Column::numeric(name, values.iter().copied().map(Some).collect())
    }

    pub fn categorical(name: impl Into<String>, cells: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical(cells),
        }
    }

    pub fn kind(&self) -> ColumnKind {
        self.data.kind()
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[Option<String>]> {
        match &self.data {
            ColumnData::Categorical(v) => Some(v),
            ColumnData::Numeric(_) => None,
        }
    }
}

/// A validated table of feature columns plus a label column.
///
/// Every column holds exactly `n_rows` cells, column names are unique and
/// the label has no missing entries. Values are immutable once built;
/// operators always return a fresh dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    target_name: String,
    target: Vec<String>,
}

impl Dataset {
    pub fn new(
        columns: Vec<Column>,
        target_name: impl Into<String>,
        target: Vec<String>,
    ) -> Result<Self, DataError> {
        let n_rows = target.len();
        if n_rows == 0 {
            return Err(DataError::EmptyDataset);
        }
        let mut seen = BTreeSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(DataError::DuplicateColumn(col.name.clone()));
            }
            if col.data.len() != n_rows {
                return Err(DataError::RaggedColumn {
                    name: col.name.clone(),
                    got: col.data.len(),
                    expected: n_rows,
                });
            }
            if let ColumnData::Numeric(v) = &col.data {
                debug_assert!(v.iter().flatten().all(|x| x.is_finite()));
            }
        }
        Ok(Dataset {
            columns,
            target_name: target_name.into(),
            target,
        })
    }

    /// Same label, new feature columns. Used by operators; the row count
    /// and name uniqueness are re-checked.
    pub fn with_columns(&self, columns: Vec<Column>) -> Result<Self, DataError> {
        Dataset::new(columns, self.target_name.clone(), self.target.clone())
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn target(&self) -> &[String] {
        &self.target
    }

    /// Distinct labels in lexicographic order.
    pub fn classes(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.target.iter().collect();
        set.into_iter().cloned().collect()
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.data.missing_count() > 0)
    }

    pub fn has_categorical(&self) -> bool {
        self.columns
            .iter()
            .any(|c| c.kind() == ColumnKind::Categorical)
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, DataError> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                data: c.data.select(rows),
            })
            .collect();
        let target = rows.iter().map(|&r| self.target[r].clone()).collect();
        Dataset::new(columns, self.target_name.clone(), target)
    }

    /// Exact equality that also distinguishes `0.0` from `-0.0`.
    pub fn bit_identical(&self, other: &Dataset) -> bool {
        if self.target_name != other.target_name
            || self.target != other.target
            || self.columns.len() != other.columns.len()
        {
            return false;
        }
        self.columns.iter().zip(&other.columns).all(|(a, b)| {
            a.name == b.name
                && match (&a.data, &b.data) {
                    (ColumnData::Numeric(x), ColumnData::Numeric(y)) => {
                        x.len() == y.len()
                            && x.iter()
                                .zip(y)
                                .all(|(p, q)| p.map(f64::to_bits) == q.map(f64::to_bits))
                    }
                    (ColumnData::Categorical(x), ColumnData::Categorical(y)) => x == y,
                    _ => false,
                }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_ragged_and_duplicate_columns() {
        let err = Dataset::new(
            vec![Column::dense("a", &[1.0, 2.0])],
            "y",
            labels(&["x", "y", "x"]),
        )
        .unwrap_err();
        assert!(matches!(err, DataError::RaggedColumn { .. }));

        let err = Dataset::new(
            vec![Column::dense("a", &[1.0]), Column::dense("a", &[2.0])],
            "y",
            labels(&["x"]),
        )
        .unwrap_err();
        assert!(matches!(err, DataError::DuplicateColumn(_)));
    }

    #[test]
    fn empty_target_is_rejected() {
        assert!(matches!(
            Dataset::new(vec![], "y", vec![]),
            Err(DataError::EmptyDataset)
        ));
    }

    #[test]
    fn classes_are_sorted_and_distinct() {
        let d = Dataset::new(
            vec![Column::dense("a", &[1.0, 2.0, 3.0])],
            "y",
            labels(&["b", "a", "b"]),
        )
        .unwrap();
        assert_eq!(d.classes(), labels(&["a", "b"]));
    }

    #[test]
    fn bit_identity_sees_signed_zero() {
        let a = Dataset::new(vec![Column::dense("a", &[0.0])], "y", labels(&["x"])).unwrap();
        let b = Dataset::new(vec![Column::dense("a", &[-0.0])], "y", labels(&["x"])).unwrap();
        assert_eq!(a, b);
        assert!(!a.bit_identical(&b));
    }
}
