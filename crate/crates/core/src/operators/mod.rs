//! The data-preparation operator vocabulary and its apply semantics.
//!
//! Every operator is fit on the dataset it transforms. Operators that need
//! a complete numeric matrix (row normalisation, feature construction,
//! projections, tree embeddings) report [`OperatorError::Inapplicable`]
//! when categorical or missing cells are present; callers treat that as a
//! skipped step.

mod decomp;
mod registry;
mod transforms;
mod trees;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};

pub use decomp::{fit_kernel_pca, fit_pca, fit_truncated_svd, KernelPcaModel, LinearProjection};
pub use registry::{OperatorId, OperatorSpec, OperatorType, REGISTRY};

/// Upper bound on feature columns an operator may produce.
pub const MAX_FEATURE_COLUMNS: usize = 128;

/// Default maximum pipeline length.
pub const DEFAULT_MAX_PIPELINE_LEN: usize = 9;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("operator {op} is not applicable: {reason}")]
    Inapplicable { op: OperatorId, reason: String },
    #[error("operator {op} would leave no feature columns")]
    DegenerateOutput { op: OperatorId },
    #[error("unknown operator id {0}")]
    UnknownId(i64),
    #[error("unknown operator name `{0}`")]
    UnknownName(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl OperatorError {
    pub fn is_inapplicable(&self) -> bool {
        matches!(self, OperatorError::Inapplicable { .. })
    }
}

/// Ordered operator sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pipeline(pub Vec<OperatorId>);

impl Pipeline {
    pub fn new(ops: Vec<OperatorId>) -> Self {
        Pipeline(ops)
    }

    pub fn from_ids(ids: &[i64]) -> Result<Self, OperatorError> {
        ids.iter()
            .map(|&id| OperatorId::new(id))
            .collect::<Result<Vec<_>, _>>()
            .map(Pipeline)
    }

    pub fn ops(&self) -> &[OperatorId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<OperatorId> {
        self.0.first().copied()
    }

    pub fn push(&mut self, op: OperatorId) {
        self.0.push(op);
    }

    pub fn extended(&self, op: OperatorId) -> Pipeline {
        let mut p = self.clone();
        p.push(op);
        p
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|op| op.name()).collect()
    }

    /// `a, b, c` with registry names.
    pub fn display_names(&self) -> String {
        self.names().join(", ")
    }

    /// `10,9,15`
    pub fn id_list(&self) -> String {
        self.0
            .iter()
            .map(|op| op.get().to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.display_names())
    }
}

impl From<Vec<OperatorId>> for Pipeline {
    fn from(v: Vec<OperatorId>) -> Self {
        Pipeline(v)
    }
}

/// Applies one operator. `seed` only matters for seeded operators.
pub fn apply_operator(op: OperatorId, d: &Dataset, seed: u64) -> Result<Dataset, OperatorError> {
    use transforms::*;
    match op.get() {
        -1 => Ok(d.clone()),
        0 => impute_categorical_mode(d),
        1 => impute_numeric(d, NumericFill::Mean),
        2 => impute_numeric(d, NumericFill::Median),
        3 => impute_numeric(d, NumericFill::Mode),
        4 => label_encode(d),
        5 => one_hot_encode(d, op),
        6 => scale_columns(d, op, Scaler::MinMax),
        7 => scale_columns(d, op, Scaler::MaxAbs),
        8 => scale_columns(d, op, Scaler::Robust),
        9 => scale_columns(d, op, Scaler::Standard),
        10 => scale_columns(d, op, Scaler::Quantile),
        11 => scale_columns(d, op, Scaler::Log),
        12 => scale_columns(d, op, Scaler::YeoJohnson),
        13 => normalize_rows(d, op),
        14 => scale_columns(d, op, Scaler::KBins),
        15 => polynomial(d, op, true),
        16 => polynomial(d, op, false),
        17..=20 => pca(d, op),
        21 => kernel_pca(d, op),
        22 => truncated_svd(d, op),
        23 => trees::random_trees_embedding(d, op, seed),
        24 => variance_threshold(d, op),
        other => Err(OperatorError::UnknownId(other as i64)),
    }
}

/// Left fold of [`apply_operator`]. Inapplicable steps leave the dataset
/// unchanged; each applied step is seeded with `step_seed(seed, k)` where `k`
/// counts the steps applied before it.
pub fn apply_pipeline(p: &Pipeline, d: &Dataset, seed: u64) -> Result<Dataset, OperatorError> {
    let mut current = d.clone();
    let mut applied = 0;
    for &op in p.ops() {
        match apply_operator(op, &current, step_seed(seed, applied)) {
            Ok(next) => {
                current = next;
                applied += 1;
            }
            Err(e) if e.is_inapplicable() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(current)
}

pub fn step_seed(seed: u64, step: usize) -> u64 {
    seed.wrapping_add(step as u64)
}

/// Outcome of one step applied jointly to the train and validation sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Applied,
    Skipped,
}

/// Applies one operator to both sides; if either side rejects it the step
/// is skipped on both so the two sides always see the same pipeline.
pub fn apply_operator_pair(
    op: OperatorId,
    train: &Dataset,
    val: &Dataset,
    seed: u64,
) -> Result<(Dataset, Dataset, StepStatus), OperatorError> {
    let t = apply_operator(op, train, seed);
    let v = apply_operator(op, val, seed);
    match (t, v) {
        (Ok(t), Ok(v)) => Ok((t, v, StepStatus::Applied)),
        (Err(e), _) if !e.is_inapplicable() => Err(e),
        (_, Err(e)) if !e.is_inapplicable() => Err(e),
        _ => Ok((train.clone(), val.clone(), StepStatus::Skipped)),
    }
}

#[cfg(test)]
mod tests;
