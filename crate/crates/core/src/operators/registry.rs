use std::fmt;

use serde::{Deserialize, Serialize};

use super::OperatorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorType {
    Imputer,
    Encoder,
    FeaturePreprocessing,
    FeatureEngineering,
    FeatureSelection,
    Blank,
}

impl OperatorType {
    pub fn label(self) -> &'static str {
        match self {
            OperatorType::Imputer => "Imputer",
            OperatorType::Encoder => "Encoder",
            OperatorType::FeaturePreprocessing => "FeaturePreprocessing",
            OperatorType::FeatureEngineering => "FeatureEngineering",
            OperatorType::FeatureSelection => "FeatureSelection",
            OperatorType::Blank => "Blank",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorSpec {
    pub id: i8,
    pub name: &'static str,
    pub op_type: OperatorType,
    /// Output depends on the step seed.
    pub seeded: bool,
}

const fn spec(id: i8, name: &'static str, op_type: OperatorType) -> OperatorSpec {
    OperatorSpec {
        id,
        name,
        op_type,
        seeded: false,
    }
}

use OperatorType::*;

/// All operators in canonical order: ids 0..=24, then the blank operation.
pub static REGISTRY: [OperatorSpec; 26] = [
    spec(0, "ImputerCatPrim", Imputer),
    spec(1, "ImputerMean", Imputer),
    spec(2, "ImputerMedian", Imputer),
    spec(3, "ImputerNum", Imputer),
    spec(4, "LabelEncoder", Encoder),
    spec(5, "OneHotEncoder", Encoder),
    spec(6, "MinMaxScaler", FeaturePreprocessing),
    spec(7, "MaxAbsScaler", FeaturePreprocessing),
    spec(8, "RobustScaler", FeaturePreprocessing),
    spec(9, "StandardScaler", FeaturePreprocessing),
    spec(10, "QuantileTransformer", FeaturePreprocessing),
    spec(11, "LogTransformer", FeaturePreprocessing),
    spec(12, "PowerTransformer", FeaturePreprocessing),
    spec(13, "Normalizer", FeaturePreprocessing),
    spec(14, "KBinsDiscretizerOrdinal", FeaturePreprocessing),
    spec(15, "PolynomialFeatures", FeatureEngineering),
    spec(16, "InteractionFeatures", FeatureEngineering),
    spec(17, "PCA_AUTO", FeatureEngineering),
    spec(18, "PCA_LAPACK", FeatureEngineering),
    spec(19, "PCA_ARPACK", FeatureEngineering),
    spec(20, "IncrementalPCA", FeatureEngineering),
    spec(21, "KernelPCA", FeatureEngineering),
    spec(22, "TruncatedSVD", FeatureEngineering),
    OperatorSpec {
        id: 23,
        name: "RandomTreesEmbedding",
        op_type: FeatureEngineering,
        seeded: true,
    },
    spec(24, "VarianceThreshold", FeatureSelection),
    spec(-1, "BlankOperation", Blank),
];

/// Operator identifier in `-1..=24`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct OperatorId(i8);

impl OperatorId {
    pub const BLANK: OperatorId = OperatorId(-1);
    pub const COUNT: usize = REGISTRY.len();

    pub fn new(id: i64) -> Result<Self, OperatorError> {
        if (-1..=24).contains(&id) {
            Ok(OperatorId(id as i8))
        } else {
            Err(OperatorError::UnknownId(id))
        }
    }

    pub fn get(self) -> i8 {
        self.0
    }

    /// Position in [`REGISTRY`].
    pub fn canonical_index(self) -> usize {
        if self.0 < 0 {
            REGISTRY.len() - 1
        } else {
            self.0 as usize
        }
    }

    pub fn from_canonical_index(i: usize) -> Option<Self> {
        REGISTRY.get(i).map(|s| OperatorId(s.id))
    }

    pub fn spec(self) -> &'static OperatorSpec {
        &REGISTRY[self.canonical_index()]
    }

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    pub fn op_type(self) -> OperatorType {
        self.spec().op_type
    }

    /// Resolves a registry name ignoring case and whitespace.
    pub fn from_name(name: &str) -> Result<Self, OperatorError> {
        let key = normalize(name);
        REGISTRY
            .iter()
            .find(|s| normalize(s.name) == key)
            .map(|s| OperatorId(s.id))
            .ok_or_else(|| OperatorError::UnknownName(name.trim().to_string()))
    }

    pub fn all() -> impl Iterator<Item = OperatorId> {
        REGISTRY.iter().map(|s| OperatorId(s.id))
    }
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

impl TryFrom<i64> for OperatorId {
    type Error = OperatorError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        OperatorId::new(v)
    }
}

impl From<OperatorId> for i64 {
    fn from(op: OperatorId) -> i64 {
        op.0 as i64
    }
}

impl fmt::Debug for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.0)
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
