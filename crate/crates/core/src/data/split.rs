use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.6,
            val_fraction: 0.2,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let f = [self.train_fraction, self.val_fraction, self.test_fraction];
        if f.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(DataError::InvalidSplit(
                "fractions must be positive".to_string(),
            ));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidSplit(format!(
                "fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Row counts for a dataset of `n` rows; train and validation are
    /// rounded, test takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let n_train = ((n as f64) * self.train_fraction).round() as usize;
        let n_val = ((n as f64) * self.val_fraction).round() as usize;
        let n_train = n_train.min(n);
        let n_val = n_val.min(n - n_train);
        (n_train, n_val, n - n_train - n_val)
    }
}

/// Row indices of a three-way split, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified, seeded partition of row indices.
///
/// Rows of each class are shuffled, then all rows are interleaved by their
/// relative position `(j + 1/2) / m` inside their class, so every prefix of
/// the ordering carries each class in proportion (within one row).
pub fn split_indices(d: &Dataset, spec: &SplitSpec) -> Result<SplitIndices, DataError> {
    spec.validate()?;
    let n = d.n_rows();
    let (n_train, n_val, n_test) = spec.sizes(n);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(DataError::SplitTooSmall(format!(
            "{n} rows give split sizes ({n_train}, {n_val}, {n_test})"
        )));
    }

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (row, label) in d.target().iter().enumerate() {
        by_class.entry(label.as_str()).or_default().push(row);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // (position in class, class size, class rank, row)
    let mut keyed: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(n);
    for (rank, rows) in by_class.values_mut().enumerate() {
        rows.shuffle(&mut rng);
        let m = rows.len();
        keyed.extend(rows.iter().enumerate().map(|(j, &row)| (j, m, rank, row)));
    }
    keyed.sort_by(|a, b| {
        // (2j + 1) / 2m compared exactly in integers
        let lhs = (2 * a.0 + 1) * b.1;
        let rhs = (2 * b.0 + 1) * a.1;
        match lhs.cmp(&rhs) {
            Ordering::Equal => a.2.cmp(&b.2),
            o => o,
        }
    });
    let order: Vec<usize> = keyed.into_iter().map(|k| k.3).collect();

    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    let classes_in_train = {
        let mut seen: Vec<&str> = train.iter().map(|&r| d.target()[r].as_str()).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    };
    if classes_in_train < by_class.len() {
        return Err(DataError::SplitTooSmall(format!(
            "train split holds {classes_in_train} of {} classes",
            by_class.len()
        )));
    }
    if classes_in_train < 2 {
        return Err(DataError::SplitTooSmall(
            "train split needs at least two classes".to_string(),
        ));
    }
    Ok(SplitIndices { train, val, test })
}

pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), DataError> {
    let idx = split_indices(d, spec)?;
    Ok((
        d.select_rows(&idx.train)?,
        d.select_rows(&idx.val)?,
        d.select_rows(&idx.test)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;

    fn dataset(labels: Vec<String>) -> Dataset {
        let n = labels.len();
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Dataset::new(vec![Column::dense("a", &values)], "y", labels).unwrap()
    }

    fn two_class(n: usize) -> Dataset {
        dataset((0..n).map(|i| (i % 2).to_string()).collect())
    }

    #[test]
    fn sizes_of_hundred_rows() {
        let d = two_class(100);
        let s = split_indices(&d, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
    }

    #[test]
    fn partition_is_exact_and_deterministic() {
        let d = two_class(101);
        let spec = SplitSpec::default();
        let a = split_indices(&d, &spec).unwrap();
        let b = split_indices(&d, &spec).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a
            .train
            .iter()
            .chain(&a.val)
            .chain(&a.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());

        let other = split_indices(&d, &SplitSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn stratification_within_one_row() {
        // Oracle: count labels in each split directly.
        for n in [50usize, 100, 101, 137] {
            let d = two_class(n);
            let s = split_indices(&d, &SplitSpec::default()).unwrap();
            let ones = s.train.iter().filter(|&&r| d.target()[r] == "1").count() as f64;
            let expected = s.train.len() as f64 * (n / 2) as f64 / n as f64;
            assert!(
                (ones - expected).abs() <= 1.0,
                "n={n} ones={ones} expected={expected}"
            );
        }
    }

    #[test]
    fn imbalanced_classes_keep_minority_in_train() {
        let mut labels: Vec<String> = (0..40).map(|_| "a".to_string()).collect();
        labels.extend((0..3).map(|_| "b".to_string()));
        let d = dataset(labels);
        let s = split_indices(&d, &SplitSpec::default()).unwrap();
        assert!(s.train.iter().any(|&r| d.target()[r] == "b"));
    }

    #[test]
    fn too_small_and_invalid_specs() {
        let d = two_class(2);
        assert!(matches!(
            split_indices(&d, &SplitSpec::default()),
            Err(DataError::SplitTooSmall(_))
        ));
        let d = dataset((0..10).map(|_| "only".to_string()).collect());
        assert!(matches!(
            split_indices(&d, &SplitSpec::default()),
            Err(DataError::SplitTooSmall(_))
        ));
        let bad = SplitSpec {
            train_fraction: 0.7,
            ..SplitSpec::default()
        };
        assert!(matches!(bad.validate(), Err(DataError::InvalidSplit(_))));
    }
}
