use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use super::decomp::{fit_kernel_pca, fit_pca, fit_truncated_svd};
use super::{OperatorError, OperatorId, MAX_FEATURE_COLUMNS};
use crate::data::stats::{mean, median_sorted, quantile_sorted, sorted_observed, variance};
use crate::data::{Column, ColumnData, Dataset};

/// Share of total variance the PCA family keeps.
pub(super) const PCA_VARIANCE_TARGET: f64 = 0.95;
pub(super) const KBINS: usize = 5;
pub(super) const TRUNCATED_SVD_MAX_COMPONENTS: usize = 8;
pub(super) const KERNEL_PCA_MAX_COMPONENTS: usize = 8;

fn inapplicable(op: OperatorId, reason: impl Into<String>) -> OperatorError {
    OperatorError::Inapplicable {
        op,
        reason: reason.into(),
    }
}

/// Appends `#k` to names that would collide with earlier ones.
pub(super) fn dedupe_names(columns: &mut [Column]) {
    let mut seen = BTreeSet::new();
    for col in columns.iter_mut() {
        if !seen.insert(col.name.clone()) {
            let mut k = 1;
            while seen.contains(&format!("{}#{k}", col.name)) {
                k += 1;
            }
            col.name = format!("{}#{k}", col.name);
            seen.insert(col.name.clone());
        }
    }
}

fn finish(d: &Dataset, op: OperatorId, mut columns: Vec<Column>) -> Result<Dataset, OperatorError> {
    if columns.is_empty() {
        return Err(OperatorError::DegenerateOutput { op });
    }
    if columns.len() > MAX_FEATURE_COLUMNS && columns.len() > d.n_cols() {
        return Err(inapplicable(
            op,
            format!("output would have {} columns", columns.len()),
        ));
    }
    dedupe_names(&mut columns);
    Ok(d.with_columns(columns)?)
}

pub(super) enum NumericFill {
    Mean,
    Median,
    Mode,
}

/// Most frequent observed value; ties go to the smallest.
fn numeric_mode(sorted: &[f64]) -> f64 {
    let mut best = (0usize, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best.0 {
            best = (j - i, sorted[i]);
        }
        i = j;
    }
    best.1
}

pub(super) fn impute_numeric(d: &Dataset, fill: NumericFill) -> Result<Dataset, OperatorError> {
    if !d
        .columns()
        .iter()
        .any(|c| matches!(&c.data, ColumnData::Numeric(v) if v.iter().any(Option::is_none)))
    {
        return Ok(d.clone());
    }
    let columns = d
        .columns()
        .iter()
        .map(|c| match &c.data {
            ColumnData::Numeric(cells) if cells.iter().any(Option::is_none) => {
                let sorted = sorted_observed(cells);
                let value = match fill {
                    NumericFill::Mean => mean(&sorted),
                    NumericFill::Median => median_sorted(&sorted),
                    NumericFill::Mode => numeric_mode(&sorted),
                };
                Column::numeric(
                    c.name.clone(),
                    cells.iter().map(|x| Some(x.unwrap_or(value))).collect(),
                )
            }
            _ => c.clone(),
        })
        .collect();
    Ok(d.with_columns(columns)?)
}

/// Most frequent category; ties go to the lexicographically smallest.
pub(crate) fn categorical_mode(cells: &[Option<String>]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in cells.iter().flatten() {
        *counts.entry(c.as_str()).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (k, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((k, n));
        }
    }
    best.map(|(k, _)| k.to_string())
}

pub(super) fn impute_categorical_mode(d: &Dataset) -> Result<Dataset, OperatorError> {
    if !d
        .columns()
        .iter()
        .any(|c| matches!(&c.data, ColumnData::Categorical(v) if v.iter().any(Option::is_none)))
    {
        return Ok(d.clone());
    }
    let columns = d
        .columns()
        .iter()
        .map(|c| match &c.data {
            ColumnData::Categorical(cells) if cells.iter().any(Option::is_none) => {
                let fill = categorical_mode(cells).unwrap_or_else(|| "missing".to_string());
                Column::categorical(
                    c.name.clone(),
                    cells
                        .iter()
                        .map(|x| Some(x.clone().unwrap_or_else(|| fill.clone())))
                        .collect(),
                )
            }
            _ => c.clone(),
        })
        .collect();
    Ok(d.with_columns(columns)?)
}

fn categories(cells: &[Option<String>]) -> Vec<&str> {
    let set: BTreeSet<&str> = cells.iter().flatten().map(String::as_str).collect();
    set.into_iter().collect()
}

pub(super) fn label_encode(d: &Dataset) -> Result<Dataset, OperatorError> {
    if !d.has_categorical() {
        return Ok(d.clone());
    }
    let columns = d
        .columns()
        .iter()
        .map(|c| match &c.data {
            ColumnData::Categorical(cells) => {
                let cats = categories(cells);
                Column::numeric(
                    c.name.clone(),
                    cells
                        .iter()
                        .map(|x| {
                            x.as_deref()
                                .map(|v| cats.binary_search(&v).expect("category present") as f64)
                        })
                        .collect(),
                )
            }
            _ => c.clone(),
        })
        .collect();
    Ok(d.with_columns(columns)?)
}

pub(super) fn one_hot_encode(d: &Dataset, op: OperatorId) -> Result<Dataset, OperatorError> {
    if !d.has_categorical() {
        return Ok(d.clone());
    }
    let mut columns = Vec::new();
    for c in d.columns() {
        match &c.data {
            ColumnData::Categorical(cells) => {
                for cat in categories(cells) {
                    columns.push(Column::numeric(
                        format!("{}={}", c.name, cat),
                        cells
                            .iter()
                            .map(|x| Some(if x.as_deref() == Some(cat) { 1.0 } else { 0.0 }))
                            .collect(),
                    ));
                }
            }
            _ => columns.push(c.clone()),
        }
    }
    finish(d, op, columns)
}

#[derive(Debug, Clone, Copy)]
pub(super) enum Scaler {
    MinMax,
    MaxAbs,
    Robust,
    Standard,
    Quantile,
    Log,
    YeoJohnson,
    KBins,
}

pub(super) fn scale_columns(
    d: &Dataset,
    op: OperatorId,
    scaler: Scaler,
) -> Result<Dataset, OperatorError> {
    if !d.columns().iter().any(|c| c.as_numeric().is_some()) {
        return Err(inapplicable(op, "no numeric columns"));
    }
    let columns = d
        .columns()
        .iter()
        .map(|c| match &c.data {
            ColumnData::Numeric(cells) => Column::numeric(c.name.clone(), scale_one(cells, scaler)),
            _ => c.clone(),
        })
        .collect();
    finish(d, op, columns)
}

fn map_observed(cells: &[Option<f64>], f: impl Fn(f64) -> f64) -> Vec<Option<f64>> {
    cells.iter().map(|x| x.map(&f)).collect()
}

fn scale_one(cells: &[Option<f64>], scaler: Scaler) -> Vec<Option<f64>> {
    let sorted = sorted_observed(cells);
    if sorted.is_empty() {
        return cells.to_vec();
    }
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    match scaler {
        Scaler::MinMax => {
            let range = max - min;
            if range == 0.0 {
                map_observed(cells, |_| 0.0)
            } else {
                map_observed(cells, |x| ((x - min) / range).clamp(0.0, 1.0))
            }
        }
        Scaler::MaxAbs => {
            let m = min.abs().max(max.abs());
            let m = if m == 0.0 { 1.0 } else { m };
            map_observed(cells, |x| x / m)
        }
        Scaler::Robust => {
            let med = median_sorted(&sorted);
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            let s = if iqr == 0.0 { 1.0 } else { iqr };
            map_observed(cells, |x| (x - med) / s)
        }
        Scaler::Standard => {
            let m = mean(&sorted);
            let sd = variance(&sorted).sqrt();
            let sd = if sd == 0.0 { 1.0 } else { sd };
            map_observed(cells, |x| (x - m) / sd)
        }
        Scaler::Quantile => {
            let n = sorted.len();
            map_observed(cells, |x| {
                if n == 1 {
                    return 0.0;
                }
                let lo = sorted.partition_point(|&v| v < x);
                let hi = sorted.partition_point(|&v| v <= x) - 1;
                ((lo + hi) as f64 / 2.0) / (n - 1) as f64
            })
        }
        Scaler::Log => {
            let shift = min.min(0.0);
            map_observed(cells, |x| (x - shift).ln_1p())
        }
        Scaler::YeoJohnson => {
            let lambda = yeo_johnson_lambda(&sorted);
            map_observed(cells, |x| yeo_johnson(x, lambda))
        }
        Scaler::KBins => {
            // Equal-frequency edges; bins narrower than 1e-8 are merged.
            let mut edges: Vec<f64> = Vec::with_capacity(KBINS + 1);
            for i in 0..=KBINS {
                let e = quantile_sorted(&sorted, i as f64 / KBINS as f64);
                if edges.last().is_none_or(|&last| e - last > 1e-8) {
                    edges.push(e);
                }
            }
            let interior: Vec<f64> = if edges.len() > 2 {
                edges[1..edges.len() - 1].to_vec()
            } else {
                Vec::new()
            };
            map_observed(cells, |x| {
                interior.iter().filter(|&&e| e <= x).count() as f64
            })
        }
    }
}

pub(crate) fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda.abs() < 1e-12 {
            x.ln_1p()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < 1e-12 {
        -(-x).ln_1p()
    } else {
        -((1.0 - x).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

/// Log-likelihood of the Yeo-Johnson model at `lambda` (normal errors).
pub(crate) fn yeo_johnson_log_likelihood(values: &[f64], lambda: f64) -> f64 {
    let n = values.len() as f64;
    let transformed: Vec<f64> = values.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    if transformed.iter().any(|t| !t.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let var = variance(&transformed);
    if var <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = values.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

/// Grid of 41 candidate exponents `-2.0, -1.9, ..., 2.0`.
pub(crate) fn yeo_johnson_grid() -> impl Iterator<Item = f64> {
    (0..=40).map(|k| (k as f64 - 20.0) / 10.0)
}

fn yeo_johnson_lambda(sorted: &[f64]) -> f64 {
    if variance(sorted) == 0.0 {
        return 1.0;
    }
    let mut best = (f64::NEG_INFINITY, 1.0);
    for lambda in yeo_johnson_grid() {
        let ll = yeo_johnson_log_likelihood(sorted, lambda);
        if ll > best.0 {
            best = (ll, lambda);
        }
    }
    best.1
}

/// Extracts all feature columns as a dense matrix, rejecting categorical or
/// missing cells.
pub(super) fn dense_matrix(
    d: &Dataset,
    op: OperatorId,
) -> Result<(Vec<String>, DMatrix<f64>), OperatorError> {
    if d.n_cols() == 0 {
        return Err(inapplicable(op, "no feature columns"));
    }
    if d.has_categorical() {
        return Err(inapplicable(op, "categorical columns present"));
    }
    if d.has_missing() {
        return Err(inapplicable(op, "missing cells present"));
    }
    let names = d.columns().iter().map(|c| c.name.clone()).collect();
    let n = d.n_rows();
    let m = DMatrix::from_fn(n, d.n_cols(), |r, c| {
        d.columns()[c].as_numeric().expect("numeric")[r].expect("observed")
    });
    Ok((names, m))
}

fn matrix_columns(prefix: &str, m: &DMatrix<f64>) -> Vec<Column> {
    (0..m.ncols())
        .map(|j| Column::dense(format!("{prefix}{j}"), m.column(j).as_slice()))
        .collect()
}

pub(super) fn normalize_rows(d: &Dataset, op: OperatorId) -> Result<Dataset, OperatorError> {
    let (names, mut m) = dense_matrix(d, op)?;
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let columns = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| Column::dense(name, m.column(j).as_slice()))
        .collect();
    finish(d, op, columns)
}

/// Appends degree-two products; `squares` also appends `x_i^2`.
pub(super) fn polynomial(
    d: &Dataset,
    op: OperatorId,
    squares: bool,
) -> Result<Dataset, OperatorError> {
    let (names, m) = dense_matrix(d, op)?;
    let k = names.len();
    if !squares && k < 2 {
        return Err(inapplicable(op, "needs at least two columns"));
    }
    let added = if squares {
        k * (k + 1) / 2
    } else {
        k * (k - 1) / 2
    };
    if k + added > MAX_FEATURE_COLUMNS {
        return Err(inapplicable(
            op,
            format!("output would have {} columns", k + added),
        ));
    }
    let mut columns: Vec<Column> = d.columns().to_vec();
    for i in 0..k {
        for j in i..k {
            if i == j && !squares {
                continue;
            }
            let name = if i == j {
                format!("{}^2", names[i])
            } else {
                format!("{}*{}", names[i], names[j])
            };
            let values: Vec<f64> = m
                .column(i)
                .iter()
                .zip(m.column(j).iter())
                .map(|(a, b)| a * b)
                .collect();
            columns.push(Column::dense(name, &values));
        }
    }
    finish(d, op, columns)
}

pub(super) fn pca(d: &Dataset, op: OperatorId) -> Result<Dataset, OperatorError> {
    let (_, m) = dense_matrix(d, op)?;
    let model = fit_pca(&m, PCA_VARIANCE_TARGET);
    finish(d, op, matrix_columns("pca", &model.transform(&m)))
}

pub(super) fn kernel_pca(d: &Dataset, op: OperatorId) -> Result<Dataset, OperatorError> {
    let (_, m) = dense_matrix(d, op)?;
    let model = fit_kernel_pca(&m, KERNEL_PCA_MAX_COMPONENTS);
    finish(d, op, matrix_columns("kpca", &model.transform(&m)))
}

pub(super) fn truncated_svd(d: &Dataset, op: OperatorId) -> Result<Dataset, OperatorError> {
    let (_, m) = dense_matrix(d, op)?;
    let k = (m.ncols() - 1).min(TRUNCATED_SVD_MAX_COMPONENTS);
    if k == 0 {
        return Err(OperatorError::DegenerateOutput { op });
    }
    let model = fit_truncated_svd(&m, k);
    finish(d, op, matrix_columns("svd", &model.transform(&m)))
}

pub(super) fn variance_threshold(d: &Dataset, op: OperatorId) -> Result<Dataset, OperatorError> {
    let columns: Vec<Column> = d
        .columns()
        .iter()
        .filter(|c| match &c.data {
            ColumnData::Numeric(cells) => variance(&sorted_observed(cells)) > 0.0,
            ColumnData::Categorical(_) => true,
        })
        .cloned()
        .collect();
    if columns.len() == d.n_cols() {
        return Ok(d.clone());
    }
    finish(d, op, columns)
}
