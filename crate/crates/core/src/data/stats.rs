//! Small descriptive-statistics helpers shared by meta-features, operators
//! and the evaluator.
//!
//! Sums are taken over sorted inputs where the result should not depend on
//! row order, so permuting rows leaves every statistic bit-identical.

/// Observed values of a numeric column, sorted ascending.
pub fn sorted_observed(cells: &[Option<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = cells.iter().flatten().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Mean of a slice; the mean of nothing is 0.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by n).
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

pub fn median_sorted(sorted: &[f64]) -> f64 {
    quantile_sorted(sorted, 0.5)
}

/// Fisher-Pearson skewness `m3 / m2^1.5`; 0 for fewer than 3 values or a
/// constant sample.
pub fn skewness(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let m = mean(values);
    let n = values.len() as f64;
    let m2 = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    if m2 <= 1e-24 * (m * m).max(1.0) {
        return 0.0;
    }
    let m3 = values.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let g = m3 / m2.powf(1.5);
    if g.is_finite() {
        g
    } else {
        0.0
    }
}

/// Tukey fences `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]` of sorted data.
pub fn tukey_fences(sorted: &[f64]) -> (f64, f64) {
    let q1 = quantile_sorted(sorted, 0.25);
    let q3 = quantile_sorted(sorted, 0.75);
    let iqr = q3 - q1;
    (q1 - 1.5 * iqr, q3 + 1.5 * iqr)
}

/// Pearson correlation over rows where both cells are observed; 0 when
/// either side has no spread. Pairs are sorted before summing.
pub fn pearson(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.len() < 2 {
        return 0.0;
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
    }

    #[test]
    fn skewness_of_symmetric_and_degenerate_samples() {
        assert_eq!(skewness(&[0.0, 5.0, 10.0]), 0.0);
        assert_eq!(skewness(&[2.0, 2.0, 2.0]), 0.0);
        assert_eq!(skewness(&[1.0, 9.0]), 0.0);
        // [0, 0, 3]: mean 1,
        // m2 = (1 + 1 + 4) / 3 = 2, m3 = (-1 - 1 + 8) / 3 = 2
        let g = skewness(&[0.0, 0.0, 3.0]);
        assert!((g - 2.0 / 2f64.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn pearson_extremes() {
        let a = [Some(1.0), Some(2.0), Some(3.0)];
        let b = [Some(2.0), Some(4.0), Some(6.0)];
        let c = [Some(3.0), Some(2.0), Some(1.0)];
        assert!((pearson(&a, &b) - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &c) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&a, &[Some(1.0), Some(1.0), Some(1.0)]), 0.0);
        assert_eq!(pearson(&a, &[None, Some(1.0), None]), 0.0);
    }
}
