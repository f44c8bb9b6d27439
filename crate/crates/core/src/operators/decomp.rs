//! Matrix factorisations behind the projection operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Rows of kernel PCA's fit set; larger inputs are subsampled at even
/// strides.
pub const KERNEL_PCA_FIT_ROWS: usize = 200;

/// `x -> (x - mean) * components^T`, components stored row-wise.
#[derive(Debug, Clone)]
pub struct LinearProjection {
    pub mean: DVector<f64>,
    pub components: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl LinearProjection {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        centered * self.components.transpose()
    }

    /// Maps projected scores back to input space.
    pub fn inverse_transform(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = scores * &self.components;
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }
}

/// Right singular vectors sorted by decreasing singular value, with each
/// vector's largest-magnitude entry made positive.
fn sorted_right_singular(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut rows = DMatrix::zeros(order.len(), m.ncols());
    for (r, &i) in order.iter().enumerate() {
        let mut row = v_t.row(i).clone_owned();
        flip_sign(row.as_mut_slice());
        rows.set_row(r, &row);
    }
    (values, rows)
}

fn flip_sign(v: &mut [f64]) {
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v.get(pivot).is_some_and(|&p| p < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        m.ncols(),
        m.column_iter()
            .map(|c| c.iter().sum::<f64>() / m.nrows() as f64),
    )
}

/// Principal components of `m`, keeping the fewest components whose
/// explained variance reaches `variance_target` (at least one).
pub fn fit_pca(m: &DMatrix<f64>, variance_target: f64) -> LinearProjection {
    let mean = column_means(m);
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let (values, rows) = sorted_right_singular(&centered);
    let energy: Vec<f64> = values.iter().map(|s| s * s).collect();
    let total: f64 = energy.iter().sum();
    let mut k = 1;
    if total > 0.0 {
        let mut acc = 0.0;
        for (i, e) in energy.iter().enumerate() {
            acc += e;
            k = i + 1;
            if acc / total >= variance_target - 1e-12 {
                break;
            }
        }
    }
    let k = k.min(m.ncols()).min(rows.nrows()).max(1);
    LinearProjection {
        mean,
        components: rows.rows(0, k).clone_owned(),
        singular_values: values[..k].to_vec(),
    }
}

/// Uncentred rank-`k` projection onto the leading right singular vectors.
pub fn fit_truncated_svd(m: &DMatrix<f64>, k: usize) -> LinearProjection {
    let (values, rows) = sorted_right_singular(m);
    let k = k.min(rows.nrows());
    LinearProjection {
        mean: DVector::zeros(m.ncols()),
        components: rows.rows(0, k).clone_owned(),
        singular_values: values[..k].to_vec(),
    }
}

/// RBF kernel PCA fitted on (a stride subsample of) the input rows.
#[derive(Debug, Clone)]
pub struct KernelPcaModel {
    pub gamma: f64,
    fit_rows: DMatrix<f64>,
    /// Eigenvectors scaled by `1/sqrt(eigenvalue)`, one per column.
    alphas: DMatrix<f64>,
    kernel_col_means: DVector<f64>,
    kernel_mean: f64,
    pub eigenvalues: Vec<f64>,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

fn row_vec(m: &DMatrix<f64>, r: usize) -> Vec<f64> {
    m.row(r).iter().copied().collect()
}

pub fn fit_kernel_pca(m: &DMatrix<f64>, max_components: usize) -> KernelPcaModel {
    let n = m.nrows();
    let gamma = 1.0 / m.ncols() as f64;
    let idx: Vec<usize> = if n <= KERNEL_PCA_FIT_ROWS {
        (0..n).collect()
    } else {
        (0..KERNEL_PCA_FIT_ROWS)
            .map(|i| i * n / KERNEL_PCA_FIT_ROWS)
            .collect()
    };
    let fit_rows = m.select_rows(idx.iter());
    let f = fit_rows.nrows();
    let rows: Vec<Vec<f64>> = (0..f).map(|r| row_vec(&fit_rows, r)).collect();
    let kernel = DMatrix::from_fn(f, f, |i, j| rbf(&rows[i], &rows[j], gamma));

    let col_means = column_means(&kernel);
    let total_mean = col_means.iter().sum::<f64>() / f as f64;
    let centered = DMatrix::from_fn(f, f, |i, j| {
        kernel[(i, j)] - col_means[i] - col_means[j] + total_mean
    });

    let eig = SymmetricEigen::new(centered);
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]].max(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > 1e-10 * top.max(1e-300))
        .take(max_components)
        .collect();

    let mut alphas = DMatrix::zeros(f, keep.len().max(1));
    let mut eigenvalues = Vec::new();
    for (c, &i) in keep.iter().enumerate() {
        let lambda = eig.eigenvalues[i];
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        flip_sign(&mut v);
        for (r, x) in v.iter().enumerate() {
            alphas[(r, c)] = x / lambda.sqrt();
        }
        eigenvalues.push(lambda);
    }
    KernelPcaModel {
        gamma,
        fit_rows,
        alphas,
        kernel_col_means: col_means,
        kernel_mean: total_mean,
        eigenvalues,
    }
}

impl KernelPcaModel {
    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let f = self.fit_rows.nrows();
        let fit: Vec<Vec<f64>> = (0..f).map(|r| row_vec(&self.fit_rows, r)).collect();
        let mut out = DMatrix::zeros(x.nrows(), self.alphas.ncols());
        for r in 0..x.nrows() {
            let row = row_vec(x, r);
            let k: Vec<f64> = fit.iter().map(|b| rbf(&row, b, self.gamma)).collect();
            let k_mean = k.iter().sum::<f64>() / f as f64;
            let kc = DVector::from_iterator(
                f,
                k.iter()
                    .zip(self.kernel_col_means.iter())
                    .map(|(kj, cm)| kj - cm - k_mean + self.kernel_mean),
            );
            let proj = kc.transpose() * &self.alphas;
            out.set_row(r, &proj);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_correlated_columns_collapse_to_one_component() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let model = fit_pca(&m, 0.95);
        assert_eq!(model.n_components(), 1);
        // Oracle: centred rows are multiples of (1, 2); the only direction
        // is (1, 2) / sqrt(5).
        let c = model.components.row(0);
        let s5 = 5f64.sqrt();
        assert!((c[0] - 1.0 / s5).abs() < 1e-12 && (c[1] - 2.0 / s5).abs() < 1e-12);
        let recon = model.inverse_transform(&model.transform(&m));
        assert!((recon - &m).abs().max() < 1e-12);
    }

    #[test]
    fn components_are_orthonormal() {
        let m = DMatrix::from_fn(20, 4, |r, c| {
            ((r * 7 + c * 3) % 11) as f64 + (r * c) as f64 * 0.1
        });
        let model = fit_pca(&m, 1.0);
        let g = &model.components * model.components.transpose();
        let eye = DMatrix::<f64>::identity(g.nrows(), g.ncols());
        assert!((g - eye).abs().max() < 1e-8);
    }

    #[test]
    fn truncated_svd_is_uncentred() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let model = fit_truncated_svd(&m, 1);
        assert_eq!(model.singular_values, vec![3.0]);
        let z = model.transform(&m);
        assert!((z[(0, 0)] - 3.0).abs() < 1e-12 && z[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn kernel_pca_matches_fit_scores_on_training_rows() {
        let m = DMatrix::from_fn(12, 2, |r, c| {
            (r as f64 * 0.3).sin() + c as f64 * (r as f64) * 0.05
        });
        let model = fit_kernel_pca(&m, 3);
        let z = model.transform(&m);
        assert_eq!(z.ncols(), 3);
        // On the fit set, squared column norms equal the eigenvalues.
        for (c, lambda) in model.eigenvalues.iter().enumerate() {
            let norm2: f64 = z.column(c).iter().map(|x| x * x).sum();
            assert!((norm2 - lambda).abs() < 1e-8 * lambda.max(1.0));
        }
    }
}
