//! Downstream model: multinomial logistic regression trained by full-batch
//! gradient descent, plus the step reward used by the agent.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{stats, ColumnData, Dataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("training split has fewer than two classes")]
    SingleClassTrain,
    #[error("dataset has no feature columns")]
    DegenerateOutput,
    #[error("validation split is empty")]
    EmptyValidation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub l2_penalty: f64,
    pub max_iterations: usize,
    pub learning_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            l2_penalty: 1e-4,
            max_iterations: 300,
            learning_rate: 0.1,
        }
    }
}

/// Dense model input: one row per example, columns named.
#[derive(Debug, Clone)]
pub struct ModelInput {
    pub feature_names: Vec<String>,
    pub x: DMatrix<f64>,
    pub labels: Vec<String>,
}

/// Turns any dataset into a finite numeric matrix. Categoricals are
/// ordinal-encoded by sorted category, missing numerics take the column mean
/// (0 when nothing is observed) and missing categoricals the column mode.
pub fn coerce_for_model(d: &Dataset) -> Result<ModelInput, EvalError> {
    if d.n_cols() == 0 {
        return Err(EvalError::DegenerateOutput);
    }
    let n = d.n_rows();
    let mut x = DMatrix::zeros(n, d.n_cols());
    for (j, col) in d.columns().iter().enumerate() {
        match &col.data {
            ColumnData::Numeric(cells) => {
                let fill = stats::mean(&stats::sorted_observed(cells));
                for (i, c) in cells.iter().enumerate() {
                    x[(i, j)] = c.unwrap_or(fill);
                }
            }
            ColumnData::Categorical(cells) => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for c in cells.iter().flatten() {
                    *counts.entry(c.as_str()).or_default() += 1;
                }
                let codes: BTreeMap<&str, f64> = counts
                    .keys()
                    .enumerate()
                    .map(|(k, &v)| (v, k as f64))
                    .collect();
                // first maximal entry in sorted order, so ties go to the smallest
                let mode = counts
                    .iter()
                    .fold(None::<(&str, usize)>, |best, (&v, &c)| match best {
                        Some((_, bc)) if bc >= c => best,
                        _ => Some((v, c)),
                    })
                    .map_or(0.0, |(v, _)| codes[v]);
                for (i, c) in cells.iter().enumerate() {
                    x[(i, j)] = c.as_deref().map_or(mode, |v| codes[v]);
                }
            }
        }
    }
    Ok(ModelInput {
        feature_names: d.columns().iter().map(|c| c.name.clone()).collect(),
        x,
        labels: d.target().to_vec(),
    })
}

/// Reorders `val` columns to match `train_names`; absent columns are zero.
fn align(train_names: &[String], val: &ModelInput) -> DMatrix<f64> {
    let index: BTreeMap<&str, usize> = val
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, n)| (n.as_str(), j))
        .collect();
    let mut out = DMatrix::zeros(val.x.nrows(), train_names.len());
    for (j, name) in train_names.iter().enumerate() {
        if let Some(&src) = index.get(name.as_str()) {
            out.set_column(j, &val.x.column(src));
        }
    }
    out
}

/// Softmax regression weights; `weights` is features x classes.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub classes: Vec<String>,
    pub weights: DMatrix<f64>,
    pub bias: RowDVector<f64>,
    /// Objective value after each accepted step, starting at the zero init.
    pub loss_history: Vec<f64>,
}

fn logits(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &RowDVector<f64>) -> DMatrix<f64> {
    let mut z = x * w;
    for mut row in z.row_iter_mut() {
        row += b;
    }
    z
}

/// Mean cross-entropy plus `l2/2 * ||W||^2` and the class probabilities.
fn forward(
    x: &DMatrix<f64>,
    y: &[usize],
    w: &DMatrix<f64>,
    b: &RowDVector<f64>,
    l2: f64,
) -> (f64, DMatrix<f64>) {
    let mut p = logits(x, w, b);
    let mut ce = 0.0;
    for (i, mut row) in p.row_iter_mut().enumerate() {
        let m = row.max();
        let z_y = row[y[i]];
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        ce += s.ln() + m - z_y;
        row /= s;
    }
    let n = x.nrows() as f64;
    (ce / n + 0.5 * l2 * w.norm_squared(), p)
}

fn gradient_from(
    x: &DMatrix<f64>,
    y: &[usize],
    w: &DMatrix<f64>,
    probs: &DMatrix<f64>,
    l2: f64,
) -> (DMatrix<f64>, RowDVector<f64>) {
    let n = x.nrows() as f64;
    let mut residual = probs.clone();
    for (i, &c) in y.iter().enumerate() {
        residual[(i, c)] -= 1.0;
    }
    residual /= n;
    let gw = x.transpose() * &residual + w * l2;
    let gb = residual.row_sum();
    (gw, gb)
}

/// Objective and its analytic gradient at `(w, b)`.
pub fn loss_and_gradient(
    x: &DMatrix<f64>,
    y: &[usize],
    w: &DMatrix<f64>,
    b: &RowDVector<f64>,
    l2: f64,
) -> (f64, DMatrix<f64>, RowDVector<f64>) {
    let (loss, p) = forward(x, y, w, b, l2);
    let (gw, gb) = gradient_from(x, y, w, &p, l2);
    (loss, gw, gb)
}

const GRADIENT_TOLERANCE: f64 = 1e-10;
const MIN_STEP: f64 = 1e-12;

impl LogisticModel {
    /// Gradient descent from zero. A step that would raise the objective is
    /// halved until it does not, and the smaller rate is kept from then on.
    pub fn fit(x: &DMatrix<f64>, y: &[usize], classes: Vec<String>, cfg: &ModelConfig) -> Self {
        let k = classes.len();
        let mut w = DMatrix::zeros(x.ncols(), k);
        let mut b = RowDVector::zeros(k);
        let (mut loss, mut probs) = forward(x, y, &w, &b, cfg.l2_penalty);
        let mut history = vec![loss];
        let mut lr = cfg.learning_rate;
        'outer: for _ in 0..cfg.max_iterations {
            let (gw, gb) = gradient_from(x, y, &w, &probs, cfg.l2_penalty);
            if (gw.norm_squared() + gb.norm_squared()).sqrt() < GRADIENT_TOLERANCE {
                break;
            }
            loop {
                let w_next = &w - &gw * lr;
                let b_next = &b - &gb * lr;
                let (l_next, p_next) = forward(x, y, &w_next, &b_next, cfg.l2_penalty);
                if l_next.is_finite() && l_next <= loss {
                    w = w_next;
                    b = b_next;
                    loss = l_next;
                    probs = p_next;
                    history.push(loss);
                    break;
                }
                lr *= 0.5;
                if lr < MIN_STEP {
                    break 'outer;
                }
            }
        }
        LogisticModel {
            classes,
            weights: w,
            bias: b,
            loss_history: history,
        }
    }

    /// Predicted class index per row; ties go to the lower index.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let z = logits(x, &self.weights, &self.bias);
        z.row_iter()
            .map(|row| {
                let mut best = 0;
                for (c, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Fits on `train` and returns accuracy on `val`. Validation features are
/// matched to training features by name. Validation labels never seen in
/// training count as errors.
pub fn train_and_eval(train: &Dataset, val: &Dataset, cfg: &ModelConfig) -> Result<f64, EvalError> {
    let classes = train.classes();
    if classes.len() < 2 {
        return Err(EvalError::SingleClassTrain);
    }
    if val.n_rows() == 0 {
        return Err(EvalError::EmptyValidation);
    }
    let tr = coerce_for_model(train)?;
    let va = coerce_for_model(val)?;
    let y: Vec<usize> = tr
        .labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label in class list"))
        .collect();
    let model = LogisticModel::fit(&tr.x, &y, classes, cfg);
    let xv = align(&tr.feature_names, &va);
    let predicted = model.predict(&xv);
    let correct = predicted
        .iter()
        .zip(&va.labels)
        .filter(|(&p, label)| model.classes[p] == **label)
        .count();
    Ok(correct as f64 / va.labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Reward(pub f64);

impl Reward {
    pub const INAPPLICABLE_PENALTY: f64 = -0.05;

    pub fn inapplicable() -> Self {
        Reward(Self::INAPPLICABLE_PENALTY)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Accuracy delta, plus the final accuracy on the terminal step.
pub fn compute_reward(acc_prev: f64, acc_next: f64, is_terminal: bool, final_acc: f64) -> Reward {
    let delta = acc_next - acc_prev;
    Reward(if is_terminal {
        delta + final_acc
    } else {
        delta
    })
}
